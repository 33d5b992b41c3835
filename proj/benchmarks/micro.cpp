// Microbenchmarks for the hot paths: orifice flow, the force surface, window
// feature extraction, forest prediction, and the frame QP.

#include <benchmark/benchmark.h>

#include <span>
#include <vector>

#include "vebs/estimator.hpp"
#include "vebs/forest.hpp"
#include "vebs/liftopt.hpp"
#include "vebs/pneumo.hpp"
#include "vebs/qp.hpp"
#include "vebs/synth.hpp"
#include "vebs/units.hpp"
#include "vebs/vea.hpp"

using namespace vebs;

namespace {

const std::vector<est::SensorFrame>& trial() {
  static const std::vector<est::SensorFrame> t =
      synth::generate_trial(synth::SubjectParams{}, ctrl::WeightClass::kg15, 0);
  return t;
}

const est::ForestModel& state_model() {
  static const est::ForestModel model = [] {
    const synth::SubjectParams subject;
    const std::vector<synth::TrialSpec> specs = {{ctrl::WeightClass::kg0, 2},
                                                 {ctrl::WeightClass::kg7_5, 2},
                                                 {ctrl::WeightClass::kg15, 2}};
    const synth::Dataset ds = synth::generate_dataset(subject, specs, 0.7);
    const synth::WindowSet ws = synth::windowed_features(ds.train, est::FeatureMode::state, 4, 10);
    est::ForestParams params;
    params.n_trees = 50;
    return est::train_forest(ws.features, ws.labels, synth::state_class_names(), params);
  }();
  return model;
}

void BM_MassFlow(benchmark::State& state) {
  const pneumo::FlowPath path{0.8, 1.058e-6};
  const pneumo::GasConstants gas;
  const double p_up = units::psig_to_pa(50.0);
  double p_down = gas.p_atm;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pneumo::mass_flow(p_up, p_down, path, gas));
    p_down += 1.0;  // sweep through both regimes over the run
    if (p_down >= p_up) p_down = gas.p_atm;
  }
}
BENCHMARK(BM_MassFlow);

void BM_StepDeflate(benchmark::State& state) {
  const pneumo::IpamGeometry geom;
  const pneumo::GasConstants gas;
  const pneumo::FlowPath path{0.8, 1.058e-6};
  const double el = 0.110;
  pneumo::PneumaticState st =
      pneumo::make_state(geom, el, units::psig_to_pa(50.0), units::psig_to_pa(90.0), gas);
  for (auto _ : state) {
    st = pneumo::step_deflate(st, geom, el, path, gas, 1e-3);
    if (st.p < gas.p_atm + 100.0) st.p = units::psig_to_pa(50.0);
    benchmark::DoNotOptimize(st);
  }
}
BENCHMARK(BM_StepDeflate);

void BM_ActiveForce(benchmark::State& state) {
  const vea::ForceSurface surface;
  double l = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(vea::active_force(surface, l, 25.0));
    l = l < 120.0 ? l + 0.01 : 0.0;
  }
}
BENCHMARK(BM_ActiveForce);

void BM_ExtractFeatures(benchmark::State& state) {
  const auto& frames = trial();
  const auto window = std::span(frames).subspan(100, est::kWindowSamples);
  for (auto _ : state) {
    benchmark::DoNotOptimize(est::extract_features(window, est::FeatureMode::weight));
  }
}
BENCHMARK(BM_ExtractFeatures);

void BM_ForestPredict(benchmark::State& state) {
  const est::ForestModel& model = state_model();
  const auto& frames = trial();
  const auto window = std::span(frames).subspan(100, est::kWindowSamples);
  const std::vector<double> features = est::extract_features(window, est::FeatureMode::state);
  for (auto _ : state) {
    benchmark::DoNotOptimize(est::predict(model, features));
  }
}
BENCHMARK(BM_ForestPredict);

void BM_QpSolve(benchmark::State& state) {
  // One lumbar frame: three muscles plus the device column on two joints.
  qp::Problem p;
  p.n = 4;
  p.m = 2;
  p.a = {520.0, -180.0, 31.5, 1781.9,  //
         260.0, 410.0, -22.0, 1272.8};
  p.b = {25.0, 18.0};
  p.lower = {0.01, 0.01, 0.01, 0.001};
  p.upper = {1.0, 1.0, 1.0, 0.01};
  for (auto _ : state) {
    benchmark::DoNotOptimize(qp::solve(p));
  }
}
BENCHMARK(BM_QpSolve);

void BM_SolveFrame(benchmark::State& state) {
  const lift::SurrogateTrial trial = lift::make_surrogate_trial({});
  const std::optional<lift::PathActuatorDef> device = lift::PathActuatorDef{};
  const lift::LiftFrame& frame = trial.frames[trial.frames.size() / 2];
  for (auto _ : state) {
    benchmark::DoNotOptimize(lift::solve_frame(frame, trial.muscles, device));
  }
}
BENCHMARK(BM_SolveFrame);

}  // namespace

BENCHMARK_MAIN();
