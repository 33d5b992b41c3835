#include "vebs/vea.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vebs/errors.hpp"
#include "vebs/units.hpp"

namespace vebs::vea {

double active_force_raw(const ForceSurface& s, double l, double p) {
  return s.a + s.b * l + s.c * p + s.d * l * l + s.e * p * p + s.f * l * p;
}

double active_force(const ForceSurface& s, double l, double p) {
  return std::max(active_force_raw(s, l, p), 0.0);
}

SurfaceFit fit_force_surface(std::span<const SurfaceSample> samples) {
  if (samples.size() < 6) {
    throw NoSolutionError("surface fit needs at least 6 samples, got " +
                          std::to_string(samples.size()));
  }
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd X(n, 6);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    X(i, 0) = 1.0;
    X(i, 1) = s.elongation_mm;
    X(i, 2) = s.p_psig;
    X(i, 3) = s.elongation_mm * s.elongation_mm;
    X(i, 4) = s.p_psig * s.p_psig;
    X(i, 5) = s.elongation_mm * s.p_psig;
    y(i) = s.force_n;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < 6) {
    throw NoSolutionError("surface fit design matrix is rank-deficient (rank " +
                          std::to_string(qr.rank()) + " < 6); samples do not span the model");
  }
  const Eigen::VectorXd beta = qr.solve(y);
  SurfaceFit fit;
  fit.surface = ForceSurface{beta(0), beta(1), beta(2), beta(3), beta(4), beta(5)};
  fit.rms_residual_n = std::sqrt((X * beta - y).squaredNorm() / static_cast<double>(n));
  return fit;
}

double total_force(const DeviceParams& dev, const DeviceState& st) {
  const double l_eff = std::max(st.elongation_mm - st.slack_offset_mm, 0.0);
  const double p_psig = units::pa_to_psig(st.pneumo.p, dev.gas.p_atm);
  const double active = active_force(dev.surface, l_eff, p_psig);
  const double passive = band::passive_force(dev.band, st.clutch, l_eff, st.unloading);
  return active + passive;
}

namespace {

struct TriangleProfile {
  double rate_mm_s;
  double peak_mm;
  double hold_s;
  double t_up, t_hold_end, t_end;

  TriangleProfile(double peak, double rate_mm_per_min, double hold)
      : rate_mm_s(units::mm_per_min_to_mm_per_s(rate_mm_per_min)),
        peak_mm(peak),
        hold_s(hold) {
    if (peak <= 0 || rate_mm_s <= 0) {
      throw std::invalid_argument("scenario needs positive peak and rate");
    }
    t_up = peak_mm / rate_mm_s;
    t_hold_end = t_up + hold_s;
    t_end = t_hold_end + t_up;
  }

  [[nodiscard]] double elongation(double t) const {
    if (t <= t_up) return rate_mm_s * t;
    if (t <= t_hold_end) return peak_mm;
    return std::max(peak_mm - rate_mm_s * (t - t_hold_end), 0.0);
  }
  [[nodiscard]] BenchPhase phase(double t) const {
    if (t < t_up) return BenchPhase::loading;
    if (t <= t_hold_end) return BenchPhase::hold;
    return BenchPhase::unloading;
  }
};

}  // namespace

std::vector<TracePoint> simulate_quasistatic(const DeviceParams& dev,
                                             const QuasiStaticScenario& sc) {
  const TriangleProfile prof(sc.peak_mm, sc.rate_mm_per_min, sc.hold_s);
  for (auto threshold : {sc.clutch_engage_at_mm, sc.clutch_disengage_at_mm}) {
    if (threshold && (*threshold < 0.0 || *threshold > sc.peak_mm)) {
      throw ConfigError("clutch schedule threshold outside [0, peak]");
    }
  }
  const double disengage_at =
      sc.clutch_disengage_at_mm.value_or(sc.clutch_engage_at_mm.value_or(0.0));

  band::ClutchLatch latch(dev.band.clutch_latency_s);
  if (sc.clutch_engaged_throughout) latch.command(true, -dev.band.clutch_latency_s);

  std::vector<TracePoint> trace;
  const auto steps = static_cast<std::size_t>(std::ceil(prof.t_end / sc.dt_s)) + 1;
  trace.reserve(steps);

  for (std::size_t i = 0; i < steps; ++i) {
    const double t = std::min(static_cast<double>(i) * sc.dt_s, prof.t_end);
    const double l = prof.elongation(t);
    const BenchPhase phase = prof.phase(t);

    if (!sc.clutch_engaged_throughout && sc.clutch_engage_at_mm) {
      if (phase == BenchPhase::loading && l >= *sc.clutch_engage_at_mm) latch.command(true, t);
      if (phase == BenchPhase::unloading && l <= disengage_at) latch.command(false, t);
    }
    const band::ClutchState clutch = latch.update(t, l);

    TracePoint pt;
    pt.t_s = t;
    pt.elongation_mm = l;
    pt.phase = phase;
    pt.clutch_engaged = clutch.engaged;
    pt.p_psig = sc.pressure_hold_psig.value_or(0.0);
    pt.active_n = sc.pressure_hold_psig ? active_force(dev.surface, l, *sc.pressure_hold_psig) : 0.0;
    pt.passive_n = band::passive_force(dev.band, clutch, l, phase == BenchPhase::unloading);
    pt.force_n = pt.active_n + pt.passive_n;
    trace.push_back(pt);
  }
  return trace;
}

DynamicResult simulate_dynamic(const DeviceParams& dev, const DynamicScenario& sc) {
  const TriangleProfile prof(sc.peak_mm, sc.rate_mm_per_min, 0.0);
  if (sc.deflate_delay_s < 0) throw ConfigError("deflate delay must be >= 0");
  if (sc.deflate_target_psig < 0 || sc.deflate_target_psig > sc.inflate_psig) {
    throw ConfigError("deflate target must lie in [0, inflate pressure]");
  }

  const double p_target = units::psig_to_pa(sc.deflate_target_psig, dev.gas.p_atm);
  const double deflate_start = prof.t_up + sc.deflate_delay_s;

  DynamicResult res;
  res.return_onset_s = prof.t_up;
  res.return_duration_s = prof.t_end - prof.t_up;

  pneumo::PneumaticState gas = pneumo::make_state(
      dev.ipam, units::mm_to_m(prof.elongation(0.0)), units::psig_to_pa(sc.inflate_psig, dev.gas.p_atm),
      units::psig_to_pa(dev.reservoir_setpoint_psig, dev.gas.p_atm), dev.gas);

  const auto steps = static_cast<std::size_t>(std::ceil(prof.t_end / sc.dt_s)) + 1;
  res.trace.reserve(steps);

  for (std::size_t i = 0; i < steps; ++i) {
    const double t = std::min(static_cast<double>(i) * sc.dt_s, prof.t_end);
    const double l = prof.elongation(t);
    const double l_m = units::mm_to_m(l);
    const BenchPhase phase = prof.phase(t);

    if (phase == BenchPhase::loading) {
      // Supply-regulated during the pull: tracks the inflation setpoint.
      gas = pneumo::make_state(dev.ipam, l_m, units::psig_to_pa(sc.inflate_psig, dev.gas.p_atm),
                               gas.p_reservoir, dev.gas);
    } else if (t < deflate_start) {
      gas = pneumo::step_hold(gas, dev.ipam, l_m, dev.gas);  // detection delay: sealed
    } else {
      gas = pneumo::step_hold(gas, dev.ipam, l_m, dev.gas);
      if (gas.p > p_target) {
        gas = pneumo::step_deflate(gas, dev.ipam, l_m, dev.deflate_path, dev.gas, sc.dt_s);
      }
    }

    TracePoint pt;
    pt.t_s = t;
    pt.elongation_mm = l;
    pt.phase = phase;
    pt.p_psig = units::pa_to_psig(gas.p, dev.gas.p_atm);
    pt.active_n = active_force(dev.surface, l, pt.p_psig);
    pt.passive_n = band::passive_force(dev.band, l, phase == BenchPhase::unloading);
    pt.force_n = pt.active_n + pt.passive_n;
    res.trace.push_back(pt);

    if (phase == BenchPhase::unloading && pt.active_n > res.peak_active_n) {
      res.peak_active_n = pt.active_n;
      res.peak_active_time_s = t;
    }
  }
  res.peak_active_percent_of_return =
      100.0 * (res.peak_active_time_s - res.return_onset_s) / res.return_duration_s;
  return res;
}

double DynamicResult::active_fraction_at(double dt_after_onset_s) const {
  const double t_query = return_onset_s + dt_after_onset_s;
  const TracePoint* best = nullptr;
  for (const auto& pt : trace) {
    if (pt.t_s <= t_query) best = &pt;
  }
  if (!best || peak_active_n <= 0.0) return 0.0;
  return best->active_n / peak_active_n;
}

double cycle_energy(std::span<const TracePoint> trace, double closure_tol_mm) {
  if (trace.size() < 2) throw std::invalid_argument("cycle energy needs at least two samples");
  if (std::abs(trace.front().elongation_mm - trace.back().elongation_mm) > closure_tol_mm) {
    throw std::invalid_argument("open cycle: elongation endpoints differ by more than " +
                                std::to_string(closure_tol_mm) + " mm");
  }
  double work_on_device_nmm = 0.0;  // integral F dl along the trace
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const double dl = trace[i].elongation_mm - trace[i - 1].elongation_mm;
    work_on_device_nmm += 0.5 * (trace[i].force_n + trace[i - 1].force_n) * dl;
  }
  // Work done by the device on the wearer is the negative loop integral.
  return -work_on_device_nmm * 1e-3;
}

DeviceParams default_device() {
  DeviceParams dev;
  dev.band = band::model_from_stiffness_targets(0.875, 1.313);
  // Deflate path sized so a 50 psig charge vents to atmosphere in 0.8 s at
  // peak bench elongation (see calibrate_orifice); inflate path matches.
  dev.deflate_path = pneumo::FlowPath{0.8, 1.058386734769e-6};
  dev.inflate_path = dev.deflate_path;
  return dev;
}

}  // namespace vebs::vea
