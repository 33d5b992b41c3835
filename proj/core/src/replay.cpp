#include "vebs/replay.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "vebs/band.hpp"
#include "vebs/csv.hpp"
#include "vebs/units.hpp"

namespace vebs::replay {

namespace {

ctrl::TrunkState state_from_model(const est::ForestModel& model, int label) {
  const auto s = ctrl::trunk_state_from(model.class_names[static_cast<std::size_t>(label)]);
  if (!s) throw std::invalid_argument("state model predicts unknown class");
  return *s;
}

ctrl::WeightClass weight_from_model(const est::ForestModel& model, int label) {
  const auto w = ctrl::weight_class_from(model.class_names[static_cast<std::size_t>(label)]);
  if (!w) throw std::invalid_argument("weight model predicts unknown class");
  return *w;
}

void validate_models(const Models& models) {
  const auto expect = [](const est::ForestModel& m, est::FeatureMode mode, const char* what) {
    const auto dim = static_cast<std::size_t>(est::channel_count(mode)) *
                     static_cast<std::size_t>(est::kStatsPerChannel);
    if (m.feature_mean.size() != dim) {
      throw std::invalid_argument(std::string(what) +
                                  " model feature dimension does not match the trace channels");
    }
    if (m.trees.empty()) throw std::invalid_argument(std::string(what) + " model has no trees");
  };
  expect(models.state, est::FeatureMode::state, "state");
  expect(models.weight, est::FeatureMode::weight, "weight");
  for (const auto& name : models.state.class_names) {
    if (!ctrl::trunk_state_from(name)) {
      throw std::invalid_argument("state model class '" + name + "' is not a trunk state");
    }
  }
  for (const auto& name : models.weight.class_names) {
    if (!ctrl::weight_class_from(name)) {
      throw std::invalid_argument("weight model class '" + name + "' is not a weight class");
    }
  }
}

}  // namespace

ReplayResult replay(std::span<const est::SensorFrame> trace, const Models& models,
                    const ReplayConfig& cfg, const ElongationMap& elongation_map,
                    const PredictionHook& hook) {
  if (trace.empty()) throw std::invalid_argument("empty trace");
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].t_s <= trace[i - 1].t_s) {
      throw std::invalid_argument("trace timestamps must be strictly increasing");
    }
  }
  validate_models(models);
  if (cfg.dwell_samples < 1) throw std::invalid_argument("dwell_samples must be >= 1");
  if (!(cfg.rom_max_deg > 0) || !(cfg.elongation_max_mm > 0)) {
    throw std::invalid_argument("rom_max_deg and elongation_max_mm must be positive");
  }

  const ElongationMap emap = elongation_map ? elongation_map : [&cfg](double angle_deg) {
    const double clamped = std::clamp(angle_deg, 0.0, cfg.rom_max_deg);
    return cfg.elongation_max_mm * clamped / cfg.rom_max_deg;
  };

  const auto& dev = cfg.device;
  est::DwellFilter state_filter(cfg.dwell_samples);
  est::DwellFilter weight_filter(cfg.dwell_samples);
  ctrl::Controller controller(cfg.controller);
  band::ClutchLatch latch(dev.band.clutch_latency_s);

  const double elong0_mm = std::max(emap(trace.front().alpha_deg), 0.0);
  pneumo::PneumaticState gas = pneumo::make_state(
      dev.ipam, units::mm_to_m(elong0_mm), dev.gas.p_atm,
      units::psig_to_pa(dev.reservoir_setpoint_psig), dev.gas);
  const double reservoir_cap_pa = units::psig_to_pa(dev.reservoir_setpoint_psig);

  ReplayResult out;
  out.records.reserve(trace.size());
  double prev_elong_mm = elong0_mm;

  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& frame = trace[i];
    ctrl::TrunkState raw_state = ctrl::TrunkState::standing;
    ctrl::WeightClass raw_weight = ctrl::WeightClass::kg0;
    if (i + 1 >= static_cast<std::size_t>(est::kWindowSamples)) {
      const auto window = trace.subspan(i + 1 - static_cast<std::size_t>(est::kWindowSamples),
                                        static_cast<std::size_t>(est::kWindowSamples));
      const auto fs = est::extract_features(window, est::FeatureMode::state);
      const auto fw = est::extract_features(window, est::FeatureMode::weight);
      raw_state = state_from_model(models.state, est::predict(models.state, fs).label);
      raw_weight = weight_from_model(models.weight, est::predict(models.weight, fw).label);
    }
    if (hook) hook(i, raw_state, raw_weight);

    const auto state = static_cast<ctrl::TrunkState>(state_filter.step(static_cast<int>(raw_state)));
    const auto weight =
        static_cast<ctrl::WeightClass>(weight_filter.step(static_cast<int>(raw_weight)));

    ctrl::ControllerInput in;
    in.t_s = frame.t_s;
    in.state = state;
    in.weight = weight;
    in.trunk_angle_deg = frame.alpha_deg;
    in.ipam_psig = units::pa_to_psig(gas.p);
    in.reservoir_psig = units::pa_to_psig(gas.p_reservoir);
    const ctrl::ControllerOutput cmd = controller.step(in);

    const double elong_mm = std::max(emap(frame.alpha_deg), 0.0);
    const double elong_m = units::mm_to_m(elong_mm);
    latch.command(cmd.clutch_commanded, frame.t_s);
    const band::ClutchState clutch = latch.update(frame.t_s, elong_mm);

    const double dt = i + 1 < trace.size() ? trace[i + 1].t_s - frame.t_s
                                           : (i > 0 ? frame.t_s - trace[i - 1].t_s : 0.01);
    if (cmd.valves.v1_inflate) {
      gas = pneumo::step_inflate(gas, dev.ipam, elong_m, dev.inflate_path, dev.gas, dt,
                                 dev.reservoir_volume_m3);
    } else if (cmd.valves.v2_release) {
      gas = pneumo::step_deflate(gas, dev.ipam, elong_m, dev.deflate_path, dev.gas, dt);
    } else {
      gas = pneumo::step_hold(gas, dev.ipam, elong_m, dev.gas);
    }
    if (cmd.valves.pump_on) {
      gas.p_reservoir = std::min(
          gas.p_reservoir + cfg.pump_rate_psi_s * dt * units::kPaPerPsi, reservoir_cap_pa);
    }

    const bool unloading = elong_mm < prev_elong_mm - 1e-9;
    prev_elong_mm = elong_mm;

    FrameRecord rec;
    rec.t_s = frame.t_s;
    rec.trunk_angle_deg = frame.alpha_deg;
    rec.raw_state = raw_state;
    rec.raw_weight = raw_weight;
    rec.state = state;
    rec.weight = weight;
    rec.command = cmd;
    rec.clutch_engaged = clutch.engaged;
    rec.p_psig = units::pa_to_psig(gas.p);
    rec.reservoir_psig = units::pa_to_psig(gas.p_reservoir);
    rec.elongation_mm = elong_mm;
    rec.f_active_n = vea::active_force(dev.surface, elong_mm, rec.p_psig);
    rec.f_passive_n = band::passive_force(dev.band, clutch, elong_mm, unloading);
    rec.f_total_n = rec.f_active_n + rec.f_passive_n;
    out.peak_force_n = std::max(out.peak_force_n, rec.f_total_n);
    out.records.push_back(rec);
  }

  // Cycle segmentation on the filtered state: a cycle spans from leaving
  // standing to the frame before re-entering it.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::size_t cycle_start = kNone;
  for (std::size_t i = 1; i < out.records.size(); ++i) {
    const bool was_standing = out.records[i - 1].state == ctrl::TrunkState::standing;
    const bool is_standing = out.records[i].state == ctrl::TrunkState::standing;
    if (was_standing && !is_standing) cycle_start = i;
    if (!was_standing && is_standing && cycle_start != kNone) {
      CycleSummary cyc;
      cyc.first_frame = cycle_start;
      cyc.last_frame = i;  // include the closing standing frame
      cyc.pickup = out.records[cycle_start].weight == ctrl::WeightClass::kg0;
      std::vector<vea::TracePoint> pts;
      pts.reserve(cyc.last_frame - cyc.first_frame + 1);
      for (std::size_t k = cyc.first_frame; k <= cyc.last_frame; ++k) {
        vea::TracePoint pt;
        pt.t_s = out.records[k].t_s;
        pt.elongation_mm = out.records[k].elongation_mm;
        pt.force_n = out.records[k].f_total_n;
        pts.push_back(pt);
      }
      cyc.energy_j = vea::cycle_energy(pts, 8.0);
      out.cycles.push_back(cyc);
      cycle_start = kNone;
    }
  }

  // Deflation latency against labeled extension onsets, when labels exist.
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (!trace[i].label_state || !trace[i - 1].label_state) continue;
    if (*trace[i - 1].label_state == ctrl::TrunkState::stooped &&
        *trace[i].label_state == ctrl::TrunkState::extending) {
      const double onset = trace[i].t_s;
      double next_onset = trace.back().t_s + 1.0;
      for (std::size_t k = i + 1; k < trace.size(); ++k) {
        if (trace[k].label_state && trace[k - 1].label_state &&
            *trace[k - 1].label_state == ctrl::TrunkState::stooped &&
            *trace[k].label_state == ctrl::TrunkState::extending) {
          next_onset = trace[k].t_s;
          break;
        }
      }
      for (std::size_t k = i; k < out.records.size(); ++k) {
        if (out.records[k].t_s >= next_onset) break;
        if (out.records[k].command.deflation_issued) {
          out.deflation_latencies.push_back(
              {onset, out.records[k].t_s, out.records[k].t_s - onset});
          break;
        }
      }
    }
  }
  return out;
}

void write_result(const std::filesystem::path& path, const ReplayResult& result) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(result.records.size());
  for (const auto& r : result.records) {
    rows.push_back({csv::format_double(r.t_s), csv::format_double(r.trunk_angle_deg),
                    std::string(ctrl::to_string(r.raw_state)),
                    std::string(ctrl::to_string(r.state)),
                    std::string(ctrl::to_string(r.raw_weight)),
                    std::string(ctrl::to_string(r.weight)),
                    r.clutch_engaged ? "1" : "0", csv::format_double(r.p_psig),
                    csv::format_double(r.reservoir_psig), csv::format_double(r.elongation_mm),
                    csv::format_double(r.f_total_n), csv::format_double(r.f_active_n),
                    csv::format_double(r.f_passive_n), r.command.valves.v1_inflate ? "1" : "0",
                    r.command.valves.v2_release ? "1" : "0",
                    r.command.valves.pump_on ? "1" : "0",
                    r.command.deflation_issued ? "1" : "0"});
  }
  csv::write_file(path,
                  {"t", "alpha_deg", "state_raw", "state", "weight_raw", "weight", "clutch",
                   "p_psig", "reservoir_psig", "elongation_mm", "F_total_N", "F_active_N",
                   "F_passive_N", "v1", "v2", "pump", "deflation"},
                  rows);
}

std::string summary_text(const ReplayResult& result) {
  std::ostringstream os;
  os << "frames: " << result.records.size() << "\n";
  os << "peak force: " << result.peak_force_n << " N\n";
  os << "cycles: " << result.cycles.size() << "\n";
  for (std::size_t i = 0; i < result.cycles.size(); ++i) {
    const auto& c = result.cycles[i];
    os << "  cycle " << i + 1 << " [" << result.records[c.first_frame].t_s << " s, "
       << result.records[c.last_frame].t_s << " s] " << (c.pickup ? "lifting" : "lowering")
       << ", energy " << c.energy_j << " J\n";
  }
  os << "deflation commands: " << result.deflation_latencies.size() << "\n";
  for (const auto& ev : result.deflation_latencies) {
    os << "  extension onset " << ev.true_onset_s << " s -> command " << ev.command_s
       << " s (latency " << ev.latency_s * 1e3 << " ms)\n";
  }
  return os.str();
}

}  // namespace vebs::replay
