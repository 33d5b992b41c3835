#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vebs/controller.hpp"
#include "vebs/estimator.hpp"
#include "vebs/forest.hpp"
#include "vebs/synth.hpp"
#include "vebs/vea.hpp"

namespace vebs::replay {

// Closed-loop harness: sensor trace -> windowed classification -> dwell
// filter -> controller -> clutch/pneumatic plant -> device force, one record
// per input frame.

struct Models {
  est::ForestModel state;
  est::ForestModel weight;
};

struct ReplayConfig {
  int dwell_samples = 10;
  ctrl::ControllerConfig controller;
  vea::DeviceParams device = vea::default_device();
  double rom_max_deg = 90.0;
  double elongation_max_mm = 110.0;  // linear map: rom_max_deg -> this
  double pump_rate_psi_s = 50.0;     // reservoir recharge while the pump runs
};

/// Maps trunk angle (deg) to device elongation (mm).
using ElongationMap = std::function<double(double)>;

/// Raw-prediction override applied before the dwell filter, for fault
/// injection in tests.
using PredictionHook =
    std::function<void(std::size_t frame_index, ctrl::TrunkState& state, ctrl::WeightClass& weight)>;

struct FrameRecord {
  double t_s = 0;
  double trunk_angle_deg = 0;
  ctrl::TrunkState raw_state = ctrl::TrunkState::standing;
  ctrl::WeightClass raw_weight = ctrl::WeightClass::kg0;
  ctrl::TrunkState state = ctrl::TrunkState::standing;   // dwell-filtered
  ctrl::WeightClass weight = ctrl::WeightClass::kg0;     // dwell-filtered
  ctrl::ControllerOutput command;
  bool clutch_engaged = false;
  double p_psig = 0;
  double reservoir_psig = 0;
  double elongation_mm = 0;
  double f_total_n = 0;
  double f_active_n = 0;
  double f_passive_n = 0;
};

struct CycleSummary {
  std::size_t first_frame = 0;
  std::size_t last_frame = 0;  // inclusive
  bool pickup = false;         // descent was classified unloaded
  double energy_j = 0;
};

struct LatencyEvent {
  double true_onset_s = 0;  // labeled stooped->extending transition
  double command_s = 0;     // deflation command
  double latency_s = 0;
};

struct ReplayResult {
  std::vector<FrameRecord> records;
  std::vector<CycleSummary> cycles;
  std::vector<LatencyEvent> deflation_latencies;
  double peak_force_n = 0;
};

/// Runs the loop over a time-ordered trace. The first kWindowSamples-1
/// frames predict standing/unloaded (no full window yet). elongation_map
/// empty = linear from config. Throws on empty/unordered traces or when the
/// models' feature dimensions do not match the trace channels.
ReplayResult replay(std::span<const est::SensorFrame> trace, const Models& models,
                    const ReplayConfig& cfg, const ElongationMap& elongation_map = {},
                    const PredictionHook& hook = {});

/// CSV export of the per-frame records.
void write_result(const std::filesystem::path& path, const ReplayResult& result);

/// Human-readable cycle/energy/latency summary.
[[nodiscard]] std::string summary_text(const ReplayResult& result);

}  // namespace vebs::replay
