#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "vebs/controller.hpp"

namespace vebs::est {

/// One 100 Hz sample: trunk angle/velocity, two sagittal acceleration
/// components from the upper-back IMU, six forearm FSR channels, optional
/// ground-truth labels.
struct SensorFrame {
  double t_s = 0;
  double alpha_deg = 0;
  double omega_deg_s = 0;
  double a1_m_s2 = 0;
  double a2_m_s2 = 0;
  std::array<double, 6> fsr{};
  std::optional<ctrl::TrunkState> label_state;
  std::optional<ctrl::WeightClass> label_weight;
};

inline constexpr int kWindowSamples = 30;  // 0.3 s at 100 Hz
inline constexpr int kStatsPerChannel = 8;

enum class FeatureMode { state, weight };

/// Channel count per mode: state uses the 4 IMU channels, weight adds the 6
/// FSR channels.
[[nodiscard]] int channel_count(FeatureMode mode);

/// Per-channel window statistics, in order: mean, population std, min, max,
/// first sample, last sample, least-squares slope (channel units per second),
/// and delta-mean (mean of the last half minus mean of the first half).
/// Requires exactly kWindowSamples frames.
[[nodiscard]] std::vector<double> extract_features(std::span<const SensorFrame> window,
                                                   FeatureMode mode);

/// Majority-persistence label filter: the output switches to a new label only
/// after it has been observed `dwell` consecutive times. dwell = 1 is the
/// identity.
class DwellFilter {
 public:
  explicit DwellFilter(int dwell);
  int step(int raw_label);
  void reset();

 private:
  int dwell_;
  int current_ = -1;
  int candidate_ = -1;
  int run_ = 0;
};

[[nodiscard]] std::vector<int> dwell_filter(std::span<const int> raw, int dwell);

}  // namespace vebs::est
