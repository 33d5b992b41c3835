#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "vebs/controller.hpp"
#include "vebs/estimator.hpp"

namespace vebs::synth {

/// Generator parameters for one synthetic subject.
///
/// A trial is two back-to-back flexion-extension cycles — a lifting cycle
/// (descend empty, pick up, ascend loaded) followed by a lowering cycle
/// (descend loaded, set down, ascend empty) — plus a short trailing stand.
/// Angles follow minimum-jerk profiles; forearm-sensor channels step to
/// weight-dependent levels while the load is in hand.
struct SubjectParams {
  double rom_max_deg = 90.0;      // stooped trunk angle, must lie in (30, 120)
  double cycle_duration_s = 3.0;  // one flexion-extension cycle
  double sample_rate_hz = 100.0;
  double imu_radius_m = 0.40;  // IMU distance from the lumbar pivot

  // FMG step gain (sensor units) indexed by WeightClass.
  double fmg_gain[3] = {0.0, 10.0, 20.0};

  // Noise levels; all must be >= 0.
  double noise_alpha_deg = 0.5;
  double noise_omega_deg_s = 1.0;
  double noise_accel_m_s2 = 0.05;
  double noise_fsr_rel = 0.02;  // multiplicative, relative

  std::uint64_t seed = 42;
};

struct TrialSpec {
  ctrl::WeightClass weight = ctrl::WeightClass::kg0;
  int n_trials = 10;
};

enum class CycleKind { lifting, lowering };

struct Cycle {
  ctrl::WeightClass weight = ctrl::WeightClass::kg0;
  CycleKind kind = CycleKind::lifting;
  int trial_index = 0;
  std::vector<est::SensorFrame> frames;
};

struct Dataset {
  std::vector<Cycle> train;
  std::vector<Cycle> test;
};

/// Noiseless trunk angle (deg) at time t within the trial timeline.
double trunk_angle_deg(const SubjectParams& subject, double t_s);
/// Analytic time derivative of trunk_angle_deg.
double trunk_velocity_deg_s(const SubjectParams& subject, double t_s);
/// Analytic second derivative of trunk_angle_deg.
double trunk_accel_deg_s2(const SubjectParams& subject, double t_s);

/// One labeled trial; trial_index picks an independent noise stream.
std::vector<est::SensorFrame> generate_trial(const SubjectParams& subject,
                                             ctrl::WeightClass weight, int trial_index = 0);

/// All requested trials, split per cycle into stratified train/test sets.
Dataset generate_dataset(const SubjectParams& subject, std::span<const TrialSpec> specs,
                         double train_fraction = 0.7);

/// CSV schema: t,alpha,omega,a1,a2,f1..f6[,label_state,label_weight].
void write_trace(const std::filesystem::path& path, std::span<const est::SensorFrame> frames);
std::vector<est::SensorFrame> read_trace(const std::filesystem::path& path);

/// Windowed feature/label pairs pooled over cycles; the label of a window is
/// the ground truth `lookahead` frames past its last frame (clamped to the
/// cycle end). Features stay causal; a lookahead equal to the dwell length
/// trains the raw classifier to lead by exactly the dwell filter's lag, so
/// the filtered output lines up with the truth. Labels are indexed as the
/// TrunkState/WeightClass enums. `stride` subsamples window positions.
struct WindowSet {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
};
WindowSet windowed_features(std::span<const Cycle> cycles, est::FeatureMode mode, int stride = 1,
                            int lookahead = 0);

/// Class-name lists matching the label indices of windowed_features.
std::vector<std::string> state_class_names();
std::vector<std::string> weight_class_names();

std::string_view to_string(CycleKind kind);

}  // namespace vebs::synth
