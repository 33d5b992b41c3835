#pragma once

#include <optional>
#include <span>
#include <vector>

#include "vebs/band.hpp"
#include "vebs/pneumo.hpp"

namespace vebs::vea {

// Variable-elastic actuator: the variable-stiffness band in parallel with the
// IPAM pair. The IPAM's mechanical contribution is an empirical quadratic
// surface in elongation and gauge pressure, identified on the bench.

/// F(l, p) = a + b*l + c*p + d*l^2 + e*p^2 + f*l*p with l in mm, p in psi
/// gauge, F in N (both IPAMs combined).
struct ForceSurface {
  double a = -1.4318;
  double b = 1.2213;
  double c = 0.0100;
  double d = 0.0076;
  double e = 0.0022;
  double f = -0.0348;
};

/// Surface value clamped at zero (the membrane cannot push).
[[nodiscard]] double active_force(const ForceSurface& s, double elongation_mm, double p_psig);

/// Unclamped polynomial, for fitting and diagnostics.
[[nodiscard]] double active_force_raw(const ForceSurface& s, double elongation_mm, double p_psig);

struct SurfaceSample {
  double elongation_mm;
  double p_psig;
  double force_n;
};

struct SurfaceFit {
  ForceSurface surface;
  double rms_residual_n = 0;
};

/// Ordinary least squares over the six polynomial terms. Needs >= 6 samples
/// spanning full rank, otherwise NoSolutionError.
[[nodiscard]] SurfaceFit fit_force_surface(std::span<const SurfaceSample> samples);

/// Aggregate physical parameters of one device build.
struct DeviceParams {
  band::BandModel band;
  ForceSurface surface;
  pneumo::IpamGeometry ipam;
  pneumo::FlowPath deflate_path;
  pneumo::FlowPath inflate_path;
  pneumo::GasConstants gas;
  double reservoir_volume_m3 = 346.59e-6;  // three 115.53 cc tanks
  double reservoir_setpoint_psig = 90.0;
};

/// Instantaneous mechanical state used by total_force.
struct DeviceState {
  double elongation_mm = 0;
  double elongation_rate_mm_per_min = 0;
  double slack_offset_mm = 0;
  bool unloading = false;
  band::ClutchState clutch;
  pneumo::PneumaticState pneumo;
};

/// Total tension: active surface plus band passive force, both evaluated at
/// the slack-compensated elongation max(elongation - slack_offset, 0).
[[nodiscard]] double total_force(const DeviceParams& dev, const DeviceState& st);

enum class BenchPhase { loading, hold, unloading };

struct TracePoint {
  double t_s = 0;
  double elongation_mm = 0;
  double force_n = 0;
  double active_n = 0;
  double passive_n = 0;
  double p_psig = 0;
  bool clutch_engaged = false;
  BenchPhase phase = BenchPhase::loading;
};

/// Constant-rate pull to peak, hold, constant-rate return. When
/// pressure_hold_psig is set the active surface contributes at that constant
/// gauge pressure; when absent the run is passive (clutch-only, the inflated
/// IPAM treated as non-contributing). Clutch commands fire when the
/// elongation crosses the schedule thresholds (loading: engage, unloading:
/// disengage) and take effect after the clutch latency.
struct QuasiStaticScenario {
  double peak_mm = 110.0;
  double rate_mm_per_min = 60.0;
  double hold_s = 2.0;
  double dt_s = 0.01;
  bool clutch_engaged_throughout = false;
  std::optional<double> clutch_engage_at_mm;
  std::optional<double> clutch_disengage_at_mm;  // defaults to the engage threshold
  std::optional<double> pressure_hold_psig;
};

[[nodiscard]] std::vector<TracePoint> simulate_quasistatic(const DeviceParams& dev,
                                                           const QuasiStaticScenario& sc);

/// Fast pull-and-return with pressure regulation: held at inflate_psig during
/// elongation, sealed for deflate_delay_s after the return begins, then vented
/// toward deflate_target_psig (release valve reopens whenever compression
/// drives the pressure back above target).
struct DynamicScenario {
  double peak_mm = 100.0;
  double rate_mm_per_min = 2000.0;
  double deflate_delay_s = 0.3;
  double deflate_target_psig = 0.0;
  double inflate_psig = 50.0;
  double dt_s = 1e-3;
};

struct DynamicResult {
  std::vector<TracePoint> trace;
  double return_onset_s = 0;
  double return_duration_s = 0;
  double peak_active_n = 0;
  double peak_active_time_s = 0;             // absolute trace time
  double peak_active_percent_of_return = 0;  // 0..100
  /// Active force at `dt_s` after return onset, as a fraction of peak_active_n.
  [[nodiscard]] double active_fraction_at(double dt_after_onset_s) const;
};

[[nodiscard]] DynamicResult simulate_dynamic(const DeviceParams& dev, const DynamicScenario& sc);

/// Net work done by the device on the wearer over one closed elongation cycle
/// (trapezoidal integral of F d(-l)), in joules. Positive means energy added
/// to the wearer during the return. Throws std::invalid_argument when the
/// trace endpoints differ by more than closure_tol_mm (open cycle).
[[nodiscard]] double cycle_energy(std::span<const TracePoint> trace, double closure_tol_mm = 1.0);

/// Convenience: measured-stiffness device with identified surface defaults.
[[nodiscard]] DeviceParams default_device();

}  // namespace vebs::vea
