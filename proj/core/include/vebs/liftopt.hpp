#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vebs::lift {

/// Force-length-velocity scaler: arguments are normalized fiber length
/// (1 = optimal) and normalized shortening velocity (positive = shortening).
using FlvFn = std::function<double(double lnorm, double vnorm)>;

enum class FlvKind { constant_one, gaussian_fl_linear_fv };

struct FlvParams {
  double width = 0.4;  // gaussian half-width on normalized length
  double vmax = 10.0;  // normalized velocity at which active force vanishes
};

/// constant_one ignores its inputs; gaussian_fl_linear_fv is
/// exp(-((l-1)/width)^2) * clamp(1 - v/vmax, 0, 1.4).
FlvFn flv_scaler(FlvKind kind, const FlvParams& params = {});

struct MuscleDef {
  std::string name;
  double f0_n = 1000;  // max isometric force
  double a_min = 0.01;
  double a_max = 1.0;
  FlvFn flv;  // empty = constant one
};

/// Path-routed actuator in parallel with a fixed path spring. Bound scaling
/// keeps a_path small: a_path_max * f_path_max_n matches the physical peak
/// force of the pneumatic element, so tiny a_path values reach large forces.
struct PathActuatorDef {
  double k_base_n_m = 875.0;       // path-spring stiffness
  double f_path_max_n = 25456.42;  // 0.01 of this is the physical ~254.6 N peak
  double a_path_min = 0.001;
  double a_path_max = 0.01;
};

struct LiftFrame {
  double t_s = 0;
  double trunk_angle_deg = 0;
  double trunk_rate_deg_s = 0;
  std::vector<double> tau_nm;                 // per joint
  std::vector<std::vector<double>> r_muscle_m;  // [muscle][joint]
  std::vector<double> r_device_m;             // per joint
  double device_length_m = 0;
  double device_rest_length_m = 0;
  // Normalized fiber state per muscle for the flv evaluation; empty means
  // optimal length at zero velocity.
  std::vector<double> lnorm;
  std::vector<double> vnorm;
};

struct FrameSolution {
  std::vector<double> activations;
  double a_path = 0;
  double f_device_n = 0;   // k_base * stretch + a_path * f_path_max
  double f_passive_n = 0;  // k_base * stretch
  double f_active_n = 0;   // a_path * f_path_max
  double objective = 0;
  double residual_nm = 0;  // worst joint equilibrium residual
  std::vector<double> eq_multipliers;
};

/// Static optimization of one frame: minimizes sum(a_m^2) + a_path^2 under
/// per-joint torque equilibrium and box bounds. Throws NoSolutionError with
/// the per-joint achievable torque range when equilibrium cannot be met.
FrameSolution solve_frame(const LiftFrame& frame, std::span<const MuscleDef> muscles,
                          const std::optional<PathActuatorDef>& device);

enum class TrialPhase { lowering, lifting };  // flexion frames vs extension frames

struct TrialProfile {
  TrialPhase phase = TrialPhase::lowering;
  std::vector<double> percent_rom;  // 0..100 grid
  std::vector<double> f_total_n;
  std::vector<double> f_passive_n;
  std::vector<double> f_active_n;
};

/// Solves every frame of the requested phase and resamples the device force
/// onto a percent-of-range-of-motion grid.
TrialProfile solve_trial(std::span<const LiftFrame> frames, std::span<const MuscleDef> muscles,
                         const std::optional<PathActuatorDef>& device, TrialPhase phase,
                         int grid_points = 101);

/// Planar single-lumbar-joint surrogate: two extensors and one flexor, a
/// circular-wrap device path, gravitational torque, minimum-jerk flexion then
/// extension sweep. The mass/lever defaults describe the torque share routed
/// to the device-side optimization, scaled so the actuator's operating
/// envelope is exercised across the whole range of motion (a full-body model
/// would spread the remaining demand over muscle paths not modeled here).
struct SurrogateParams {
  double rom_max_deg = 90;
  double duration_s = 4;  // full flexion+extension sweep
  double dt_s = 0.02;
  double trunk_mass_kg = 10;
  double trunk_com_m = 0.18;
  double load_mass_kg = 2;
  double load_lever_m = 0.40;
  double wrap_radius_m = 0.07;  // device moment arm; stretch = radius * angle
  double rest_length_m = 0.30;
};

struct SurrogateTrial {
  std::vector<LiftFrame> frames;
  std::vector<MuscleDef> muscles;
};

SurrogateTrial make_surrogate_trial(const SurrogateParams& params);

/// Trial CSV: t,trunk_angle_deg,L_m, then tau_<joint>, r_<muscle>_<joint>,
/// r_device_<joint> columns (schema read from the header). Trunk rate is
/// differenced from the angle column.
std::vector<LiftFrame> read_lift_trial(const std::filesystem::path& path,
                                       std::vector<std::string>& muscle_names_out,
                                       double rest_length_m);

/// Profile CSV: percent_rom,F_total_N,F_passive_N,F_active_N.
void write_profile(const std::filesystem::path& path, const TrialProfile& profile);

}  // namespace vebs::lift
