#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace vebs::ctrl {

// Weight-adaptive finite-state controller. Posture transitions select an
// assistance profile; a bang-bang loop regulates IPAM pressure through the
// inflate (V1) and release (V2) valves; the pump tops up the reservoir.

enum class TrunkState { standing, flexing, stooped, extending };
enum class WeightClass { kg0, kg7_5, kg15 };

enum class Mode { idle, lowering, lifting };

/// Assistance profile selected at a posture transition. Lowering commands
/// only the clutch schedule; lifting commands only a deflation target.
struct ProfileCommand {
  Mode mode = Mode::idle;
  /// Engage the clutch when trunk angle reaches this percent of max RoM;
  /// absent = never engage. Lowering only.
  std::optional<double> clutch_engage_percent_rom;
  /// Deflate the IPAM to this gauge pressure at the start of extension.
  /// Lifting only.
  std::optional<double> deflate_target_psig;
  double inflate_target_psig = 50.0;
};

/// Profile lookup for a posture transition: standing->flexing starts a
/// lowering profile (clutch schedule: never / 50% RoM / 0% RoM for
/// 0 / 7.5 / 15 kg), stooped->extending starts a lifting profile (deflation
/// to 30 / 15 / 0 psig). Any other transition selects nothing.
[[nodiscard]] std::optional<ProfileCommand> select_profile(TrunkState prev, TrunkState now,
                                                           WeightClass weight);

enum class Regulation { open_release, hold, open_inflate };

/// Deadband pressure regulator: vent above ref+deadband, fill below
/// ref-deadband, otherwise hold.
[[nodiscard]] Regulation bang_bang(double p_psig, double p_ref_psig, double deadband_psi);

struct ValveCommand {
  bool v1_inflate = false;
  bool v2_release = false;
  bool pump_on = false;
};

/// Maps a regulation decision to valve drive. V1 and V2 are never both open;
/// the pump runs whenever the reservoir sits below its setpoint.
[[nodiscard]] ValveCommand valve_logic(Regulation reg, double reservoir_psig,
                                       double reservoir_setpoint_psig = 90.0);

struct ControllerConfig {
  double rom_max_deg = 90.0;
  double deadband_psi = 1.0;
  double inflate_target_psig = 50.0;
  double reservoir_setpoint_psig = 90.0;
  /// Suppress the terminal deflation of a cycle whose descent carried a
  /// load: a lowering cycle returns passively, deflation assists only
  /// pickups (cycles that flexed unloaded).
  bool gate_deflation_on_loaded_descent = true;
};

struct ControllerInput {
  double t_s = 0;
  TrunkState state = TrunkState::standing;
  WeightClass weight = WeightClass::kg0;
  double trunk_angle_deg = 0;
  double ipam_psig = 0;
  double reservoir_psig = 90.0;
};

struct ControllerOutput {
  ProfileCommand profile;        // currently governing profile
  ValveCommand valves;
  Regulation regulation = Regulation::hold;
  bool clutch_commanded = false;
  double p_ref_psig = 0;
  bool deflation_issued = false;  // true on the frame a deflation command fires
};

/// Stateful 100 Hz controller. Deterministic; no randomness, no wall clock.
class Controller {
 public:
  explicit Controller(ControllerConfig cfg);

  /// Processes one classified frame. Throws std::invalid_argument on
  /// out-of-order timestamps.
  ControllerOutput step(const ControllerInput& in);

 private:
  ControllerConfig cfg_;
  bool first_ = true;
  double last_t_ = 0;
  TrunkState prev_state_ = TrunkState::standing;
  ProfileCommand active_profile_{};
  std::optional<double> clutch_schedule_pct_;
  double p_ref_psig_;
  bool clutch_commanded_ = false;
  bool clutch_fired_this_cycle_ = false;
  bool deflation_fired_this_cycle_ = false;
  WeightClass weight_at_descent_ = WeightClass::kg0;
};

/// Runs a fresh controller over a frame stream.
[[nodiscard]] std::vector<ControllerOutput> run_controller(std::span<const ControllerInput> frames,
                                                           const ControllerConfig& cfg = {});

/// Parse/format helpers shared by traces and the CLI.
[[nodiscard]] const char* to_string(TrunkState s);
[[nodiscard]] const char* to_string(WeightClass w);
[[nodiscard]] std::optional<TrunkState> trunk_state_from(const std::string& token);
[[nodiscard]] std::optional<WeightClass> weight_class_from(const std::string& token);

}  // namespace vebs::ctrl
