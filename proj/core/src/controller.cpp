#include "vebs/controller.hpp"

#include <stdexcept>
#include <string>

namespace vebs::ctrl {

std::optional<ProfileCommand> select_profile(TrunkState prev, TrunkState now, WeightClass weight) {
  if (prev == TrunkState::standing && now == TrunkState::flexing) {
    ProfileCommand cmd;
    cmd.mode = Mode::lowering;
    switch (weight) {
      case WeightClass::kg0:  cmd.clutch_engage_percent_rom.reset(); break;
      case WeightClass::kg7_5: cmd.clutch_engage_percent_rom = 50.0; break;
      case WeightClass::kg15:  cmd.clutch_engage_percent_rom = 0.0; break;
    }
    return cmd;
  }
  if (prev == TrunkState::stooped && now == TrunkState::extending) {
    ProfileCommand cmd;
    cmd.mode = Mode::lifting;
    switch (weight) {
      case WeightClass::kg0:  cmd.deflate_target_psig = 30.0; break;
      case WeightClass::kg7_5: cmd.deflate_target_psig = 15.0; break;
      case WeightClass::kg15:  cmd.deflate_target_psig = 0.0; break;
    }
    return cmd;
  }
  return std::nullopt;
}

Regulation bang_bang(double p_psig, double p_ref_psig, double deadband_psi) {
  if (deadband_psi < 0) throw std::invalid_argument("deadband must be >= 0");
  if (p_psig > p_ref_psig + deadband_psi) return Regulation::open_release;
  if (p_psig < p_ref_psig - deadband_psi) return Regulation::open_inflate;
  return Regulation::hold;
}

ValveCommand valve_logic(Regulation reg, double reservoir_psig, double reservoir_setpoint_psig) {
  ValveCommand v;
  v.v1_inflate = (reg == Regulation::open_inflate);
  v.v2_release = (reg == Regulation::open_release);
  v.pump_on = reservoir_psig < reservoir_setpoint_psig;
  return v;
}

Controller::Controller(ControllerConfig cfg) : cfg_(cfg), p_ref_psig_(cfg.inflate_target_psig) {
  if (cfg_.rom_max_deg <= 0) throw std::invalid_argument("rom_max must be positive");
}

ControllerOutput Controller::step(const ControllerInput& in) {
  if (!first_ && in.t_s <= last_t_) {
    throw std::invalid_argument("out-of-order timestamp at t=" + std::to_string(in.t_s));
  }
  if (first_) {
    prev_state_ = in.state;
    p_ref_psig_ = in.ipam_psig;  // hold whatever charge the device starts with
    first_ = false;
  }
  last_t_ = in.t_s;

  ControllerOutput out;

  if (in.state != prev_state_) {
    if (in.state == TrunkState::standing) {
      // Cycle complete: release the clutch, drop to idle, keep pressure held.
      clutch_commanded_ = false;
      clutch_schedule_pct_.reset();
      active_profile_ = ProfileCommand{};
      active_profile_.inflate_target_psig = cfg_.inflate_target_psig;
    } else if (auto cmd = select_profile(prev_state_, in.state, in.weight)) {
      cmd->inflate_target_psig = cfg_.inflate_target_psig;
      if (cmd->mode == Mode::lowering) {
        active_profile_ = *cmd;
        clutch_schedule_pct_ = cmd->clutch_engage_percent_rom;
        weight_at_descent_ = in.weight;
        clutch_fired_this_cycle_ = false;
        deflation_fired_this_cycle_ = false;
      } else {  // lifting
        // A loaded descent means this extension lowers nothing back up:
        // the return stays passive unless the flexion was unloaded. The
        // clutch keeps following the lowering schedule either way.
        const bool pickup_cycle =
            !cfg_.gate_deflation_on_loaded_descent || weight_at_descent_ == WeightClass::kg0;
        if (pickup_cycle && !deflation_fired_this_cycle_) {
          active_profile_ = *cmd;
          p_ref_psig_ = *cmd->deflate_target_psig;
          deflation_fired_this_cycle_ = true;
          out.deflation_issued = true;
        }
      }
    }
    prev_state_ = in.state;
  }

  if (in.state == TrunkState::flexing) {
    p_ref_psig_ = active_profile_.inflate_target_psig;
  }

  // Clutch schedule of the governing lowering profile, mirrored on return.
  if (clutch_schedule_pct_) {
    const double threshold_deg = *clutch_schedule_pct_ / 100.0 * cfg_.rom_max_deg;
    if (in.state == TrunkState::flexing && !clutch_fired_this_cycle_ &&
        in.trunk_angle_deg >= threshold_deg) {
      clutch_commanded_ = true;
      clutch_fired_this_cycle_ = true;
    }
    if (in.state == TrunkState::extending && clutch_commanded_ &&
        in.trunk_angle_deg <= threshold_deg) {
      clutch_commanded_ = false;
    }
  }

  out.profile = active_profile_;
  out.clutch_commanded = clutch_commanded_;
  out.p_ref_psig = p_ref_psig_;
  out.regulation = bang_bang(in.ipam_psig, p_ref_psig_, cfg_.deadband_psi);
  out.valves = valve_logic(out.regulation, in.reservoir_psig, cfg_.reservoir_setpoint_psig);
  return out;
}

std::vector<ControllerOutput> run_controller(std::span<const ControllerInput> frames,
                                             const ControllerConfig& cfg) {
  Controller ctl(cfg);
  std::vector<ControllerOutput> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(ctl.step(f));
  return out;
}

const char* to_string(TrunkState s) {
  switch (s) {
    case TrunkState::standing:  return "standing";
    case TrunkState::flexing:   return "flexing";
    case TrunkState::stooped:   return "stooped";
    case TrunkState::extending: return "extending";
  }
  return "?";
}

const char* to_string(WeightClass w) {
  switch (w) {
    case WeightClass::kg0:  return "kg0";
    case WeightClass::kg7_5: return "kg7.5";
    case WeightClass::kg15:  return "kg15";
  }
  return "?";
}

std::optional<TrunkState> trunk_state_from(const std::string& token) {
  if (token == "standing") return TrunkState::standing;
  if (token == "flexing") return TrunkState::flexing;
  if (token == "stooped") return TrunkState::stooped;
  if (token == "extending") return TrunkState::extending;
  return std::nullopt;
}

std::optional<WeightClass> weight_class_from(const std::string& token) {
  if (token == "kg0") return WeightClass::kg0;
  if (token == "kg7.5") return WeightClass::kg7_5;
  if (token == "kg15") return WeightClass::kg15;
  return std::nullopt;
}

}  // namespace vebs::ctrl
