#pragma once

#include <functional>

namespace vebs::pneumo {

// Inverse pneumatic artificial muscle (IPAM) gas model: isothermal ideal gas
// in a thin-walled cylinder of fixed radius whose length tracks the device
// elongation, vented or fed through sharp-edged orifices (compressible
// nozzle flow, choked or subsonic by pressure ratio).

struct GasConstants {
  double gamma = 1.4;       // ratio of specific heats, air
  double R = 287.05;        // J/(kg K)
  double T = 293.15;        // K, isothermal
  double p_atm = 101325.0;  // Pa absolute
};

/// Discharge path: effective orifice area (m^2) with discharge coefficient.
struct FlowPath {
  double cd = 0.8;
  double area_m2 = 1.0e-6;
  [[nodiscard]] double cda() const { return cd * area_m2; }
};

struct ValveState {
  bool v1_inflate = false;
  bool v2_release = false;
  bool pump_on = false;
};

/// Lumped gas state. Pressures are absolute Pa. The reservoir has fixed
/// volume, so p_reservoir alone determines its mass.
struct PneumaticState {
  double p = 101325.0;            // IPAM pressure, Pa abs
  double m = 0;                   // IPAM gas mass, kg
  double v = 0;                   // IPAM volume, m^3
  double p_reservoir = 101325.0;  // Pa abs
  ValveState valves;
};

struct IpamGeometry {
  double radius_m = 0.00625;     // 6.25 mm
  double rest_length_m = 0.200;  // 200 mm
};

/// Combined volume of the two parallel IPAMs at a given device elongation:
/// 2 * pi * r^2 * (L0 + x). Throws std::invalid_argument on non-positive
/// radius or total length.
[[nodiscard]] double ipam_volume(double radius_m, double rest_length_m, double elongation_m);
[[nodiscard]] double ipam_volume(const IpamGeometry& g, double elongation_m);

enum class FlowRegime { choked, subsonic };

/// (2/(gamma+1))^(gamma/(gamma-1)); flow is choked when downstream/upstream
/// pressure is at or below this.
[[nodiscard]] double critical_pressure_ratio(const GasConstants& gas);

/// Regime of venting to atmosphere from absolute pressure p. Throws
/// std::invalid_argument when p < p_atm.
[[nodiscard]] FlowRegime flow_regime(double p_abs, const GasConstants& gas = {});

/// Orifice mass flow (kg/s) from upstream p_up to downstream p_down, both Pa
/// absolute. Returns 0 when p_down >= p_up. Choked and subsonic branches meet
/// continuously at the critical ratio.
[[nodiscard]] double mass_flow(double p_up, double p_down, const FlowPath& path,
                               const GasConstants& gas = {});

/// Venting to atmosphere; requires p_abs >= p_atm.
[[nodiscard]] double mass_flow_out(double p_abs, const FlowPath& path,
                                   const GasConstants& gas = {});

/// State consistent with the ideal-gas law at the given pressure/elongation.
[[nodiscard]] PneumaticState make_state(const IpamGeometry& g, double elongation_m,
                                        double p_abs, double p_reservoir_abs,
                                        const GasConstants& gas = {});

/// One forward-Euler venting step: m' = m - mdot*dt floored at atmospheric
/// mass for the new volume, then p' = m'RT/V'. Monotonically non-increasing
/// pressure at constant elongation; never below atmospheric.
[[nodiscard]] PneumaticState step_deflate(const PneumaticState& s, const IpamGeometry& g,
                                          double elongation_m, const FlowPath& path,
                                          const GasConstants& gas, double dt_s);

/// One forward-Euler fill step from the reservoir through `path`. Transfer is
/// capped at pressure equalization, so the step conserves mass exactly and
/// never overshoots the reservoir pressure. Zero flow when the reservoir is
/// not above the IPAM (not an error).
[[nodiscard]] PneumaticState step_inflate(const PneumaticState& s, const IpamGeometry& g,
                                          double elongation_m, const FlowPath& path,
                                          const GasConstants& gas, double dt_s,
                                          double reservoir_volume_m3);

/// Valves shut: mass is retained, pressure follows the volume change.
[[nodiscard]] PneumaticState step_hold(const PneumaticState& s, const IpamGeometry& g,
                                       double elongation_m, const GasConstants& gas = {});

struct CalibrationTarget {
  double p_start_abs = 0;  // Pa
  double p_end_abs = 0;    // Pa, must be < p_start and >= p_atm
  double duration_s = 0;
};

/// Finds the Cd*A product for which venting from p_start reaches p_end in
/// `duration_s` (within 1%) under the given volume history, by bisection.
/// The product is reported with the conventional Cd = 0.8 split. Throws
/// NoSolutionError for degenerate targets or when no orifice in
/// [1e-12, 1e-2] m^2 brackets the duration.
[[nodiscard]] FlowPath calibrate_orifice(const CalibrationTarget& target, const GasConstants& gas,
                                         const std::function<double(double)>& volume_at_time,
                                         double dt_s = 1e-3);

}  // namespace vebs::pneumo
