#pragma once

// Unit conventions used throughout:
//  - gas dynamics in SI (Pa absolute, kg, m^3, s),
//  - device-level force laws in mm / N / psi gauge (the empirical surface was
//    identified in those units and its coefficients are not unit-portable).

namespace vebs::units {

inline constexpr double kPaPerPsi = 6894.757;
inline constexpr double kAtmospherePa = 101325.0;

[[nodiscard]] constexpr double psig_to_pa(double psig, double p_atm = kAtmospherePa) {
  return psig * kPaPerPsi + p_atm;
}

[[nodiscard]] constexpr double pa_to_psig(double pa_abs, double p_atm = kAtmospherePa) {
  return (pa_abs - p_atm) / kPaPerPsi;
}

[[nodiscard]] constexpr double mm_to_m(double mm) { return mm * 1e-3; }
[[nodiscard]] constexpr double m_to_mm(double m) { return m * 1e3; }

/// mm/min is the native bench-protocol rate unit; sims integrate in mm/s.
[[nodiscard]] constexpr double mm_per_min_to_mm_per_s(double v) { return v / 60.0; }

}  // namespace vebs::units
