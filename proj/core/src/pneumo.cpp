#include "vebs/pneumo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vebs/errors.hpp"

namespace vebs::pneumo {

namespace {

constexpr double kPi = 3.141592653589793;

void check_gas(const GasConstants& gas) {
  if (gas.gamma <= 1.0 || gas.R <= 0.0 || gas.T <= 0.0 || gas.p_atm <= 0.0) {
    throw std::invalid_argument("invalid gas constants");
  }
}

}  // namespace

double ipam_volume(double radius_m, double rest_length_m, double elongation_m) {
  const double length = rest_length_m + elongation_m;
  if (radius_m <= 0.0 || !std::isfinite(radius_m)) {
    throw std::invalid_argument("radius must be positive");
  }
  if (length <= 0.0 || !std::isfinite(length)) {
    throw std::invalid_argument("total IPAM length must be positive, got " +
                                std::to_string(length));
  }
  return 2.0 * kPi * radius_m * radius_m * length;
}

double ipam_volume(const IpamGeometry& g, double elongation_m) {
  return ipam_volume(g.radius_m, g.rest_length_m, elongation_m);
}

double critical_pressure_ratio(const GasConstants& gas) {
  check_gas(gas);
  return std::pow(2.0 / (gas.gamma + 1.0), gas.gamma / (gas.gamma - 1.0));
}

FlowRegime flow_regime(double p_abs, const GasConstants& gas) {
  check_gas(gas);
  if (p_abs < gas.p_atm) {
    throw std::invalid_argument("pressure below atmospheric: " + std::to_string(p_abs));
  }
  return (gas.p_atm / p_abs <= critical_pressure_ratio(gas)) ? FlowRegime::choked
                                                             : FlowRegime::subsonic;
}

double mass_flow(double p_up, double p_down, const FlowPath& path, const GasConstants& gas) {
  check_gas(gas);
  if (path.cd <= 0.0 || path.cd > 1.0 || path.area_m2 <= 0.0) {
    throw std::invalid_argument("invalid flow path (need 0 < cd <= 1, area > 0)");
  }
  if (p_up <= 0.0) throw std::invalid_argument("upstream pressure must be positive");
  if (p_down >= p_up) return 0.0;

  const double g = gas.gamma;
  const double rt = gas.R * gas.T;
  const double ratio = p_down / p_up;
  if (ratio <= critical_pressure_ratio(gas)) {
    const double exponent = (g + 1.0) / (2.0 * (g - 1.0));
    return path.cda() * p_up * std::sqrt(g / rt) * std::pow(2.0 / (g + 1.0), exponent);
  }
  const double bracket = std::pow(ratio, 2.0 / g) - std::pow(ratio, (g + 1.0) / g);
  return path.cda() * p_up * std::sqrt(2.0 * g / (rt * (g - 1.0)) * std::max(bracket, 0.0));
}

double mass_flow_out(double p_abs, const FlowPath& path, const GasConstants& gas) {
  if (p_abs < gas.p_atm) {
    throw std::invalid_argument("venting requires pressure >= atmospheric");
  }
  return mass_flow(p_abs, gas.p_atm, path, gas);
}

PneumaticState make_state(const IpamGeometry& g, double elongation_m, double p_abs,
                          double p_reservoir_abs, const GasConstants& gas) {
  check_gas(gas);
  PneumaticState s;
  s.v = ipam_volume(g, elongation_m);
  s.p = p_abs;
  s.m = p_abs * s.v / (gas.R * gas.T);
  s.p_reservoir = p_reservoir_abs;
  return s;
}

PneumaticState step_deflate(const PneumaticState& s, const IpamGeometry& g, double elongation_m,
                            const FlowPath& path, const GasConstants& gas, double dt_s) {
  if (dt_s <= 0.0) throw std::invalid_argument("dt must be positive");
  PneumaticState out = s;
  out.v = ipam_volume(g, elongation_m);
  const double mdot = mass_flow(s.p, gas.p_atm, path, gas);
  const double m_atm = gas.p_atm * out.v / (gas.R * gas.T);
  out.m = std::max(s.m - mdot * dt_s, m_atm);
  out.p = out.m * gas.R * gas.T / out.v;
  return out;
}

PneumaticState step_inflate(const PneumaticState& s, const IpamGeometry& g, double elongation_m,
                            const FlowPath& path, const GasConstants& gas, double dt_s,
                            double reservoir_volume_m3) {
  if (dt_s <= 0.0) throw std::invalid_argument("dt must be positive");
  if (reservoir_volume_m3 <= 0.0) throw std::invalid_argument("reservoir volume must be positive");
  PneumaticState out = s;
  out.v = ipam_volume(g, elongation_m);

  const double rt = gas.R * gas.T;
  const double m_res = s.p_reservoir * reservoir_volume_m3 / rt;
  double dm = mass_flow(s.p_reservoir, s.p, path, gas) * dt_s;
  // Cap the transfer at the equalizing mass so a coarse step cannot push the
  // IPAM above the reservoir.
  const double dm_eq = (m_res * out.v - s.m * reservoir_volume_m3) / (out.v + reservoir_volume_m3);
  dm = std::clamp(dm, 0.0, std::max(dm_eq, 0.0));

  out.m = s.m + dm;
  out.p = out.m * rt / out.v;
  out.p_reservoir = (m_res - dm) * rt / reservoir_volume_m3;
  return out;
}

PneumaticState step_hold(const PneumaticState& s, const IpamGeometry& g, double elongation_m,
                         const GasConstants& gas) {
  PneumaticState out = s;
  out.v = ipam_volume(g, elongation_m);
  out.p = s.m * gas.R * gas.T / out.v;
  return out;
}

FlowPath calibrate_orifice(const CalibrationTarget& target, const GasConstants& gas,
                           const std::function<double(double)>& volume_at_time, double dt_s) {
  check_gas(gas);
  if (!(target.p_start_abs > target.p_end_abs)) {
    throw NoSolutionError("calibration needs p_start > p_end (deflation target)");
  }
  if (target.p_end_abs < gas.p_atm) {
    throw NoSolutionError("calibration target below atmospheric is unreachable by venting");
  }
  if (target.duration_s <= 0.0) throw NoSolutionError("calibration duration must be positive");

  const double rt = gas.R * gas.T;
  const double t_limit = std::max(10.0 * target.duration_s, 1.0);

  // Simulated time to drop from p_start to p_end through a given Cd*A.
  auto time_to_target = [&](double cda) {
    FlowPath path{1.0, cda};
    double v = volume_at_time(0.0);
    double m = target.p_start_abs * v / rt;
    double p = target.p_start_abs;
    double t = 0.0;
    while (p > target.p_end_abs) {
      if (t > t_limit) return t_limit * 2.0;
      const double mdot = (p > gas.p_atm) ? mass_flow(p, gas.p_atm, path, gas) : 0.0;
      t += dt_s;
      v = volume_at_time(t);
      m = std::max(m - mdot * dt_s, gas.p_atm * v / rt);
      p = m * rt / v;
      if (p <= gas.p_atm && target.p_end_abs <= gas.p_atm) break;
    }
    return t;
  };

  double lo = 1e-12, hi = 1e-2;  // m^2, generous bracket
  double t_lo = time_to_target(lo), t_hi = time_to_target(hi);
  if (!(t_hi <= target.duration_s && t_lo >= target.duration_s)) {
    throw NoSolutionError("calibration target not bracketed by orifice areas in [1e-12, 1e-2] m^2");
  }
  double mid = hi;
  for (int iter = 0; iter < 200; ++iter) {
    mid = std::sqrt(lo * hi);  // bisect in log space; areas span many decades
    const double t_mid = time_to_target(mid);
    if (std::abs(t_mid - target.duration_s) <= 0.01 * target.duration_s) break;
    if (t_mid > target.duration_s) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double t_final = time_to_target(mid);
  if (std::abs(t_final - target.duration_s) > 0.01 * target.duration_s) {
    throw NoSolutionError("orifice calibration did not converge to 1% of target duration");
  }
  return FlowPath{0.8, mid / 0.8};
}

}  // namespace vebs::pneumo
