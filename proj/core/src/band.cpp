#include "vebs/band.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "vebs/errors.hpp"

namespace vebs::band {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(name) + " must be positive, got " +
                                std::to_string(v));
  }
}

double series2(double ka, double kb) { return 1.0 / (1.0 / ka + 1.0 / kb); }

}  // namespace

double region_stiffness(const BandGeometry& g, Region region) {
  require_positive(g.thickness_mm, "thickness");
  require_positive(g.youngs_modulus, "youngs_modulus");
  double w = 0, len = 0;
  switch (region) {
    case Region::bottom: w = g.width_bottom_mm; len = g.length_bottom_mm; break;
    case Region::top:    w = g.width_top_mm;    len = g.length_top_mm;    break;
    case Region::side:   w = g.width_side_mm;   len = g.length_side_mm;   break;
  }
  require_positive(w, "width");
  require_positive(len, "length");
  return w * g.thickness_mm * g.youngs_modulus / len;
}

BandModel model_from_geometry(const BandGeometry& g) {
  BandModel m;
  m.k_bottom = region_stiffness(g, Region::bottom);
  m.k_top = region_stiffness(g, Region::top);
  m.k_side = region_stiffness(g, Region::side);
  return m;
}

BandModel model_from_stiffness_targets(double k_disengaged, double k_engaged) {
  require_positive(k_disengaged, "k_disengaged");
  require_positive(k_engaged, "k_engaged");
  if (k_engaged <= k_disengaged) {
    throw NoSolutionError("engaged stiffness must exceed disengaged stiffness (got " +
                          std::to_string(k_engaged) + " <= " + std::to_string(k_disengaged) + ")");
  }
  BandModel m;
  m.k_bottom = 2.0 * k_engaged;
  m.k_top = 2.0 * k_engaged;
  // 1/k_dis = 1/k_eng + 1/(2 k_side)
  m.k_side = 0.5 / (1.0 / k_disengaged - 1.0 / k_engaged);
  return m;
}

double stiffness_disengaged(const BandModel& m) {
  require_positive(m.k_bottom, "k_bottom");
  require_positive(m.k_top, "k_top");
  require_positive(m.k_side, "k_side");
  return 1.0 / (1.0 / m.k_bottom + 1.0 / (2.0 * m.k_side) + 1.0 / m.k_top);
}

double stiffness_engaged(const BandModel& m) {
  require_positive(m.k_bottom, "k_bottom");
  require_positive(m.k_top, "k_top");
  return series2(m.k_bottom, m.k_top);
}

double band_stiffness(const BandModel& m) {
  return m.clutch_engaged ? stiffness_engaged(m) : stiffness_disengaged(m);
}

double passive_force(const BandModel& m, const ClutchState& clutch, double elongation_mm,
                     bool unloading) {
  if (elongation_mm < 0.0 || !std::isfinite(elongation_mm)) {
    throw std::invalid_argument("elongation must be >= 0, got " + std::to_string(elongation_mm));
  }
  double force;
  if (clutch.engaged) {
    const double le = clutch.engage_elongation_mm;
    force = stiffness_disengaged(m) * le + stiffness_engaged(m) * (elongation_mm - le);
  } else {
    force = stiffness_disengaged(m) * elongation_mm;
  }
  if (unloading) force *= (1.0 - m.loss_factor);
  return std::max(force, 0.0);
}

double passive_force(const BandModel& m, double elongation_mm, bool unloading) {
  return passive_force(m, ClutchState{m.clutch_engaged, 0.0}, elongation_mm, unloading);
}

void ClutchLatch::command(bool engage, double t_s) {
  if (engage == commanded_) return;
  commanded_ = engage;
  pending_since_s_ = t_s;
}

ClutchState ClutchLatch::update(double t_s, double elongation_mm) {
  // Nanosecond slack: a grip scheduled exactly on a sample instant must not
  // slip to the next sample because t_s carries accumulated rounding.
  if (pending_since_s_ && t_s - *pending_since_s_ >= latency_s_ - 1e-9) {
    pending_since_s_.reset();
    if (commanded_ && !state_.engaged) {
      state_.engaged = true;
      state_.engage_elongation_mm = elongation_mm;
    } else if (!commanded_) {
      state_ = ClutchState{};
    }
  }
  return state_;
}

BandGeometry solve_geometry_for_targets(double k_disengaged, double k_engaged,
                                        const GeometryBounds& bounds) {
  const BandModel model = model_from_stiffness_targets(k_disengaged, k_engaged);

  // Realize one region stiffness as w*t*E/L: start from the reference width,
  // clamp the implied length into bounds, then re-derive the width.
  auto realize = [&](double k, double w_ref, double& w_out, double& len_out) {
    const double te = bounds.thickness_mm * bounds.youngs_modulus;
    double w = std::clamp(w_ref, bounds.min_width_mm, bounds.max_width_mm);
    double len = std::clamp(w * te / k, bounds.min_length_mm, bounds.max_length_mm);
    w = k * len / te;
    if (w < bounds.min_width_mm || w > bounds.max_width_mm) {
      throw NoSolutionError("stiffness " + std::to_string(k) +
                            " N/mm not realizable within geometry bounds");
    }
    w_out = w;
    len_out = len;
  };

  BandGeometry g;
  g.thickness_mm = bounds.thickness_mm;
  g.youngs_modulus = bounds.youngs_modulus;
  realize(model.k_bottom, bounds.reference_main_width_mm, g.width_bottom_mm, g.length_bottom_mm);
  realize(model.k_top, bounds.reference_main_width_mm, g.width_top_mm, g.length_top_mm);
  realize(model.k_side, bounds.reference_side_width_mm, g.width_side_mm, g.length_side_mm);
  return g;
}

}  // namespace vebs::band
