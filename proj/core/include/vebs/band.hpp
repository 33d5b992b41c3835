#pragma once

#include <optional>

namespace vebs::band {

// Variable-stiffness resistance band: an elastic sheet with a cut-out window,
// leaving a bottom region, a top region and two side strips. An
// electroadhesive clutch bridges the window; engaging it shunts the side
// strips out of the load path and raises the series stiffness.

/// Planar band geometry. Lengths/widths/thickness in mm, modulus in N/mm^2.
struct BandGeometry {
  double length_bottom_mm = 0;
  double length_top_mm = 0;
  double length_side_mm = 0;
  double width_bottom_mm = 0;
  double width_top_mm = 0;
  double width_side_mm = 0;
  double thickness_mm = 0;
  double youngs_modulus = 0;  // N/mm^2
};

enum class Region { bottom, top, side };

/// Axial stiffness w*t*E/L of one region in N/mm. Side returns the stiffness
/// of a single strip; the band carries two in parallel.
[[nodiscard]] double region_stiffness(const BandGeometry& g, Region region);

/// Lumped spring-network parameters of the band, N/mm.
struct BandModel {
  double k_bottom = 0;
  double k_top = 0;
  double k_side = 0;          // one strip
  bool clutch_engaged = false;
  double clutch_latency_s = 0.3;
  double loss_factor = 0.0;   // unloading-branch force multiplier is (1 - loss_factor)
};

[[nodiscard]] BandModel model_from_geometry(const BandGeometry& g);

/// Builds a model whose disengaged/engaged stiffnesses equal the given values
/// exactly (k_bottom = k_top = 2*k_engaged, k_side from the disengaged target).
[[nodiscard]] BandModel model_from_stiffness_targets(double k_disengaged, double k_engaged);

/// Network stiffness for an explicit clutch setting: the bottom and top
/// springs in series with the side pair (2*k_side), which the engaged clutch
/// bypasses (rigid shunt).
[[nodiscard]] double stiffness_disengaged(const BandModel& m);
[[nodiscard]] double stiffness_engaged(const BandModel& m);

/// Stiffness for the model's current clutch_engaged flag.
[[nodiscard]] double band_stiffness(const BandModel& m);

/// Clutch engagement while loaded latches the side-segment stretch: above the
/// engagement elongation the force continues from the engagement point with
/// the engaged slope. Disengaging releases the latch (back to the baseline
/// line). engage_elongation_mm is meaningful only while engaged.
struct ClutchState {
  bool engaged = false;
  double engage_elongation_mm = 0;
};

/// Tension in N at a given elongation (mm, >= 0 required). `unloading`
/// applies the (1 - loss_factor) hysteresis branch. Never negative.
[[nodiscard]] double passive_force(const BandModel& m, const ClutchState& clutch,
                                   double elongation_mm, bool unloading = false);

/// Convenience overload: clutch per m.clutch_engaged, engaged from zero elongation.
[[nodiscard]] double passive_force(const BandModel& m, double elongation_mm,
                                   bool unloading = false);

/// Command-to-actuation latency tracker for the electroadhesive clutch.
/// Engagement records the elongation at the instant the clutch actually grips.
class ClutchLatch {
 public:
  explicit ClutchLatch(double latency_s = 0.3) : latency_s_(latency_s) {}

  void command(bool engage, double t_s);
  /// Advances to time t; returns the physical clutch state.
  ClutchState update(double t_s, double elongation_mm);
  [[nodiscard]] ClutchState state() const { return state_; }
  [[nodiscard]] bool commanded() const { return commanded_; }

 private:
  double latency_s_;
  bool commanded_ = false;
  std::optional<double> pending_since_s_;
  ClutchState state_{};
};

struct GeometryBounds {
  double min_length_mm = 20;
  double max_length_mm = 200;
  double min_width_mm = 5;
  double max_width_mm = 60;
  double thickness_mm = 2.0;
  double youngs_modulus = 1.6;  // N/mm^2
  double reference_main_width_mm = 50;
  double reference_side_width_mm = 10;
};

/// Inverts the stiffness design problem in two stages: (1) split the engaged
/// target across equal bottom/top springs, (2) size the side strips from the
/// disengaged target, then realize each stiffness as w*t*E/L within bounds.
/// Throws NoSolutionError when k_engaged <= k_disengaged (the side term would
/// need non-positive compliance) or when bounds cannot realize a region.
[[nodiscard]] BandGeometry solve_geometry_for_targets(double k_disengaged, double k_engaged,
                                                      const GeometryBounds& bounds = {});

}  // namespace vebs::band
