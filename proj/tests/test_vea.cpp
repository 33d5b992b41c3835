#include "vebs/vea.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "vebs/errors.hpp"
#include "vebs/rng.hpp"
#include "vebs/units.hpp"

using namespace vebs;

namespace {

// Least-squares slope of force vs elongation over a phase window.
double trace_slope(const std::vector<vea::TracePoint>& trace, vea::BenchPhase phase, double l_min,
                   double l_max) {
  double sl = 0, sf = 0, sll = 0, slf = 0;
  int n = 0;
  for (const auto& pt : trace) {
    if (pt.phase != phase || pt.elongation_mm < l_min || pt.elongation_mm > l_max) continue;
    sl += pt.elongation_mm;
    sf += pt.force_n;
    sll += pt.elongation_mm * pt.elongation_mm;
    slf += pt.elongation_mm * pt.force_n;
    ++n;
  }
  REQUIRE(n > 10);
  return (n * slf - sl * sf) / (n * sll - sl * sl);
}

}  // namespace

TEST_CASE("active force hand evaluation and clamp") {
  const vea::ForceSurface s{};
  // Literal re-evaluation of the quadratic, term by term.
  const double f_120_0 = -1.4318 + 1.2213 * 120 + 0.0100 * 0 + 0.0076 * 120 * 120 +
                         0.0022 * 0 * 0 - 0.0348 * 120 * 0;
  const double f_120_50 = -1.4318 + 1.2213 * 120 + 0.0100 * 50 + 0.0076 * 120 * 120 +
                          0.0022 * 50 * 50 - 0.0348 * 120 * 50;
  CHECK(f_120_0 == doctest::Approx(254.5642).epsilon(1e-12));
  CHECK(f_120_50 == doctest::Approx(51.7642).epsilon(1e-12));
  CHECK(vea::active_force(s, 120, 0) == doctest::Approx(f_120_0).epsilon(1e-9));
  CHECK(vea::active_force(s, 120, 50) == doctest::Approx(f_120_50).epsilon(1e-9));

  CHECK(vea::active_force_raw(s, 0, 0) == doctest::Approx(-1.4318));
  CHECK(vea::active_force(s, 0, 0) == 0.0);
}

TEST_CASE("active force never increases with pressure beyond 16 mm") {
  const vea::ForceSurface s{};
  for (double l = 16; l <= 120; l += 4) {
    for (double p = 0; p < 50; p += 5) {
      CHECK(vea::active_force(s, l, p) >= vea::active_force(s, l, p + 5) - 1e-12);
    }
  }
}

TEST_CASE("total force composes surface and band at the slack-compensated elongation") {
  vea::DeviceParams dev = vea::default_device();
  vea::DeviceState st;
  st.elongation_mm = 110;
  st.pneumo.p = units::psig_to_pa(50.0);

  const double active = vea::active_force(dev.surface, 110, 50);
  CHECK(active == doctest::Approx(39.4712).epsilon(1e-6));
  CHECK(vea::total_force(dev, st) == doctest::Approx(96.25 + active).epsilon(1e-9));

  // Deflating 50 -> 0 psig at 110 mm adds the surface difference.
  vea::DeviceState deflated = st;
  deflated.pneumo.p = units::psig_to_pa(0.0);
  CHECK(vea::total_force(dev, deflated) - vea::total_force(dev, st) ==
        doctest::Approx(185.4).epsilon(1e-6));

  // Slack tuning: offset equal to elongation leaves a slack device.
  vea::DeviceState slack = st;
  slack.slack_offset_mm = st.elongation_mm;
  slack.pneumo.p = units::psig_to_pa(0.0);
  CHECK(vea::total_force(dev, slack) == 0.0);
}

TEST_CASE("total force is monotone in elongation at fixed pressure") {
  vea::DeviceParams dev = vea::default_device();
  for (double p : {0.0, 25.0, 50.0}) {
    vea::DeviceState st;
    st.pneumo.p = units::psig_to_pa(p);
    double last = -1;
    for (double l = 0; l <= 120; l += 2) {
      st.elongation_mm = l;
      const double f = vea::total_force(dev, st);
      CHECK(f >= last - 1e-12);
      last = f;
    }
  }
}

TEST_CASE("surface fit recovers exact coefficients from noiseless samples") {
  const vea::ForceSurface truth{};
  std::vector<vea::SurfaceSample> samples;
  for (double l = 0; l <= 120; l += 20) {
    for (double p = 0; p <= 50; p += 10) {
      samples.push_back({l, p, vea::active_force_raw(truth, l, p)});
    }
  }
  const auto fit = vea::fit_force_surface(samples);
  CHECK(fit.surface.a == doctest::Approx(truth.a).epsilon(1e-9));
  CHECK(fit.surface.b == doctest::Approx(truth.b).epsilon(1e-9));
  CHECK(fit.surface.c == doctest::Approx(truth.c).epsilon(1e-9));
  CHECK(fit.surface.d == doctest::Approx(truth.d).epsilon(1e-9));
  CHECK(fit.surface.e == doctest::Approx(truth.e).epsilon(1e-9));
  CHECK(fit.surface.f == doctest::Approx(truth.f).epsilon(1e-9));
  CHECK(fit.rms_residual_n < 1e-9);
}

TEST_CASE("surface fit rejects underdetermined or degenerate sample sets") {
  const vea::ForceSurface truth{};
  std::vector<vea::SurfaceSample> five;
  for (double l : {0.0, 30.0, 60.0, 90.0, 120.0}) {
    five.push_back({l, l / 3, vea::active_force_raw(truth, l, l / 3)});
  }
  CHECK_THROWS_AS((void)vea::fit_force_surface(five), NoSolutionError);

  // Plenty of samples but all at one pressure: pressure terms unidentifiable.
  std::vector<vea::SurfaceSample> collapsed;
  for (double l = 0; l <= 120; l += 5) {
    collapsed.push_back({l, 20.0, vea::active_force_raw(truth, l, 20.0)});
  }
  CHECK_THROWS_AS((void)vea::fit_force_surface(collapsed), NoSolutionError);
}

TEST_CASE("surface fit error shrinks as noisy samples accumulate") {
  const vea::ForceSurface truth{};
  auto fit_error = [&](int count, std::uint64_t seed) {
    rng::Engine eng(seed);
    std::vector<vea::SurfaceSample> samples;
    samples.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
      const double l = eng.uniform(0.0, 120.0);
      const double p = eng.uniform(0.0, 50.0);
      samples.push_back({l, p, vea::active_force_raw(truth, l, p) + eng.normal(0.0, 1.0)});
    }
    const auto fit = vea::fit_force_surface(samples);
    double err = std::fabs(fit.surface.a - truth.a);
    err = std::max(err, std::fabs(fit.surface.b - truth.b));
    err = std::max(err, std::fabs(fit.surface.c - truth.c));
    err = std::max(err, std::fabs(fit.surface.d - truth.d));
    err = std::max(err, std::fabs(fit.surface.e - truth.e));
    err = std::max(err, std::fabs(fit.surface.f - truth.f));
    return err;
  };
  CHECK(fit_error(4000, 7) < fit_error(200, 7));
}

TEST_CASE("quasi-static bench: measured slopes, hysteresis-free when lossless") {
  vea::DeviceParams dev = vea::default_device();
  vea::QuasiStaticScenario sc;  // 110 mm at 60 mm/min, 2 s hold

  auto trace = vea::simulate_quasistatic(dev, sc);
  CHECK(trace_slope(trace, vea::BenchPhase::loading, 5, 105) ==
        doctest::Approx(0.875).epsilon(1e-9));

  // Lossless unloading retraces the loading line.
  for (const auto& pt : trace) {
    CHECK(pt.force_n == doctest::Approx(0.875 * pt.elongation_mm).epsilon(1e-9));
  }

  vea::QuasiStaticScenario engaged = sc;
  engaged.clutch_engaged_throughout = true;
  auto trace_eng = vea::simulate_quasistatic(dev, engaged);
  const double k_eng = trace_slope(trace_eng, vea::BenchPhase::loading, 5, 105);
  CHECK(k_eng == doctest::Approx(1.313).epsilon(1e-9));
  CHECK(k_eng / 0.875 == doctest::Approx(1.5006).epsilon(1e-4));
}

TEST_CASE("mid-pull engagement shifts the slope at threshold + latency * rate") {
  vea::DeviceParams dev = vea::default_device();
  vea::QuasiStaticScenario sc;
  sc.clutch_engage_at_mm = 75.0;

  auto trace = vea::simulate_quasistatic(dev, sc);
  CHECK(trace_slope(trace, vea::BenchPhase::loading, 5, 70) == doctest::Approx(0.875).epsilon(1e-9));
  CHECK(trace_slope(trace, vea::BenchPhase::loading, 80, 108) ==
        doctest::Approx(1.313).epsilon(1e-9));

  // The clutch grips 300 ms after the 75 mm crossing; at 60 mm/min that is
  // +0.3 mm of travel. No engaged sample may appear earlier.
  const double rate_mm_s = 60.0 / 60.0;
  const double expected_grip_mm = 75.0 + 0.3 * rate_mm_s;
  double first_engaged_mm = 1e9;
  for (const auto& pt : trace) {
    if (pt.clutch_engaged && pt.phase == vea::BenchPhase::loading) {
      first_engaged_mm = std::min(first_engaged_mm, pt.elongation_mm);
    }
  }
  CHECK(first_engaged_mm == doctest::Approx(expected_grip_mm).epsilon(1e-6));

  // Force stays continuous across the switch: the engaged branch continues
  // from the disengaged line at the grip point.
  for (const auto& pt : trace) {
    if (pt.phase != vea::BenchPhase::loading) continue;
    if (pt.elongation_mm >= expected_grip_mm) {
      const double expected =
          0.875 * expected_grip_mm + 1.313 * (pt.elongation_mm - expected_grip_mm);
      CHECK(pt.force_n == doctest::Approx(expected).epsilon(1e-9));
    }
  }

  vea::QuasiStaticScenario bad = sc;
  bad.clutch_engage_at_mm = 200.0;
  CHECK_THROWS_AS((void)vea::simulate_quasistatic(dev, bad), ConfigError);
}

TEST_CASE("dynamic pull: deflation target ordering and detection-delay behavior") {
  vea::DeviceParams dev = vea::default_device();

  // Higher deflation targets leave more pressure and less restored force, so
  // walking the target down must walk the restored peak up.
  double last_peak = -1e9;
  for (double target : {30.0, 15.0, 0.0}) {
    vea::DynamicScenario sc;
    sc.deflate_target_psig = target;
    auto res = vea::simulate_dynamic(dev, sc);
    CHECK(res.peak_active_n > last_peak);
    last_peak = res.peak_active_n;
  }

  // A delay spanning the whole return suppresses assistance entirely.
  vea::DynamicScenario late;
  late.deflate_delay_s = 3.0;  // return lasts 100 mm / (2000 mm/min) = 3 s
  auto res = vea::simulate_dynamic(dev, late);
  CHECK(res.trace.back().p_psig > 45.0);
  CHECK(res.peak_active_n < 60.0);

  vea::DynamicScenario bad;
  bad.deflate_target_psig = 60.0;
  CHECK_THROWS_AS((void)vea::simulate_dynamic(dev, bad), ConfigError);
}

TEST_CASE("a fast-vent orifice puts the restored-force peak in the first quarter of the return") {
  vea::DeviceParams dev = vea::default_device();
  // Size the vent for a 0.5 s full deflation at peak elongation (the default
  // build uses the 0.8 s bench target; see the latency suite).
  auto volume = [&](double) { return pneumo::ipam_volume(dev.ipam, 0.110); };
  dev.deflate_path = pneumo::calibrate_orifice(
      {units::psig_to_pa(50.0), units::psig_to_pa(0.0), 0.5}, dev.gas, volume);

  vea::DynamicScenario sc;  // 100 mm at 2000 mm/min, 300 ms delay, target 0
  auto res = vea::simulate_dynamic(dev, sc);
  CHECK(res.peak_active_percent_of_return < 25.0);
  CHECK(res.peak_active_percent_of_return > 10.0);  // the 300 ms delay alone is 10%
}

TEST_CASE("cycle energy: sign structure and closure check") {
  vea::DeviceParams dev = vea::default_device();
  vea::QuasiStaticScenario sc;

  // Conservative passive cycle integrates to zero.
  auto trace = vea::simulate_quasistatic(dev, sc);
  CHECK(vea::cycle_energy(trace) == doctest::Approx(0.0).epsilon(1e-6));

  // Unloading losses make the passive cycle dissipative.
  vea::DeviceParams lossy = dev;
  lossy.band.loss_factor = 0.2;
  auto trace_lossy = vea::simulate_quasistatic(lossy, sc);
  CHECK(vea::cycle_energy(trace_lossy) < -1.0);

  // Active cycle with full deflation returns more force than it took.
  auto dynamic = vea::simulate_dynamic(dev, vea::DynamicScenario{});
  CHECK(vea::cycle_energy(dynamic.trace) > 1.0);

  // Open cycles are rejected.
  std::vector<vea::TracePoint> open(trace.begin(), trace.begin() + trace.size() / 2);
  CHECK_THROWS_AS((void)vea::cycle_energy(open), std::invalid_argument);
}
