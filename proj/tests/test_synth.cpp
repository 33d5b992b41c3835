#include "vebs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "vebs/errors.hpp"

using namespace vebs;

namespace {

synth::SubjectParams noiseless() {
  synth::SubjectParams s;
  s.noise_alpha_deg = 0;
  s.noise_omega_deg_s = 0;
  s.noise_accel_m_s2 = 0;
  s.noise_fsr_rel = 0;
  return s;
}

double mean_fsr0(const std::vector<est::SensorFrame>& frames) {
  double sum = 0;
  for (const auto& f : frames) sum += f.fsr[0];
  return sum / static_cast<double>(frames.size());
}

}  // namespace

TEST_CASE("analytic velocity and acceleration match finite differences of the angle") {
  const auto s = noiseless();
  const double h = 1e-5;
  for (double t = 0.013; t < 6.49; t += 0.0137) {
    const double v_fd =
        (synth::trunk_angle_deg(s, t + h) - synth::trunk_angle_deg(s, t - h)) / (2 * h);
    CHECK(std::fabs(synth::trunk_velocity_deg_s(s, t) - v_fd) < 1e-5);
    const double a_fd =
        (synth::trunk_velocity_deg_s(s, t + h) - synth::trunk_velocity_deg_s(s, t - h)) / (2 * h);
    CHECK(std::fabs(synth::trunk_accel_deg_s2(s, t) - a_fd) < 1e-4);
  }
}

TEST_CASE("the angle profile hits its endpoints and stays inside the range of motion") {
  const auto s = noiseless();
  const double T = s.cycle_duration_s;
  CHECK(synth::trunk_angle_deg(s, 0.0) == 0.0);
  CHECK(synth::trunk_angle_deg(s, T / 6) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(synth::trunk_angle_deg(s, T / 2) == doctest::Approx(s.rom_max_deg).epsilon(1e-12));
  CHECK(synth::trunk_angle_deg(s, 0.6 * T) == doctest::Approx(s.rom_max_deg).epsilon(1e-12));
  CHECK(synth::trunk_angle_deg(s, 2 * T + T / 12) == 0.0);
  double prev = -1;
  for (double t = T / 6; t <= T / 2 + 1e-12; t += 0.001) {
    const double a = synth::trunk_angle_deg(s, t);
    CHECK(a >= prev - 1e-12);
    CHECK(a <= s.rom_max_deg + 1e-12);
    prev = a;
  }
}

TEST_CASE("a noiseless trial reproduces the analytic channels exactly") {
  const auto s = noiseless();
  auto frames = synth::generate_trial(s, ctrl::WeightClass::kg15, 0);
  CHECK(frames.size() == 650);
  constexpr double kG = 9.80665;
  constexpr double kD2R = 3.14159265358979323846 / 180.0;
  for (const auto& f : frames) {
    CHECK(f.alpha_deg == synth::trunk_angle_deg(s, f.t_s));
    CHECK(f.omega_deg_s == synth::trunk_velocity_deg_s(s, f.t_s));
    const double w = f.omega_deg_s * kD2R;
    const double wd = synth::trunk_accel_deg_s2(s, f.t_s) * kD2R;
    const double a1 = kG * std::cos(f.alpha_deg * kD2R) + s.imu_radius_m * w * w;
    const double a2 = kG * std::sin(f.alpha_deg * kD2R) + s.imu_radius_m * wd;
    CHECK(f.a1_m_s2 == doctest::Approx(a1).epsilon(1e-12));
    CHECK(f.a2_m_s2 == doctest::Approx(a2).epsilon(1e-12));
  }
}

TEST_CASE("labels follow the phase schedule and the load is held once per trial") {
  const auto s = noiseless();
  const double T = s.cycle_duration_s;
  auto frames = synth::generate_trial(s, ctrl::WeightClass::kg15, 3);
  int held_edges = 0;
  bool prev_held = false;
  std::map<ctrl::TrunkState, int> state_counts;
  for (const auto& f : frames) {
    REQUIRE(f.label_state.has_value());
    REQUIRE(f.label_weight.has_value());
    state_counts[*f.label_state]++;

    const double u = f.t_s >= 2 * T ? 0.0 : std::fmod(f.t_s, T);
    ctrl::TrunkState expect = ctrl::TrunkState::standing;
    if (u >= T / 6 && u < T / 2) expect = ctrl::TrunkState::flexing;
    else if (u >= T / 2 && u < 2 * T / 3) expect = ctrl::TrunkState::stooped;
    else if (u >= 2 * T / 3) expect = ctrl::TrunkState::extending;
    CHECK(*f.label_state == expect);

    const bool held = *f.label_weight == ctrl::WeightClass::kg15;
    if (held != prev_held) ++held_edges;
    if (held) {
      // Pickup and set-down both land inside a stooped dwell.
      CHECK(f.fsr[0] == doctest::Approx(5.0 + 20.0 * 1.0).epsilon(1e-12));
    } else {
      CHECK(*f.label_weight == ctrl::WeightClass::kg0);
      CHECK(f.fsr[0] == doctest::Approx(5.0).epsilon(1e-12));
    }
    prev_held = held;
  }
  CHECK(held_edges == 2);  // one pickup, one set-down
  CHECK(state_counts.size() == 4);
  // The held interval starts inside the first stoop and ends inside the second.
  auto first_held = std::find_if(frames.begin(), frames.end(), [](const auto& f) {
    return *f.label_weight == ctrl::WeightClass::kg15;
  });
  REQUIRE(first_held != frames.end());
  CHECK(*first_held->label_state == ctrl::TrunkState::stooped);
  CHECK(first_held->t_s >= T / 2);
  CHECK(first_held->t_s < 2 * T / 3);
}

TEST_CASE("forearm-sensor levels order by carried weight") {
  synth::SubjectParams s;  // default noise
  const double m0 = mean_fsr0(synth::generate_trial(s, ctrl::WeightClass::kg0, 0));
  const double m7 = mean_fsr0(synth::generate_trial(s, ctrl::WeightClass::kg7_5, 0));
  const double m15 = mean_fsr0(synth::generate_trial(s, ctrl::WeightClass::kg15, 0));
  CHECK(m7 > m0 + 0.5);
  CHECK(m15 > m7 + 0.5);
}

TEST_CASE("trial generation is deterministic in the seed and varies with the trial index") {
  synth::SubjectParams s;
  auto a = synth::generate_trial(s, ctrl::WeightClass::kg7_5, 5);
  auto b = synth::generate_trial(s, ctrl::WeightClass::kg7_5, 5);
  REQUIRE(a.size() == b.size());
  bool identical = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    identical = identical && a[i].alpha_deg == b[i].alpha_deg &&
                a[i].omega_deg_s == b[i].omega_deg_s && a[i].fsr == b[i].fsr;
  }
  CHECK(identical);

  auto c = synth::generate_trial(s, ctrl::WeightClass::kg7_5, 6);
  bool differs = false;
  for (std::size_t i = 0; i < a.size() && !differs; ++i) {
    differs = a[i].alpha_deg != c[i].alpha_deg;
  }
  CHECK(differs);
}

TEST_CASE("the dataset split is stratified by weight and cycle kind") {
  synth::SubjectParams s;
  std::vector<synth::TrialSpec> specs = {{ctrl::WeightClass::kg0, 10},
                                         {ctrl::WeightClass::kg7_5, 10},
                                         {ctrl::WeightClass::kg15, 10}};
  auto ds = synth::generate_dataset(s, specs, 0.7);
  CHECK(ds.train.size() == 42);
  CHECK(ds.test.size() == 18);

  std::map<std::pair<int, int>, std::pair<int, int>> counts;  // (weight, kind) -> (train, test)
  for (const auto& c : ds.train) {
    counts[{static_cast<int>(c.weight), static_cast<int>(c.kind)}].first++;
  }
  for (const auto& c : ds.test) {
    counts[{static_cast<int>(c.weight), static_cast<int>(c.kind)}].second++;
  }
  CHECK(counts.size() == 6);
  for (const auto& [key, n] : counts) {
    CHECK(n.first == 7);
    CHECK(n.second == 3);
  }

  // Lifting and lowering halves of one trial stay distinct cycles.
  for (const auto& c : ds.train) {
    CHECK(c.frames.front().t_s == 0.0);
    CHECK(c.frames.size() >= 300);
  }
}

TEST_CASE("windowed features align labels with the requested lookahead") {
  auto s = noiseless();
  synth::Cycle cycle{ctrl::WeightClass::kg15, synth::CycleKind::lifting, 0,
                     synth::generate_trial(s, ctrl::WeightClass::kg15, 0)};
  const auto& fr = cycle.frames;
  const std::size_t n = fr.size();

  auto plain = synth::windowed_features({&cycle, 1}, est::FeatureMode::state, 1, 0);
  CHECK(plain.features.size() == n - 29);
  CHECK(plain.features.front().size() == 32);
  for (std::size_t i = 0; i < plain.labels.size(); ++i) {
    CHECK(plain.labels[i] == static_cast<int>(*fr[i + 29].label_state));
  }

  auto ahead = synth::windowed_features({&cycle, 1}, est::FeatureMode::weight, 1, 10);
  for (std::size_t i = 0; i < ahead.labels.size(); ++i) {
    const std::size_t j = std::min(i + 29 + 10, n - 1);
    CHECK(ahead.labels[i] == static_cast<int>(*fr[j].label_weight));
  }

  auto strided = synth::windowed_features({&cycle, 1}, est::FeatureMode::state, 3, 0);
  CHECK(strided.features.size() == (plain.features.size() + 2) / 3);

  CHECK_THROWS_AS((void)synth::windowed_features({&cycle, 1}, est::FeatureMode::state, 0, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)synth::windowed_features({&cycle, 1}, est::FeatureMode::state, 1, -1),
                  std::invalid_argument);
}

TEST_CASE("traces round trip through CSV exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "vebs_synth_test";
  std::filesystem::create_directories(dir);
  synth::SubjectParams s;
  auto labeled = synth::generate_trial(s, ctrl::WeightClass::kg7_5, 2);

  const auto p1 = dir / "labeled.csv";
  synth::write_trace(p1, labeled);
  auto back = synth::read_trace(p1);
  REQUIRE(back.size() == labeled.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].t_s == labeled[i].t_s);
    CHECK(back[i].alpha_deg == labeled[i].alpha_deg);
    CHECK(back[i].omega_deg_s == labeled[i].omega_deg_s);
    CHECK(back[i].a1_m_s2 == labeled[i].a1_m_s2);
    CHECK(back[i].a2_m_s2 == labeled[i].a2_m_s2);
    CHECK(back[i].fsr == labeled[i].fsr);
    CHECK(back[i].label_state == labeled[i].label_state);
    CHECK(back[i].label_weight == labeled[i].label_weight);
  }

  auto bare = labeled;
  for (auto& f : bare) {
    f.label_state.reset();
    f.label_weight.reset();
  }
  const auto p2 = dir / "bare.csv";
  synth::write_trace(p2, bare);
  auto bare_back = synth::read_trace(p2);
  REQUIRE(bare_back.size() == bare.size());
  CHECK_FALSE(bare_back.front().label_state.has_value());
  CHECK(bare_back.front().alpha_deg == bare.front().alpha_deg);

  auto mixed = labeled;
  mixed[3].label_state.reset();
  mixed[3].label_weight.reset();
  CHECK_THROWS_AS(synth::write_trace(dir / "mixed.csv", mixed), std::invalid_argument);
  std::filesystem::remove_all(dir);
}

TEST_CASE("trace reading rejects bad headers and disordered timestamps") {
  const auto dir = std::filesystem::temp_directory_path() / "vebs_synth_bad";
  std::filesystem::create_directories(dir);

  {
    std::ofstream out(dir / "badheader.csv");
    out << "t,alpha,velocity,a1,a2,f1,f2,f3,f4,f5,f6\n";
    out << "0,0,0,0,0,1,1,1,1,1,1\n";
  }
  try {
    (void)synth::read_trace(dir / "badheader.csv");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("omega") != std::string::npos);
  }

  {
    std::ofstream out(dir / "disorder.csv");
    out << "t,alpha,omega,a1,a2,f1,f2,f3,f4,f5,f6\n";
    out << "0,0,0,0,0,1,1,1,1,1,1\n";
    out << "0.01,1,0,0,0,1,1,1,1,1,1\n";
    out << "0.005,2,0,0,0,1,1,1,1,1,1\n";
  }
  try {
    (void)synth::read_trace(dir / "disorder.csv");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    const std::string what = e.what();
    CHECK(what.find(":4:") != std::string::npos);
    CHECK(what.find("increasing") != std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("subject parameters are validated") {
  synth::SubjectParams s;
  s.rom_max_deg = 150;
  CHECK_THROWS_AS((void)synth::generate_trial(s, ctrl::WeightClass::kg0, 0), std::invalid_argument);
  s = synth::SubjectParams{};
  s.noise_fsr_rel = -0.1;
  CHECK_THROWS_AS((void)synth::generate_trial(s, ctrl::WeightClass::kg0, 0), std::invalid_argument);
  s = synth::SubjectParams{};
  std::vector<synth::TrialSpec> specs = {{ctrl::WeightClass::kg0, 0}};
  CHECK_THROWS_AS((void)synth::generate_dataset(s, specs, 0.7), std::invalid_argument);
  std::vector<synth::TrialSpec> ok = {{ctrl::WeightClass::kg0, 2}};
  CHECK_THROWS_AS((void)synth::generate_dataset(s, ok, 1.0), std::invalid_argument);
}
