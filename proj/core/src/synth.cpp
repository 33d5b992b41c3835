#include "vebs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vebs/csv.hpp"
#include "vebs/errors.hpp"
#include "vebs/rng.hpp"

namespace vebs::synth {

namespace {

constexpr double kGravity = 9.80665;  // m/s^2
constexpr double kDegToRad = std::numbers::pi / 180.0;

// Per-channel forearm-sensor shape: distinct baselines and load couplings so
// the six channels carry non-redundant information.
constexpr double kFsrBaseline[6] = {5.0, 5.5, 6.0, 6.5, 7.0, 7.5};
constexpr double kFsrCoupling[6] = {1.0, 0.9, 0.8, 0.7, 0.6, 0.5};

enum class Phase { stand, flex, stoop, extend };

struct PhasePoint {
  Phase phase;
  double tau;        // progress through the phase in [0, 1]
  double duration_s;  // phase duration
};

void validate(const SubjectParams& s) {
  if (!(s.rom_max_deg > 30.0 && s.rom_max_deg < 120.0)) {
    throw std::invalid_argument("rom_max_deg must lie in (30, 120)");
  }
  if (!(s.cycle_duration_s > 0) || !(s.sample_rate_hz > 0) || !(s.imu_radius_m >= 0)) {
    throw std::invalid_argument("cycle_duration_s, sample_rate_hz must be positive");
  }
  if (s.noise_alpha_deg < 0 || s.noise_omega_deg_s < 0 || s.noise_accel_m_s2 < 0 ||
      s.noise_fsr_rel < 0) {
    throw std::invalid_argument("noise levels must be non-negative");
  }
}

// Phase schedule within one cycle: stand T/6, flex T/3, stoop T/6, extend T/3.
// The trial is two cycles plus a trailing stand of T/6.
PhasePoint locate(const SubjectParams& s, double t) {
  const double T = s.cycle_duration_s;
  if (t >= 2 * T) return {Phase::stand, 0.0, T / 6};
  const double u = std::fmod(t, T);
  if (u < T / 6) return {Phase::stand, u / (T / 6), T / 6};
  if (u < T / 2) return {Phase::flex, (u - T / 6) / (T / 3), T / 3};
  if (u < 2 * T / 3) return {Phase::stoop, (u - T / 2) / (T / 6), T / 6};
  return {Phase::extend, (u - 2 * T / 3) / (T / 3), T / 3};
}

double minjerk(double tau) { return tau * tau * tau * (10 + tau * (-15 + 6 * tau)); }
double minjerk_d(double tau) { return tau * tau * (30 + tau * (-60 + 30 * tau)); }
double minjerk_dd(double tau) { return tau * (60 + tau * (-180 + 120 * tau)); }

ctrl::TrunkState state_of(Phase p) {
  switch (p) {
    case Phase::stand: return ctrl::TrunkState::standing;
    case Phase::flex: return ctrl::TrunkState::flexing;
    case Phase::stoop: return ctrl::TrunkState::stooped;
    case Phase::extend: return ctrl::TrunkState::extending;
  }
  throw std::logic_error("unreachable");
}

std::size_t weight_index(ctrl::WeightClass w) { return static_cast<std::size_t>(w); }

}  // namespace

double trunk_angle_deg(const SubjectParams& s, double t) {
  const auto [phase, tau, dur] = locate(s, t);
  (void)dur;
  switch (phase) {
    case Phase::stand: return 0.0;
    case Phase::flex: return s.rom_max_deg * minjerk(tau);
    case Phase::stoop: return s.rom_max_deg;
    case Phase::extend: return s.rom_max_deg * (1.0 - minjerk(tau));
  }
  throw std::logic_error("unreachable");
}

double trunk_velocity_deg_s(const SubjectParams& s, double t) {
  const auto [phase, tau, dur] = locate(s, t);
  switch (phase) {
    case Phase::stand:
    case Phase::stoop: return 0.0;
    case Phase::flex: return s.rom_max_deg * minjerk_d(tau) / dur;
    case Phase::extend: return -s.rom_max_deg * minjerk_d(tau) / dur;
  }
  throw std::logic_error("unreachable");
}

double trunk_accel_deg_s2(const SubjectParams& s, double t) {
  const auto [phase, tau, dur] = locate(s, t);
  switch (phase) {
    case Phase::stand:
    case Phase::stoop: return 0.0;
    case Phase::flex: return s.rom_max_deg * minjerk_dd(tau) / (dur * dur);
    case Phase::extend: return -s.rom_max_deg * minjerk_dd(tau) / (dur * dur);
  }
  throw std::logic_error("unreachable");
}

std::vector<est::SensorFrame> generate_trial(const SubjectParams& subject,
                                             ctrl::WeightClass weight, int trial_index) {
  validate(subject);
  if (trial_index < 0) throw std::invalid_argument("trial_index must be non-negative");
  const double T = subject.cycle_duration_s;
  const double dt = 1.0 / subject.sample_rate_hz;
  const double total = 2 * T + T / 6;

  rng::Engine rng(rng::Engine::derive(
      subject.seed,
      0x7261774cULL + static_cast<std::uint64_t>(trial_index) * 8 + weight_index(weight)));

  // The load is picked up partway through the lifting-cycle stoop and set
  // down partway through the lowering-cycle stoop; both instants jitter
  // around a quarter of the dwell.
  const auto jitter = [&] { return 0.25 + 0.10 * (2.0 * rng.uniform() - 1.0); };
  const double t_pick = T / 2 + jitter() * (T / 6);
  const double t_place = T + T / 2 + jitter() * (T / 6);
  const double gain = subject.fmg_gain[weight_index(weight)];

  std::vector<est::SensorFrame> frames;
  const int n = static_cast<int>(std::lround(total / dt));
  frames.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double t = k * dt;
    const double alpha = trunk_angle_deg(subject, t);
    const double omega = trunk_velocity_deg_s(subject, t);
    const double alpha_dd = trunk_accel_deg_s2(subject, t);
    const double w_rad = omega * kDegToRad;
    const double wd_rad = alpha_dd * kDegToRad;

    est::SensorFrame f;
    f.t_s = t;
    f.alpha_deg = alpha + subject.noise_alpha_deg * rng.normal();
    f.omega_deg_s = omega + subject.noise_omega_deg_s * rng.normal();
    // Trunk-frame specific force: gravity decomposition plus the centripetal
    // and tangential terms of the IMU riding at imu_radius_m from the pivot.
    f.a1_m_s2 = kGravity * std::cos(alpha * kDegToRad) + subject.imu_radius_m * w_rad * w_rad +
                subject.noise_accel_m_s2 * rng.normal();
    f.a2_m_s2 = kGravity * std::sin(alpha * kDegToRad) + subject.imu_radius_m * wd_rad +
                subject.noise_accel_m_s2 * rng.normal();

    const bool held = t >= t_pick && t < t_place;
    for (std::size_t c = 0; c < 6; ++c) {
      const double level = kFsrBaseline[c] + (held ? gain * kFsrCoupling[c] : 0.0);
      f.fsr[c] = level * (1.0 + subject.noise_fsr_rel * rng.normal());
    }

    f.label_state = state_of(locate(subject, t).phase);
    f.label_weight = held ? weight : ctrl::WeightClass::kg0;
    frames.push_back(f);
  }
  return frames;
}

Dataset generate_dataset(const SubjectParams& subject, std::span<const TrialSpec> specs,
                         double train_fraction) {
  validate(subject);
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must lie in (0, 1)");
  }
  for (const auto& spec : specs) {
    if (spec.n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  }

  std::vector<Cycle> cycles;
  int trial_counter = 0;
  for (const auto& spec : specs) {
    for (int i = 0; i < spec.n_trials; ++i, ++trial_counter) {
      auto frames = generate_trial(subject, spec.weight, trial_counter);
      const double T = subject.cycle_duration_s;
      Cycle lifting{spec.weight, CycleKind::lifting, trial_counter, {}};
      Cycle lowering{spec.weight, CycleKind::lowering, trial_counter, {}};
      for (auto& f : frames) {
        (f.t_s < T ? lifting : lowering).frames.push_back(f);
      }
      // Re-zero each cycle so it stands alone as a trace.
      for (auto* c : {&lifting, &lowering}) {
        const double t0 = c->frames.front().t_s;
        for (auto& f : c->frames) f.t_s -= t0;
      }
      cycles.push_back(std::move(lifting));
      cycles.push_back(std::move(lowering));
    }
  }

  rng::Engine rng(rng::Engine::derive(subject.seed, 0x5EEDULL));
  Dataset out;
  // Stratify by (weight, cycle kind) so both splits keep class balance.
  for (auto weight : {ctrl::WeightClass::kg0, ctrl::WeightClass::kg7_5, ctrl::WeightClass::kg15}) {
    for (auto kind : {CycleKind::lifting, CycleKind::lowering}) {
      std::vector<std::size_t> stratum;
      for (std::size_t i = 0; i < cycles.size(); ++i) {
        if (cycles[i].weight == weight && cycles[i].kind == kind) stratum.push_back(i);
      }
      if (stratum.empty()) continue;
      rng.shuffle(stratum);
      const auto n_train = static_cast<std::size_t>(
          std::lround(train_fraction * static_cast<double>(stratum.size())));
      for (std::size_t i = 0; i < stratum.size(); ++i) {
        (i < n_train ? out.train : out.test).push_back(std::move(cycles[stratum[i]]));
      }
    }
  }
  rng.shuffle(out.train);
  rng.shuffle(out.test);
  return out;
}

namespace {

const std::vector<std::string> kBareHeader = {"t",  "alpha", "omega", "a1", "a2", "f1",
                                              "f2", "f3",    "f4",    "f5", "f6"};
const std::vector<std::string> kLabeledHeader = [] {
  auto h = kBareHeader;
  h.push_back("label_state");
  h.push_back("label_weight");
  return h;
}();

}  // namespace

void write_trace(const std::filesystem::path& path, std::span<const est::SensorFrame> frames) {
  if (frames.empty()) throw std::invalid_argument("refusing to write an empty trace");
  const bool labeled = frames.front().label_state.has_value();
  for (const auto& f : frames) {
    if (f.label_state.has_value() != labeled || f.label_weight.has_value() != labeled) {
      throw std::invalid_argument("trace mixes labeled and unlabeled frames");
    }
  }

  std::vector<std::vector<std::string>> rows;
  rows.reserve(frames.size());
  for (const auto& f : frames) {
    std::vector<std::string> row = {csv::format_double(f.t_s),
                                    csv::format_double(f.alpha_deg),
                                    csv::format_double(f.omega_deg_s),
                                    csv::format_double(f.a1_m_s2),
                                    csv::format_double(f.a2_m_s2)};
    for (double v : f.fsr) row.push_back(csv::format_double(v));
    if (labeled) {
      row.emplace_back(ctrl::to_string(*f.label_state));
      row.emplace_back(ctrl::to_string(*f.label_weight));
    }
    rows.push_back(std::move(row));
  }
  csv::write_file(path, labeled ? kLabeledHeader : kBareHeader, rows);
}

std::vector<est::SensorFrame> read_trace(const std::filesystem::path& path) {
  const csv::Table table = csv::read_file(path);
  const bool labeled = table.header.size() == kLabeledHeader.size();
  const auto& expected = labeled ? kLabeledHeader : kBareHeader;
  if (table.header.size() != expected.size()) {
    throw IoError(path.string() + ": expected " + std::to_string(kBareHeader.size()) + " or " +
                  std::to_string(kLabeledHeader.size()) + " columns, got " +
                  std::to_string(table.header.size()));
  }
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (table.header[i] != expected[i]) {
      throw IoError(path.string() + ": header column " + std::to_string(i + 1) + " is '" +
                    table.header[i] + "', expected '" + expected[i] + "'");
    }
  }

  std::vector<est::SensorFrame> frames;
  frames.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    est::SensorFrame f;
    f.t_s = csv::to_double(row, 0, "t");
    f.alpha_deg = csv::to_double(row, 1, "alpha");
    f.omega_deg_s = csv::to_double(row, 2, "omega");
    f.a1_m_s2 = csv::to_double(row, 3, "a1");
    f.a2_m_s2 = csv::to_double(row, 4, "a2");
    for (int c = 0; c < 6; ++c) {
      f.fsr[static_cast<std::size_t>(c)] = csv::to_double(row, 5 + c, kBareHeader[5 + static_cast<std::size_t>(c)]);
    }
    if (labeled) {
      const auto state = ctrl::trunk_state_from(row.fields[11]);
      const auto weight = ctrl::weight_class_from(row.fields[12]);
      if (!state || !weight) {
        throw IoError(path.string() + ":" + std::to_string(row.line) + ": unknown label '" +
                      (state ? row.fields[12] : row.fields[11]) + "'");
      }
      f.label_state = *state;
      f.label_weight = *weight;
    }
    if (!frames.empty() && f.t_s <= frames.back().t_s) {
      throw IoError(path.string() + ":" + std::to_string(row.line) +
                    ": timestamps must be strictly increasing");
    }
    frames.push_back(f);
  }
  return frames;
}

WindowSet windowed_features(std::span<const Cycle> cycles, est::FeatureMode mode, int stride,
                            int lookahead) {
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  if (lookahead < 0) throw std::invalid_argument("lookahead must be >= 0");
  WindowSet out;
  for (const auto& cycle : cycles) {
    const auto& fr = cycle.frames;
    if (fr.size() < static_cast<std::size_t>(est::kWindowSamples)) continue;
    for (std::size_t end = static_cast<std::size_t>(est::kWindowSamples) - 1; end < fr.size();
         end += static_cast<std::size_t>(stride)) {
      const auto window = std::span(fr).subspan(end + 1 - static_cast<std::size_t>(est::kWindowSamples),
                                                static_cast<std::size_t>(est::kWindowSamples));
      const auto& last = fr[std::min(end + static_cast<std::size_t>(lookahead), fr.size() - 1)];
      int label;
      if (mode == est::FeatureMode::state) {
        if (!last.label_state) throw std::invalid_argument("frame lacks a state label");
        label = static_cast<int>(*last.label_state);
      } else {
        if (!last.label_weight) throw std::invalid_argument("frame lacks a weight label");
        label = static_cast<int>(*last.label_weight);
      }
      out.features.push_back(est::extract_features(window, mode));
      out.labels.push_back(label);
    }
  }
  return out;
}

std::vector<std::string> state_class_names() {
  return {"standing", "flexing", "stooped", "extending"};
}

std::vector<std::string> weight_class_names() { return {"kg0", "kg7.5", "kg15"}; }

std::string_view to_string(CycleKind kind) {
  return kind == CycleKind::lifting ? "lifting" : "lowering";
}

}  // namespace vebs::synth
