#include "vebs/liftopt.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "vebs/csv.hpp"
#include "vebs/errors.hpp"
#include "vebs/qp.hpp"

namespace vebs::lift {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void validate_frame(const LiftFrame& frame, std::span<const MuscleDef> muscles,
                    const std::optional<PathActuatorDef>& device) {
  const std::size_t joints = frame.tau_nm.size();
  if (joints == 0) throw std::invalid_argument("frame has no joints");
  if (frame.r_muscle_m.size() != muscles.size()) {
    throw std::invalid_argument("moment-arm rows do not match muscle count");
  }
  for (const auto& row : frame.r_muscle_m) {
    if (row.size() != joints) throw std::invalid_argument("moment-arm row has wrong joint count");
  }
  if (device && frame.r_device_m.size() != joints) {
    throw std::invalid_argument("device moment arms do not match joint count");
  }
  if (!frame.lnorm.empty() && frame.lnorm.size() != muscles.size()) {
    throw std::invalid_argument("lnorm size does not match muscle count");
  }
  if (!frame.vnorm.empty() && frame.vnorm.size() != muscles.size()) {
    throw std::invalid_argument("vnorm size does not match muscle count");
  }
  for (const auto& m : muscles) {
    if (!(m.f0_n > 0)) throw std::invalid_argument("muscle " + m.name + ": f0 must be positive");
    if (!(m.a_min <= m.a_max)) {
      throw std::invalid_argument("muscle " + m.name + ": empty activation range");
    }
  }
  if (device && !(device->a_path_min <= device->a_path_max)) {
    throw std::invalid_argument("empty a_path range");
  }
}

}  // namespace

FlvFn flv_scaler(FlvKind kind, const FlvParams& params) {
  if (kind == FlvKind::constant_one) {
    return [](double, double) { return 1.0; };
  }
  if (!(params.width > 0) || !(params.vmax > 0)) {
    throw std::invalid_argument("flv params must be positive");
  }
  const double w = params.width, vmax = params.vmax;
  return [w, vmax](double lnorm, double vnorm) {
    const double dl = (lnorm - 1.0) / w;
    const double fl = std::exp(-dl * dl);
    const double fv = std::clamp(1.0 - vnorm / vmax, 0.0, 1.4);
    return fl * fv;
  };
}

FrameSolution solve_frame(const LiftFrame& frame, std::span<const MuscleDef> muscles,
                          const std::optional<PathActuatorDef>& device) {
  validate_frame(frame, muscles, device);
  const int joints = static_cast<int>(frame.tau_nm.size());
  const int n_muscles = static_cast<int>(muscles.size());
  const int n = n_muscles + (device ? 1 : 0);
  if (n == 0) throw std::invalid_argument("no muscles and no device");

  const double stretch =
      device ? std::max(frame.device_length_m - frame.device_rest_length_m, 0.0) : 0.0;
  const double f_passive = device ? device->k_base_n_m * stretch : 0.0;

  qp::Problem p;
  p.n = n;
  p.m = joints;
  p.a.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(joints), 0.0);
  p.b.resize(static_cast<std::size_t>(joints));
  p.lower.resize(static_cast<std::size_t>(n));
  p.upper.resize(static_cast<std::size_t>(n));

  std::vector<double> gain(static_cast<std::size_t>(n_muscles));
  for (int m = 0; m < n_muscles; ++m) {
    const auto& muscle = muscles[static_cast<std::size_t>(m)];
    const double lnorm = frame.lnorm.empty() ? 1.0 : frame.lnorm[static_cast<std::size_t>(m)];
    const double vnorm = frame.vnorm.empty() ? 0.0 : frame.vnorm[static_cast<std::size_t>(m)];
    const double f = muscle.flv ? muscle.flv(lnorm, vnorm) : 1.0;
    if (!(f >= 0) || !(f <= 1.4 + 1e-12)) {
      throw std::invalid_argument("muscle " + muscle.name + ": flv scaler out of [0, 1.4]");
    }
    gain[static_cast<std::size_t>(m)] = f * muscle.f0_n;
    p.lower[static_cast<std::size_t>(m)] = muscle.a_min;
    p.upper[static_cast<std::size_t>(m)] = muscle.a_max;
  }
  if (device) {
    p.lower[static_cast<std::size_t>(n_muscles)] = device->a_path_min;
    p.upper[static_cast<std::size_t>(n_muscles)] = device->a_path_max;
  }

  for (int j = 0; j < joints; ++j) {
    double rhs = frame.tau_nm[static_cast<std::size_t>(j)];
    for (int m = 0; m < n_muscles; ++m) {
      p.a[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) + static_cast<std::size_t>(m)] =
          gain[static_cast<std::size_t>(m)] *
          frame.r_muscle_m[static_cast<std::size_t>(m)][static_cast<std::size_t>(j)];
    }
    if (device) {
      const double r_dev = frame.r_device_m[static_cast<std::size_t>(j)];
      p.a[static_cast<std::size_t>(j) * static_cast<std::size_t>(n) +
          static_cast<std::size_t>(n_muscles)] = r_dev * device->f_path_max_n;
      rhs -= r_dev * f_passive;
    }
    p.b[static_cast<std::size_t>(j)] = rhs;
  }

  const qp::Solution sol = qp::solve(p);
  if (!sol.feasible) {
    std::ostringstream msg;
    msg << "equilibrium infeasible at t=" << frame.t_s << " s;";
    for (int j = 0; j < joints; ++j) {
      msg << " joint " << j << ": required " << frame.tau_nm[static_cast<std::size_t>(j)]
          << " Nm, achievable ["
          << sol.achievable_lo[static_cast<std::size_t>(j)] +
                 (device ? frame.r_device_m[static_cast<std::size_t>(j)] * f_passive : 0.0)
          << ", "
          << sol.achievable_hi[static_cast<std::size_t>(j)] +
                 (device ? frame.r_device_m[static_cast<std::size_t>(j)] * f_passive : 0.0)
          << "] Nm;";
    }
    throw NoSolutionError(msg.str());
  }

  FrameSolution out;
  out.activations.assign(sol.x.begin(), sol.x.begin() + n_muscles);
  out.a_path = device ? sol.x[static_cast<std::size_t>(n_muscles)] : 0.0;
  out.f_passive_n = f_passive;
  out.f_active_n = device ? out.a_path * device->f_path_max_n : 0.0;
  out.f_device_n = out.f_passive_n + out.f_active_n;
  out.objective = sol.objective;
  out.residual_nm = sol.residual_inf;
  out.eq_multipliers = sol.eq_multipliers;
  return out;
}

TrialProfile solve_trial(std::span<const LiftFrame> frames, std::span<const MuscleDef> muscles,
                         const std::optional<PathActuatorDef>& device, TrialPhase phase,
                         int grid_points) {
  if (grid_points < 2) throw std::invalid_argument("grid_points must be >= 2");
  constexpr double kRateEps = 1e-9;
  std::vector<const LiftFrame*> selected;
  double rom = 0;
  for (const auto& f : frames) {
    rom = std::max(rom, f.trunk_angle_deg);
    const bool flexing = f.trunk_rate_deg_s > kRateEps;
    const bool extending = f.trunk_rate_deg_s < -kRateEps;
    if ((phase == TrialPhase::lowering && flexing) ||
        (phase == TrialPhase::lifting && extending)) {
      selected.push_back(&f);
    }
  }
  if (selected.empty()) {
    throw std::invalid_argument("trial has no frames in the requested phase");
  }
  if (!(rom > 0)) throw std::invalid_argument("trial never leaves the upright posture");

  struct Sample {
    double percent, total, passive, active;
  };
  std::vector<Sample> samples;
  samples.reserve(selected.size());
  for (const auto* f : selected) {
    const FrameSolution s = solve_frame(*f, muscles, device);
    samples.push_back(
        {100.0 * f->trunk_angle_deg / rom, s.f_device_n, s.f_passive_n, s.f_active_n});
  }
  std::sort(samples.begin(), samples.end(),
            [](const Sample& a, const Sample& b) { return a.percent < b.percent; });

  TrialProfile out;
  out.phase = phase;
  out.percent_rom.resize(static_cast<std::size_t>(grid_points));
  out.f_total_n.resize(static_cast<std::size_t>(grid_points));
  out.f_passive_n.resize(static_cast<std::size_t>(grid_points));
  out.f_active_n.resize(static_cast<std::size_t>(grid_points));
  for (int i = 0; i < grid_points; ++i) {
    const double pct = 100.0 * i / (grid_points - 1);
    out.percent_rom[static_cast<std::size_t>(i)] = pct;
    // Clamped linear interpolation over the solved samples.
    if (pct <= samples.front().percent) {
      out.f_total_n[static_cast<std::size_t>(i)] = samples.front().total;
      out.f_passive_n[static_cast<std::size_t>(i)] = samples.front().passive;
      out.f_active_n[static_cast<std::size_t>(i)] = samples.front().active;
      continue;
    }
    if (pct >= samples.back().percent) {
      out.f_total_n[static_cast<std::size_t>(i)] = samples.back().total;
      out.f_passive_n[static_cast<std::size_t>(i)] = samples.back().passive;
      out.f_active_n[static_cast<std::size_t>(i)] = samples.back().active;
      continue;
    }
    const auto hi = std::lower_bound(
        samples.begin(), samples.end(), pct,
        [](const Sample& s, double value) { return s.percent < value; });
    const auto lo = hi - 1;
    const double span = hi->percent - lo->percent;
    const double w = span > 0 ? (pct - lo->percent) / span : 0.0;
    out.f_total_n[static_cast<std::size_t>(i)] = lo->total + w * (hi->total - lo->total);
    out.f_passive_n[static_cast<std::size_t>(i)] = lo->passive + w * (hi->passive - lo->passive);
    out.f_active_n[static_cast<std::size_t>(i)] = lo->active + w * (hi->active - lo->active);
  }
  return out;
}

namespace {

double minjerk(double tau) { return tau * tau * tau * (10 + tau * (-15 + 6 * tau)); }
double minjerk_d(double tau) { return tau * tau * (30 + tau * (-60 + 30 * tau)); }

}  // namespace

SurrogateTrial make_surrogate_trial(const SurrogateParams& p) {
  if (!(p.rom_max_deg > 0) || !(p.duration_s > 0) || !(p.dt_s > 0) || !(p.wrap_radius_m > 0)) {
    throw std::invalid_argument("surrogate parameters must be positive");
  }
  SurrogateTrial trial;
  trial.muscles = {
      MuscleDef{"extensor_deep", 2200, 0.01, 1.0, {}},
      MuscleDef{"extensor_superficial", 2800, 0.01, 1.0, {}},
      MuscleDef{"flexor_abdominal", 1500, 0.01, 1.0, {}},
  };
  const std::vector<double> moment_arms = {0.050, 0.065, -0.045};

  constexpr double kGravity = 9.80665;
  const double torque_gain =
      (p.trunk_mass_kg * p.trunk_com_m + p.load_mass_kg * p.load_lever_m) * kGravity;
  const double half = p.duration_s / 2;
  const int n = static_cast<int>(std::lround(p.duration_s / p.dt_s)) + 1;
  for (int i = 0; i < n; ++i) {
    const double t = i * p.dt_s;
    double alpha, rate;
    if (t <= half) {
      const double tau = t / half;
      alpha = p.rom_max_deg * minjerk(tau);
      rate = p.rom_max_deg * minjerk_d(tau) / half;
    } else {
      const double tau = std::min((t - half) / half, 1.0);
      alpha = p.rom_max_deg * (1.0 - minjerk(tau));
      rate = -p.rom_max_deg * minjerk_d(tau) / half;
    }
    LiftFrame f;
    f.t_s = t;
    f.trunk_angle_deg = alpha;
    f.trunk_rate_deg_s = rate;
    f.tau_nm = {torque_gain * std::sin(alpha * kDegToRad)};
    f.r_muscle_m = {{moment_arms[0]}, {moment_arms[1]}, {moment_arms[2]}};
    f.r_device_m = {p.wrap_radius_m};
    f.device_rest_length_m = p.rest_length_m;
    f.device_length_m = p.rest_length_m + p.wrap_radius_m * alpha * kDegToRad;
    trial.frames.push_back(std::move(f));
  }
  return trial;
}

std::vector<LiftFrame> read_lift_trial(const std::filesystem::path& path,
                                       std::vector<std::string>& muscle_names_out,
                                       double rest_length_m) {
  const csv::Table table = csv::read_file(path);
  const auto& h = table.header;
  if (h.size() < 4 || h[0] != "t" || h[1] != "trunk_angle_deg" || h[2] != "L_m") {
    throw IoError(path.string() + ": header must start with t,trunk_angle_deg,L_m");
  }

  std::vector<std::string> joints;
  struct MuscleCol {
    std::string muscle, joint;
    int col;
  };
  std::vector<MuscleCol> muscle_cols;
  std::vector<std::pair<std::string, int>> device_cols;  // joint, column
  std::vector<std::pair<std::string, int>> tau_cols;

  for (std::size_t c = 3; c < h.size(); ++c) {
    const std::string& name = h[c];
    if (name.starts_with("tau_")) {
      tau_cols.emplace_back(name.substr(4), static_cast<int>(c));
      joints.push_back(name.substr(4));
    } else if (name.starts_with("r_device_")) {
      device_cols.emplace_back(name.substr(9), static_cast<int>(c));
    } else if (name.starts_with("r_")) {
      const auto cut = name.rfind('_');
      if (cut <= 2 || cut == name.size() - 1) {
        throw IoError(path.string() + ": malformed moment-arm column '" + name + "'");
      }
      muscle_cols.push_back({name.substr(2, cut - 2), name.substr(cut + 1),
                             static_cast<int>(c)});
    } else {
      throw IoError(path.string() + ": unknown column '" + name + "'");
    }
  }
  if (joints.empty()) throw IoError(path.string() + ": no tau_<joint> columns");

  muscle_names_out.clear();
  for (const auto& mc : muscle_cols) {
    if (std::find(muscle_names_out.begin(), muscle_names_out.end(), mc.muscle) ==
        muscle_names_out.end()) {
      muscle_names_out.push_back(mc.muscle);
    }
  }
  const auto joint_index = [&](const std::string& joint) {
    const auto it = std::find(joints.begin(), joints.end(), joint);
    if (it == joints.end()) {
      throw IoError(path.string() + ": column references unknown joint '" + joint + "'");
    }
    return static_cast<std::size_t>(it - joints.begin());
  };

  // Column lookup tables: [muscle][joint] and [joint].
  std::vector<std::vector<int>> muscle_lookup(
      muscle_names_out.size(), std::vector<int>(joints.size(), -1));
  for (const auto& mc : muscle_cols) {
    const auto mi = static_cast<std::size_t>(
        std::find(muscle_names_out.begin(), muscle_names_out.end(), mc.muscle) -
        muscle_names_out.begin());
    muscle_lookup[mi][joint_index(mc.joint)] = mc.col;
  }
  std::vector<int> device_lookup(joints.size(), -1);
  for (const auto& [joint, col] : device_cols) device_lookup[joint_index(joint)] = col;
  for (std::size_t mi = 0; mi < muscle_lookup.size(); ++mi) {
    for (std::size_t j = 0; j < joints.size(); ++j) {
      if (muscle_lookup[mi][j] < 0) {
        throw IoError(path.string() + ": missing column r_" + muscle_names_out[mi] + "_" +
                      joints[j]);
      }
    }
  }
  const bool has_device = !device_cols.empty();
  if (has_device) {
    for (std::size_t j = 0; j < joints.size(); ++j) {
      if (device_lookup[j] < 0) {
        throw IoError(path.string() + ": missing column r_device_" + joints[j]);
      }
    }
  }

  std::vector<LiftFrame> frames;
  frames.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    LiftFrame f;
    f.t_s = csv::to_double(row, 0, "t");
    f.trunk_angle_deg = csv::to_double(row, 1, "trunk_angle_deg");
    f.device_length_m = csv::to_double(row, 2, "L_m");
    f.device_rest_length_m = rest_length_m;
    for (const auto& [joint, col] : tau_cols) {
      f.tau_nm.push_back(csv::to_double(row, col, "tau_" + joint));
    }
    for (std::size_t mi = 0; mi < muscle_lookup.size(); ++mi) {
      std::vector<double> arms;
      for (std::size_t j = 0; j < joints.size(); ++j) {
        arms.push_back(csv::to_double(row, muscle_lookup[mi][j], h[static_cast<std::size_t>(
                                                                     muscle_lookup[mi][j])]));
      }
      f.r_muscle_m.push_back(std::move(arms));
    }
    if (has_device) {
      for (std::size_t j = 0; j < joints.size(); ++j) {
        f.r_device_m.push_back(
            csv::to_double(row, device_lookup[j], h[static_cast<std::size_t>(device_lookup[j])]));
      }
    }
    if (!frames.empty() && f.t_s <= frames.back().t_s) {
      throw IoError(path.string() + ":" + std::to_string(row.line) +
                    ": timestamps must be strictly increasing");
    }
    frames.push_back(std::move(f));
  }

  // Trunk rate by central differences (one-sided at the ends).
  const std::size_t nf = frames.size();
  for (std::size_t i = 0; i < nf; ++i) {
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 < nf ? i + 1 : i;
    if (b > a) {
      frames[i].trunk_rate_deg_s =
          (frames[b].trunk_angle_deg - frames[a].trunk_angle_deg) / (frames[b].t_s - frames[a].t_s);
    }
  }
  return frames;
}

void write_profile(const std::filesystem::path& path, const TrialProfile& profile) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(profile.percent_rom.size());
  for (std::size_t i = 0; i < profile.percent_rom.size(); ++i) {
    rows.push_back({csv::format_double(profile.percent_rom[i]),
                    csv::format_double(profile.f_total_n[i]),
                    csv::format_double(profile.f_passive_n[i]),
                    csv::format_double(profile.f_active_n[i])});
  }
  csv::write_file(path, {"percent_rom", "F_total_N", "F_passive_N", "F_active_N"}, rows);
}

}  // namespace vebs::lift
