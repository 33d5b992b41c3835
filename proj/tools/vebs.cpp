// vebs: command-line surface for the variable-elastic back-support core.
//
// Every subcommand reads a plain-text key=value config (--config), applies
// --set overrides and named flags, materializes the documented defaults for
// everything left unset, and writes its outputs plus a manifest.cfg into the
// results directory. Re-running the same subcommand with --config manifest.cfg
// reproduces the run bit for bit.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vebs/band.hpp"
#include "vebs/config.hpp"
#include "vebs/controller.hpp"
#include "vebs/csv.hpp"
#include "vebs/errors.hpp"
#include "vebs/estimator.hpp"
#include "vebs/forest.hpp"
#include "vebs/liftopt.hpp"
#include "vebs/pneumo.hpp"
#include "vebs/replay.hpp"
#include "vebs/synth.hpp"
#include "vebs/units.hpp"
#include "vebs/vea.hpp"

#ifndef VEBS_VERSION
#define VEBS_VERSION "dev"
#endif

namespace fs = std::filesystem;
using namespace vebs;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;       // --set key=value, applied in order
  std::vector<std::string> flag_sets;  // named flags, applied after --set
  std::string out_dir;
  bool print_schema = false;
};

/// Schema entries paired with their default values; the default is appended
/// to the doc line so --schema and docs show it.
struct SchemaDef {
  std::vector<config::KeySpec> specs;
  std::vector<std::string> defaults;

  void add(const std::string& key, config::ValueType type, const std::string& def,
           const std::string& doc) {
    specs.push_back({key, type, doc + " (default: " + (def.empty() ? "empty" : def) + ")"});
    defaults.push_back(def);
  }
  void merge(const SchemaDef& other) {
    specs.insert(specs.end(), other.specs.begin(), other.specs.end());
    defaults.insert(defaults.end(), other.defaults.begin(), other.defaults.end());
  }
};

/// File -> --set -> flags, then fill every unset key with its default so the
/// rendered manifest lists the full effective configuration.
config::Config make_config(const CommonArgs& args, const SchemaDef& sd) {
  config::Config cfg = args.config_path.empty()
                           ? config::Config::parse_text("", "<defaults>", sd.specs)
                           : config::Config::parse_file(args.config_path, sd.specs);
  for (const auto& s : args.sets) cfg.set(s);
  for (const auto& s : args.flag_sets) cfg.set(s);
  for (std::size_t i = 0; i < sd.specs.size(); ++i) {
    if (!cfg.has(sd.specs[i].key)) cfg.set(sd.specs[i].key + "=" + sd.defaults[i]);
  }
  return cfg;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  if (!out) throw IoError("write failed on " + path.string());
}

fs::path prepare_out(const CommonArgs& args, const std::string& sub) {
  const fs::path out = args.out_dir.empty() ? fs::path("runs") / sub : fs::path(args.out_dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create results directory " + out.string() + ": " + ec.message());
  return out;
}

void write_manifest(const fs::path& out, const std::string& sub, const config::Config& cfg) {
  std::string text = "# vebs " VEBS_VERSION " run manifest\n";
  text += "# subcommand: " + sub + "\n";
  text += "# re-run: vebs " + sub + " --config manifest.cfg --out <dir>\n";
  text += cfg.render();
  write_text(out / "manifest.cfg", text);
}

std::string fmt(double v) { return csv::format_double(v); }

// ---------------------------------------------------------------------------
// Shared schema fragments and their decoders.

SchemaDef device_schema() {
  using config::ValueType;
  SchemaDef d;
  d.add("k_disengaged_n_mm", ValueType::real, "0.875", "band stiffness, clutch released");
  d.add("k_engaged_n_mm", ValueType::real, "1.313", "band stiffness, clutch engaged");
  d.add("clutch_latency_s", ValueType::real, "0.3", "clutch command-to-grip delay");
  d.add("loss_factor", ValueType::real, "0",
        "fraction of band force lost on the unloading branch");
  d.add("surface_a", ValueType::real, "-1.4318", "active-force surface: constant term, N");
  d.add("surface_b", ValueType::real, "1.2213", "active-force surface: elongation term, N/mm");
  d.add("surface_c", ValueType::real, "0.01", "active-force surface: pressure term, N/psi");
  d.add("surface_d", ValueType::real, "0.0076", "active-force surface: elongation^2 term");
  d.add("surface_e", ValueType::real, "0.0022", "active-force surface: pressure^2 term");
  d.add("surface_f", ValueType::real, "-0.0348",
        "active-force surface: elongation*pressure term");
  d.add("ipam_radius_mm", ValueType::real, "6.25", "IPAM tube radius");
  d.add("ipam_rest_length_mm", ValueType::real, "200", "IPAM rest length");
  d.add("deflate_cd", ValueType::real, "0.8", "release-path discharge coefficient");
  d.add("deflate_area_mm2", ValueType::real, "1.058386734769", "release-path orifice area");
  d.add("inflate_cd", ValueType::real, "0.8", "inflate-path discharge coefficient");
  d.add("inflate_area_mm2", ValueType::real, "1.058386734769", "inflate-path orifice area");
  d.add("gas_gamma", ValueType::real, "1.4", "ratio of specific heats");
  d.add("gas_r_j_kg_k", ValueType::real, "287.05", "specific gas constant");
  d.add("gas_temp_k", ValueType::real, "293.15", "isothermal gas temperature");
  d.add("p_atm_kpa", ValueType::real, "101.325", "ambient absolute pressure");
  d.add("reservoir_cc", ValueType::real, "346.59", "reservoir volume");
  d.add("reservoir_setpoint_psig", ValueType::real, "90", "pump setpoint for the reservoir");
  return d;
}

vea::DeviceParams device_from(const config::Config& c) {
  vea::DeviceParams dev = vea::default_device();
  dev.band =
      band::model_from_stiffness_targets(c.real("k_disengaged_n_mm", 0), c.real("k_engaged_n_mm", 0));
  dev.band.clutch_latency_s = c.real("clutch_latency_s", 0);
  dev.band.loss_factor = c.real("loss_factor", 0);
  dev.surface = {c.real("surface_a", 0), c.real("surface_b", 0), c.real("surface_c", 0),
                 c.real("surface_d", 0), c.real("surface_e", 0), c.real("surface_f", 0)};
  dev.ipam.radius_m = units::mm_to_m(c.real("ipam_radius_mm", 0));
  dev.ipam.rest_length_m = units::mm_to_m(c.real("ipam_rest_length_mm", 0));
  dev.deflate_path = {c.real("deflate_cd", 0), c.real("deflate_area_mm2", 0) * 1e-6};
  dev.inflate_path = {c.real("inflate_cd", 0), c.real("inflate_area_mm2", 0) * 1e-6};
  dev.gas.gamma = c.real("gas_gamma", 0);
  dev.gas.R = c.real("gas_r_j_kg_k", 0);
  dev.gas.T = c.real("gas_temp_k", 0);
  dev.gas.p_atm = c.real("p_atm_kpa", 0) * 1e3;
  dev.reservoir_volume_m3 = c.real("reservoir_cc", 0) * 1e-6;
  dev.reservoir_setpoint_psig = c.real("reservoir_setpoint_psig", 0);
  return dev;
}

SchemaDef subject_schema() {
  using config::ValueType;
  SchemaDef d;
  d.add("rom_max_deg", ValueType::real, "90", "stooped trunk angle / range-of-motion maximum");
  d.add("cycle_duration_s", ValueType::real, "3", "one flexion-extension cycle");
  d.add("sample_rate_hz", ValueType::real, "100", "sensor sample rate");
  d.add("imu_radius_m", ValueType::real, "0.4", "IMU distance from the lumbar pivot");
  d.add("fmg_gain_kg7_5", ValueType::real, "10", "forearm-sensor step gain for the 7.5 kg load");
  d.add("fmg_gain_kg15", ValueType::real, "20", "forearm-sensor step gain for the 15 kg load");
  d.add("noise_alpha_deg", ValueType::real, "0.5", "trunk-angle noise, std dev");
  d.add("noise_omega_deg_s", ValueType::real, "1", "trunk-velocity noise, std dev");
  d.add("noise_accel_m_s2", ValueType::real, "0.05", "accelerometer noise, std dev");
  d.add("noise_fsr_rel", ValueType::real, "0.02", "relative forearm-sensor noise");
  d.add("seed", ValueType::integer, "42", "generator seed");
  return d;
}

synth::SubjectParams subject_from(const config::Config& c) {
  synth::SubjectParams s;
  s.rom_max_deg = c.real("rom_max_deg", 0);
  s.cycle_duration_s = c.real("cycle_duration_s", 0);
  s.sample_rate_hz = c.real("sample_rate_hz", 0);
  s.imu_radius_m = c.real("imu_radius_m", 0);
  s.fmg_gain[1] = c.real("fmg_gain_kg7_5", 0);
  s.fmg_gain[2] = c.real("fmg_gain_kg15", 0);
  s.noise_alpha_deg = c.real("noise_alpha_deg", 0);
  s.noise_omega_deg_s = c.real("noise_omega_deg_s", 0);
  s.noise_accel_m_s2 = c.real("noise_accel_m_s2", 0);
  s.noise_fsr_rel = c.real("noise_fsr_rel", 0);
  s.seed = static_cast<std::uint64_t>(c.integer("seed", 0));
  return s;
}

SchemaDef training_schema() {
  using config::ValueType;
  SchemaDef d;
  d.add("data_dir", ValueType::text, "",
        "dataset directory from `vebs synth`; empty = generate in-process");
  d.add("trials_per_weight", ValueType::integer, "10", "synthetic trials per weight class");
  d.add("train_fraction", ValueType::real, "0.7", "stratified train split fraction");
  d.add("stride", ValueType::integer, "2", "training-window subsampling stride");
  d.add("lookahead", ValueType::integer, "10",
        "label lookahead in frames; matching the dwell length cancels the filter lag");
  d.add("n_trees", ValueType::integer, "100", "trees per forest");
  d.add("max_depth", ValueType::integer, "12", "tree depth limit");
  d.add("min_leaf", ValueType::integer, "2", "minimum samples per leaf");
  d.add("features_per_split", ValueType::integer, "0", "split candidates; 0 = sqrt(d)");
  d.add("forest_seed", ValueType::integer, "42", "forest bootstrap/split seed");
  return d;
}

est::ForestParams forest_from(const config::Config& c) {
  est::ForestParams p;
  p.n_trees = static_cast<int>(c.integer("n_trees", 0));
  p.max_depth = static_cast<int>(c.integer("max_depth", 0));
  p.min_leaf = static_cast<int>(c.integer("min_leaf", 0));
  p.features_per_split = static_cast<int>(c.integer("features_per_split", 0));
  p.seed = static_cast<std::uint64_t>(c.integer("forest_seed", 0));
  return p;
}

ctrl::WeightClass parse_weight(const std::string& token) {
  const auto w = ctrl::weight_class_from(token);
  if (!w) throw ConfigError("unknown weight class '" + token + "' (kg0 | kg7.5 | kg15)");
  return *w;
}

// ---------------------------------------------------------------------------
// Dataset directory layout shared by synth and train: one trace CSV per cycle
// plus an index.csv naming file, weight, kind, and trial.

void write_split(const fs::path& dir, std::span<const synth::Cycle> cycles) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::vector<std::vector<std::string>> index;
  index.reserve(cycles.size());
  for (std::size_t i = 0; i < cycles.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "cycle_%03zu.csv", i);
    synth::write_trace(dir / name, cycles[i].frames);
    index.push_back({name, ctrl::to_string(cycles[i].weight),
                     std::string(synth::to_string(cycles[i].kind)),
                     std::to_string(cycles[i].trial_index),
                     std::to_string(cycles[i].frames.size())});
  }
  csv::write_file(dir / "index.csv", {"file", "weight", "kind", "trial", "frames"}, index);
}

std::vector<synth::Cycle> load_split(const fs::path& dir) {
  const csv::Table index = csv::read_file(dir / "index.csv");
  const int cf = index.column("file"), cw = index.column("weight");
  const int ck = index.column("kind"), ct = index.column("trial");
  if (cf < 0 || cw < 0 || ck < 0 || ct < 0) {
    throw IoError(dir.string() + "/index.csv: need columns file, weight, kind, trial");
  }
  std::vector<synth::Cycle> cycles;
  cycles.reserve(index.rows.size());
  for (const auto& row : index.rows) {
    synth::Cycle c;
    c.weight = parse_weight(row.fields[static_cast<std::size_t>(cw)]);
    const std::string& kind = row.fields[static_cast<std::size_t>(ck)];
    if (kind == synth::to_string(synth::CycleKind::lifting)) {
      c.kind = synth::CycleKind::lifting;
    } else if (kind == synth::to_string(synth::CycleKind::lowering)) {
      c.kind = synth::CycleKind::lowering;
    } else {
      throw IoError(dir.string() + "/index.csv: unknown cycle kind '" + kind + "'");
    }
    c.trial_index = static_cast<int>(csv::to_double(row, ct, "trial"));
    c.frames = synth::read_trace(dir / row.fields[static_cast<std::size_t>(cf)]);
    cycles.push_back(std::move(c));
  }
  return cycles;
}

std::vector<synth::TrialSpec> trial_specs(const config::Config& cfg) {
  const int n = static_cast<int>(cfg.integer("trials_per_weight", 0));
  return {{ctrl::WeightClass::kg0, n}, {ctrl::WeightClass::kg7_5, n}, {ctrl::WeightClass::kg15, n}};
}

replay::Models train_models(const config::Config& cfg) {
  std::vector<synth::Cycle> train;
  const std::string data_dir = cfg.text("data_dir", "");
  if (!data_dir.empty()) {
    train = load_split(fs::path(data_dir) / "train");
  } else {
    const auto specs = trial_specs(cfg);
    train = synth::generate_dataset(subject_from(cfg), specs, cfg.real("train_fraction", 0)).train;
  }
  const est::ForestParams params = forest_from(cfg);
  const int stride = static_cast<int>(cfg.integer("stride", 0));
  const int lookahead = static_cast<int>(cfg.integer("lookahead", 0));
  replay::Models models;
  const auto ws = synth::windowed_features(train, est::FeatureMode::state, stride, lookahead);
  models.state = est::train_forest(ws.features, ws.labels, synth::state_class_names(), params);
  const auto ww = synth::windowed_features(train, est::FeatureMode::weight, stride, lookahead);
  models.weight = est::train_forest(ww.features, ww.labels, synth::weight_class_names(), params);
  return models;
}

/// Loads models from models_dir, or trains them in-process and saves them
/// next to the run's other outputs so the results directory is complete.
replay::Models ensure_models(const config::Config& cfg, const fs::path& out) {
  const std::string dir = cfg.text("models_dir", "");
  if (!dir.empty()) {
    replay::Models m;
    m.state = est::load_model(fs::path(dir) / "state_model.json");
    m.weight = est::load_model(fs::path(dir) / "weight_model.json");
    return m;
  }
  std::cout << "models_dir empty: training classifiers in-process\n";
  replay::Models m = train_models(cfg);
  est::save_model(m.state, out / "state_model.json");
  est::save_model(m.weight, out / "weight_model.json");
  return m;
}

/// Trace selection shared by classify/replay/energy: a file when `trace` is
/// set, otherwise one fresh synthetic trial.
std::vector<est::SensorFrame> input_trace(const config::Config& cfg) {
  const std::string path = cfg.text("trace", "");
  if (!path.empty()) return synth::read_trace(path);
  return synth::generate_trial(subject_from(cfg), parse_weight(cfg.text("trial_weight", "")),
                               static_cast<int>(cfg.integer("trial_index", 0)));
}

// ---------------------------------------------------------------------------
// Subcommands.

const char* phase_name(vea::BenchPhase p) {
  switch (p) {
    case vea::BenchPhase::loading: return "loading";
    case vea::BenchPhase::hold: return "hold";
    case vea::BenchPhase::unloading: return "unloading";
  }
  return "?";
}

void write_bench_trace(const fs::path& path, std::span<const vea::TracePoint> trace) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(trace.size());
  for (const auto& pt : trace) {
    rows.push_back({fmt(pt.t_s), fmt(pt.elongation_mm), fmt(pt.force_n), fmt(pt.active_n),
                    fmt(pt.passive_n), fmt(pt.p_psig), pt.clutch_engaged ? "1" : "0",
                    phase_name(pt.phase)});
  }
  csv::write_file(path,
                  {"t", "elongation_mm", "F_total_N", "F_active_N", "F_passive_N", "p_psig",
                   "clutch", "phase"},
                  rows);
}

SchemaDef bench_schema() {
  using config::ValueType;
  SchemaDef sd = device_schema();
  sd.add("peak_mm", ValueType::real, "110", "peak elongation of the pull");
  sd.add("rate_mm_per_min", ValueType::real, "60", "loading/unloading rate");
  sd.add("hold_s", ValueType::real, "2", "dwell at the peak");
  sd.add("dt_s", ValueType::real, "0.01", "sample period");
  sd.add("clutch", ValueType::text, "never", "schedule: never | throughout | at-threshold");
  sd.add("engage_at_mm", ValueType::real, "75",
         "loading elongation that commands engagement (at-threshold)");
  sd.add("disengage_at_mm", ValueType::real, "-1",
         "unloading disengage threshold; -1 mirrors engage_at_mm");
  sd.add("pressure_hold_psig", ValueType::real, "-1",
         "constant gauge pressure during the pull; -1 = passive run");
  return sd;
}

void run_bench(const CommonArgs& args) {
  const config::Config cfg = make_config(args, bench_schema());
  vea::QuasiStaticScenario sc;
  sc.peak_mm = cfg.real("peak_mm", 0);
  sc.rate_mm_per_min = cfg.real("rate_mm_per_min", 0);
  sc.hold_s = cfg.real("hold_s", 0);
  sc.dt_s = cfg.real("dt_s", 0);
  const std::string clutch = cfg.text("clutch", "");
  if (clutch == "throughout") {
    sc.clutch_engaged_throughout = true;
  } else if (clutch == "at-threshold") {
    sc.clutch_engage_at_mm = cfg.real("engage_at_mm", 0);
    if (cfg.real("disengage_at_mm", -1) >= 0) {
      sc.clutch_disengage_at_mm = cfg.real("disengage_at_mm", 0);
    }
  } else if (clutch != "never") {
    throw ConfigError("clutch must be never, throughout, or at-threshold; got '" + clutch + "'");
  }
  if (cfg.real("pressure_hold_psig", -1) >= 0) {
    sc.pressure_hold_psig = cfg.real("pressure_hold_psig", 0);
  }

  const auto trace = vea::simulate_quasistatic(device_from(cfg), sc);
  const fs::path out = prepare_out(args, "bench");
  write_bench_trace(out / "trace.csv", trace);
  write_manifest(out, "bench", cfg);

  double peak = 0;
  for (const auto& pt : trace) peak = std::max(peak, pt.force_n);
  std::cout << "bench: " << trace.size() << " samples, peak force " << peak << " N\n"
            << "wrote " << (out / "trace.csv").string() << "\n";
}

SchemaDef dynamic_schema() {
  using config::ValueType;
  SchemaDef sd = device_schema();
  sd.add("peak_mm", ValueType::real, "100", "peak elongation of the pull");
  sd.add("rate_mm_per_min", ValueType::real, "2000", "pull/return rate");
  sd.add("deflate_delay_s", ValueType::real, "0.3", "detection delay before venting starts");
  sd.add("deflate_target_psig", ValueType::real, "0", "vent down to this gauge pressure");
  sd.add("inflate_psig", ValueType::real, "50", "regulated pressure during the pull");
  sd.add("dt_s", ValueType::real, "0.001", "integration step");
  return sd;
}

void run_dynamic(const CommonArgs& args) {
  const config::Config cfg = make_config(args, dynamic_schema());

  vea::DynamicScenario sc;
  sc.peak_mm = cfg.real("peak_mm", 0);
  sc.rate_mm_per_min = cfg.real("rate_mm_per_min", 0);
  sc.deflate_delay_s = cfg.real("deflate_delay_s", 0);
  sc.deflate_target_psig = cfg.real("deflate_target_psig", 0);
  sc.inflate_psig = cfg.real("inflate_psig", 0);
  sc.dt_s = cfg.real("dt_s", 0);

  const vea::DynamicResult res = vea::simulate_dynamic(device_from(cfg), sc);
  const fs::path out = prepare_out(args, "dynamic");
  write_bench_trace(out / "trace.csv", res.trace);
  write_manifest(out, "dynamic", cfg);

  std::cout << "dynamic: return onset " << res.return_onset_s << " s, duration "
            << res.return_duration_s << " s\n"
            << "peak active " << res.peak_active_n << " N at "
            << res.peak_active_percent_of_return << "% of the return; "
            << 100.0 * res.active_fraction_at(0.8) << "% of peak within 800 ms\n"
            << "wrote " << (out / "trace.csv").string() << "\n";
}

SchemaDef deflate_schema() {
  using config::ValueType;
  SchemaDef sd = device_schema();
  sd.add("from_psig", ValueType::real, "50", "initial gauge pressure");
  sd.add("to_psig", ValueType::real, "0", "target gauge pressure");
  sd.add("elongation_mm", ValueType::real, "110", "device elongation held during the vent");
  sd.add("dt_s", ValueType::real, "0.001", "integration step");
  sd.add("timeout_s", ValueType::real, "10", "abort if the target is not reached by then");
  return sd;
}

void run_deflate(const CommonArgs& args) {
  const config::Config cfg = make_config(args, deflate_schema());
  const double from = cfg.real("from_psig", 0), to = cfg.real("to_psig", 0);
  const double el_mm = cfg.real("elongation_mm", 0);
  const double dt = cfg.real("dt_s", 0), timeout = cfg.real("timeout_s", 0);
  if (to < 0 || from <= to) throw ConfigError("need from_psig > to_psig >= 0");

  const vea::DeviceParams dev = device_from(cfg);
  const double el_m = units::mm_to_m(el_mm);
  pneumo::PneumaticState st =
      pneumo::make_state(dev.ipam, el_m, units::psig_to_pa(from, dev.gas.p_atm),
                         units::psig_to_pa(dev.reservoir_setpoint_psig, dev.gas.p_atm), dev.gas);

  std::vector<std::vector<std::string>> rows;
  double t = 0, reached_at = -1;
  while (t <= timeout + 1e-12) {
    const double p_psig = units::pa_to_psig(st.p, dev.gas.p_atm);
    rows.push_back({fmt(t), fmt(p_psig), fmt(vea::active_force(dev.surface, el_mm, p_psig)),
                    fmt(st.m * 1e3)});
    if (p_psig <= to + 1e-9) {
      reached_at = t;
      break;
    }
    st = pneumo::step_deflate(st, dev.ipam, el_m, dev.deflate_path, dev.gas, dt);
    t += dt;
  }
  if (reached_at < 0) {
    throw NoSolutionError("pressure did not reach " + fmt(to) + " psig within " + fmt(timeout) +
                          " s (still " + fmt(units::pa_to_psig(st.p, dev.gas.p_atm)) + " psig)");
  }

  const fs::path out = prepare_out(args, "deflate");
  csv::write_file(out / "deflate.csv", {"t", "p_psig", "F_active_N", "gas_mass_g"}, rows);
  write_manifest(out, "deflate", cfg);
  std::cout << "deflate: " << from << " -> " << to << " psig at " << el_mm << " mm in "
            << reached_at << " s\n"
            << "wrote " << (out / "deflate.csv").string() << "\n";
}

SchemaDef calibrate_schema() {
  using config::ValueType;
  SchemaDef sd = device_schema();
  sd.add("from_psig", ValueType::real, "50", "vent start, gauge");
  sd.add("to_psig", ValueType::real, "0", "vent end, gauge");
  sd.add("duration_s", ValueType::real, "0.8", "required vent duration");
  sd.add("elongation_mm", ValueType::real, "110", "elongation held during calibration");
  sd.add("dt_s", ValueType::real, "0.001", "integration step");
  return sd;
}

void run_calibrate(const CommonArgs& args) {
  const config::Config cfg = make_config(args, calibrate_schema());

  const vea::DeviceParams dev = device_from(cfg);
  const double el_m = units::mm_to_m(cfg.real("elongation_mm", 0));
  pneumo::CalibrationTarget target;
  target.p_start_abs = units::psig_to_pa(cfg.real("from_psig", 0), dev.gas.p_atm);
  target.p_end_abs = units::psig_to_pa(cfg.real("to_psig", 0), dev.gas.p_atm);
  target.duration_s = cfg.real("duration_s", 0);
  const auto volume = [&](double) { return pneumo::ipam_volume(dev.ipam, el_m); };
  const pneumo::FlowPath path =
      pneumo::calibrate_orifice(target, dev.gas, volume, cfg.real("dt_s", 0));

  // Verification vent with the calibrated path; also serves as the output trace.
  pneumo::PneumaticState st = pneumo::make_state(
      dev.ipam, el_m, target.p_start_abs,
      units::psig_to_pa(dev.reservoir_setpoint_psig, dev.gas.p_atm), dev.gas);
  const double dt = cfg.real("dt_s", 0);
  std::vector<std::vector<std::string>> rows;
  double t = 0, reached_at = -1;
  while (t <= 10 * target.duration_s) {
    rows.push_back({fmt(t), fmt(units::pa_to_psig(st.p, dev.gas.p_atm))});
    if (st.p <= target.p_end_abs + 1e-9) {
      reached_at = t;
      break;
    }
    st = pneumo::step_deflate(st, dev.ipam, el_m, path, dev.gas, dt);
    t += dt;
  }

  const fs::path out = prepare_out(args, "calibrate");
  csv::write_file(out / "calibration.csv", {"t", "p_psig"}, rows);
  write_text(out / "orifice.cfg",
             "# calibrated release path; paste into any device config\n"
             "deflate_cd = " +
                 fmt(path.cd) + "\ndeflate_area_mm2 = " + fmt(path.area_m2 * 1e6) + "\n");
  write_manifest(out, "calibrate", cfg);
  std::cout << "calibrate: CdA " << path.cda() * 1e6 << " mm^2 (cd " << path.cd << ", area "
            << path.area_m2 * 1e6 << " mm^2); verification vent took " << reached_at << " s\n"
            << "wrote " << (out / "orifice.cfg").string() << "\n";
}

SchemaDef synth_schema() {
  using config::ValueType;
  SchemaDef sd = subject_schema();
  sd.add("trials_per_weight", ValueType::integer, "10", "trials per weight class");
  sd.add("train_fraction", ValueType::real, "0.7", "stratified train split fraction");
  return sd;
}

void run_synth(const CommonArgs& args) {
  const config::Config cfg = make_config(args, synth_schema());

  const auto specs = trial_specs(cfg);
  const synth::Dataset ds =
      synth::generate_dataset(subject_from(cfg), specs, cfg.real("train_fraction", 0));

  const fs::path out = prepare_out(args, "synth");
  write_split(out / "train", ds.train);
  write_split(out / "test", ds.test);
  write_manifest(out, "synth", cfg);
  std::cout << "synth: " << ds.train.size() << " train cycles, " << ds.test.size()
            << " test cycles\n"
            << "wrote " << (out / "train").string() << " and " << (out / "test").string() << "\n";
}

SchemaDef train_schema() {
  SchemaDef sd = subject_schema();
  sd.merge(training_schema());
  return sd;
}

void run_train(const CommonArgs& args) {
  const config::Config cfg = make_config(args, train_schema());

  const auto t0 = std::chrono::steady_clock::now();
  const replay::Models models = train_models(cfg);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const fs::path out = prepare_out(args, "train");
  est::save_model(models.state, out / "state_model.json");
  est::save_model(models.weight, out / "weight_model.json");
  write_manifest(out, "train", cfg);
  std::cout << "train: posture forest " << models.state.trees.size() << " trees, weight forest "
            << models.weight.trees.size() << " trees in " << elapsed << " s\n"
            << "wrote " << (out / "state_model.json").string() << " and "
            << (out / "weight_model.json").string() << "\n";
}

SchemaDef models_and_trace_schema() {
  using config::ValueType;
  SchemaDef sd;
  sd.add("models_dir", ValueType::text, "",
         "directory with state_model.json/weight_model.json; empty = train in-process");
  sd.add("trace", ValueType::text, "", "input trace CSV; empty = synthesize one trial");
  sd.add("trial_weight", ValueType::text, "kg15", "weight class of the synthetic trial");
  sd.add("trial_index", ValueType::integer, "0", "noise stream of the synthetic trial");
  sd.add("dwell", ValueType::integer, "10", "dwell-filter persistence, frames");
  return sd;
}

SchemaDef classify_schema() {
  SchemaDef sd = subject_schema();
  sd.merge(training_schema());
  sd.merge(models_and_trace_schema());
  return sd;
}

void run_classify(const CommonArgs& args) {
  const config::Config cfg = make_config(args, classify_schema());

  const fs::path out = prepare_out(args, "classify");
  const replay::Models models = ensure_models(cfg, out);
  const std::vector<est::SensorFrame> frames = input_trace(cfg);
  const int dwell = static_cast<int>(cfg.integer("dwell", 0));

  est::DwellFilter state_filter(dwell), weight_filter(dwell);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(frames.size());
  std::size_t labeled = 0, state_hits = 0, weight_hits = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    int raw_state = 0, raw_weight = 0;  // standing / unloaded before a full window
    if (i + 1 >= static_cast<std::size_t>(est::kWindowSamples)) {
      const auto window =
          std::span(frames).subspan(i + 1 - static_cast<std::size_t>(est::kWindowSamples),
                                    static_cast<std::size_t>(est::kWindowSamples));
      raw_state =
          est::predict(models.state, est::extract_features(window, est::FeatureMode::state)).label;
      raw_weight =
          est::predict(models.weight, est::extract_features(window, est::FeatureMode::weight))
              .label;
    }
    const int state = state_filter.step(raw_state);
    const int weight = weight_filter.step(raw_weight);
    const auto& fr = frames[i];
    if (fr.label_state && fr.label_weight) {
      ++labeled;
      if (static_cast<int>(*fr.label_state) == state) ++state_hits;
      if (static_cast<int>(*fr.label_weight) == weight) ++weight_hits;
    }
    rows.push_back({fmt(fr.t_s), ctrl::to_string(static_cast<ctrl::TrunkState>(raw_state)),
                    ctrl::to_string(static_cast<ctrl::TrunkState>(state)),
                    ctrl::to_string(static_cast<ctrl::WeightClass>(raw_weight)),
                    ctrl::to_string(static_cast<ctrl::WeightClass>(weight)),
                    fr.label_state ? ctrl::to_string(*fr.label_state) : "-",
                    fr.label_weight ? ctrl::to_string(*fr.label_weight) : "-"});
  }
  csv::write_file(out / "predictions.csv",
                  {"t", "state_raw", "state", "weight_raw", "weight", "truth_state",
                   "truth_weight"},
                  rows);
  write_manifest(out, "classify", cfg);

  std::cout << "classify: " << frames.size() << " frames";
  if (labeled > 0) {
    std::cout << "; filtered accuracy: state "
              << 100.0 * static_cast<double>(state_hits) / static_cast<double>(labeled)
              << "%, weight "
              << 100.0 * static_cast<double>(weight_hits) / static_cast<double>(labeled) << "%";
  }
  std::cout << "\nwrote " << (out / "predictions.csv").string() << "\n";
}

SchemaDef replay_schema() {
  using config::ValueType;
  SchemaDef sd = device_schema();
  sd.merge(subject_schema());
  sd.merge(training_schema());
  sd.merge(models_and_trace_schema());
  sd.add("elongation_max_mm", ValueType::real, "110",
         "device elongation at the range-of-motion maximum");
  sd.add("pump_rate_psi_s", ValueType::real, "50", "reservoir recharge rate while the pump runs");
  sd.add("deadband_psi", ValueType::real, "1", "pressure-regulation deadband");
  sd.add("inflate_target_psig", ValueType::real, "50", "idle/lowering inflation setpoint");
  sd.add("gate_deflation", ValueType::boolean, "true",
         "suppress deflation when the descent carried a load");
  return sd;
}

replay::ReplayResult run_replay_pipeline(const config::Config& cfg, const fs::path& out) {
  const replay::Models models = ensure_models(cfg, out);
  const std::vector<est::SensorFrame> frames = input_trace(cfg);

  replay::ReplayConfig rc;
  rc.dwell_samples = static_cast<int>(cfg.integer("dwell", 0));
  rc.device = device_from(cfg);
  rc.rom_max_deg = cfg.real("rom_max_deg", 0);
  rc.elongation_max_mm = cfg.real("elongation_max_mm", 0);
  rc.pump_rate_psi_s = cfg.real("pump_rate_psi_s", 0);
  rc.controller.rom_max_deg = rc.rom_max_deg;
  rc.controller.deadband_psi = cfg.real("deadband_psi", 0);
  rc.controller.inflate_target_psig = cfg.real("inflate_target_psig", 0);
  rc.controller.reservoir_setpoint_psig = cfg.real("reservoir_setpoint_psig", 0);
  rc.controller.gate_deflation_on_loaded_descent = cfg.boolean("gate_deflation", true);
  return replay::replay(frames, models, rc);
}

void run_replay(const CommonArgs& args) {
  const config::Config cfg = make_config(args, replay_schema());
  const fs::path out = prepare_out(args, "replay");
  const replay::ReplayResult result = run_replay_pipeline(cfg, out);
  replay::write_result(out / "result.csv", result);
  write_text(out / "summary.txt", replay::summary_text(result));
  write_manifest(out, "replay", cfg);
  std::cout << replay::summary_text(result) << "wrote " << (out / "result.csv").string() << "\n";
}

void run_energy(const CommonArgs& args) {
  const config::Config cfg = make_config(args, replay_schema());
  const fs::path out = prepare_out(args, "energy");
  const replay::ReplayResult result = run_replay_pipeline(cfg, out);

  std::vector<std::vector<std::string>> rows;
  double net = 0;
  for (std::size_t i = 0; i < result.cycles.size(); ++i) {
    const auto& c = result.cycles[i];
    rows.push_back({std::to_string(i), c.pickup ? "pickup" : "lowering",
                    fmt(result.records[c.first_frame].t_s), fmt(result.records[c.last_frame].t_s),
                    fmt(c.energy_j)});
    net += c.energy_j;
  }
  csv::write_file(out / "energy.csv", {"cycle", "kind", "t_first_s", "t_last_s", "energy_J"},
                  rows);
  write_manifest(out, "energy", cfg);

  std::cout << "energy: " << result.cycles.size() << " cycles\n";
  for (std::size_t i = 0; i < result.cycles.size(); ++i) {
    const auto& c = result.cycles[i];
    std::cout << "  cycle " << i << " (" << (c.pickup ? "pickup" : "lowering") << "): "
              << c.energy_j << " J\n";
  }
  std::cout << "  net device work on the wearer: " << net << " J\n"
            << "wrote " << (out / "energy.csv").string() << "\n";
}

SchemaDef optimize_schema() {
  using config::ValueType;
  SchemaDef sd;
  sd.add("phase", ValueType::text, "lifting", "trial phase to solve: lowering | lifting");
  sd.add("trial", ValueType::text, "surrogate",
         "trial source: surrogate | path to a lift-trial CSV");
  sd.add("grid_points", ValueType::integer, "101", "percent-RoM resampling grid");
  sd.add("with_device", ValueType::boolean, "true", "include the device path actuator");
  sd.add("k_base_n_m", ValueType::real, "875", "device path-spring stiffness");
  sd.add("f_path_max_n", ValueType::real, "25456.42", "device activation-to-force scale");
  sd.add("a_path_min", ValueType::real, "0.001", "device activation lower bound");
  sd.add("a_path_max", ValueType::real, "0.01", "device activation upper bound");
  sd.add("muscle_f0_n", ValueType::real, "1000", "isometric strength for CSV-trial muscles");
  sd.add("a_min", ValueType::real, "0.01", "muscle activation lower bound (CSV trials)");
  sd.add("a_max", ValueType::real, "1", "muscle activation upper bound (CSV trials)");
  sd.add("flv", ValueType::text, "gaussian",
         "force-length-velocity scaler for CSV-trial muscles: gaussian | constant");
  sd.add("flv_width", ValueType::real, "0.4", "gaussian force-length half-width");
  sd.add("flv_vmax", ValueType::real, "10", "normalized velocity with zero active force");
  sd.add("rom_max_deg", ValueType::real, "90", "surrogate range of motion");
  sd.add("duration_s", ValueType::real, "4", "surrogate sweep duration");
  sd.add("dt_s", ValueType::real, "0.02", "surrogate frame period");
  sd.add("trunk_mass_kg", ValueType::real, "10", "surrogate trunk mass share");
  sd.add("trunk_com_m", ValueType::real, "0.18", "surrogate trunk COM lever");
  sd.add("load_mass_kg", ValueType::real, "2", "surrogate hand-load mass share");
  sd.add("load_lever_m", ValueType::real, "0.4", "surrogate hand-load lever");
  sd.add("wrap_radius_m", ValueType::real, "0.07", "surrogate device moment arm");
  sd.add("rest_length_m", ValueType::real, "0.3", "device rest length (surrogate and CSV)");
  return sd;
}

void run_optimize(const CommonArgs& args) {
  const config::Config cfg = make_config(args, optimize_schema());

  const std::string phase_token = cfg.text("phase", "");
  lift::TrialPhase phase;
  if (phase_token == "lowering") {
    phase = lift::TrialPhase::lowering;
  } else if (phase_token == "lifting") {
    phase = lift::TrialPhase::lifting;
  } else {
    throw ConfigError("phase must be lowering or lifting; got '" + phase_token + "'");
  }

  std::vector<lift::LiftFrame> frames;
  std::vector<lift::MuscleDef> muscles;
  const std::string trial = cfg.text("trial", "");
  if (trial == "surrogate") {
    lift::SurrogateParams sp;
    sp.rom_max_deg = cfg.real("rom_max_deg", 0);
    sp.duration_s = cfg.real("duration_s", 0);
    sp.dt_s = cfg.real("dt_s", 0);
    sp.trunk_mass_kg = cfg.real("trunk_mass_kg", 0);
    sp.trunk_com_m = cfg.real("trunk_com_m", 0);
    sp.load_mass_kg = cfg.real("load_mass_kg", 0);
    sp.load_lever_m = cfg.real("load_lever_m", 0);
    sp.wrap_radius_m = cfg.real("wrap_radius_m", 0);
    sp.rest_length_m = cfg.real("rest_length_m", 0);
    lift::SurrogateTrial st = lift::make_surrogate_trial(sp);
    frames = std::move(st.frames);
    muscles = std::move(st.muscles);
  } else {
    std::vector<std::string> names;
    frames = lift::read_lift_trial(trial, names, cfg.real("rest_length_m", 0));
    const std::string flv_token = cfg.text("flv", "");
    lift::FlvFn flv;
    if (flv_token == "gaussian") {
      flv = lift::flv_scaler(lift::FlvKind::gaussian_fl_linear_fv,
                             {cfg.real("flv_width", 0), cfg.real("flv_vmax", 0)});
    } else if (flv_token != "constant") {
      throw ConfigError("flv must be gaussian or constant; got '" + flv_token + "'");
    }
    muscles.reserve(names.size());
    for (const auto& name : names) {
      muscles.push_back({name, cfg.real("muscle_f0_n", 0), cfg.real("a_min", 0),
                         cfg.real("a_max", 0), flv});
    }
  }

  std::optional<lift::PathActuatorDef> device;
  if (cfg.boolean("with_device", true)) {
    device = lift::PathActuatorDef{cfg.real("k_base_n_m", 0), cfg.real("f_path_max_n", 0),
                                   cfg.real("a_path_min", 0), cfg.real("a_path_max", 0)};
  }

  const lift::TrialProfile profile = lift::solve_trial(
      frames, muscles, device, phase, static_cast<int>(cfg.integer("grid_points", 0)));

  const fs::path out = prepare_out(args, "optimize");
  lift::write_profile(out / "profile.csv", profile);
  write_manifest(out, "optimize", cfg);

  double peak_total = 0, peak_active = 0;
  for (std::size_t i = 0; i < profile.percent_rom.size(); ++i) {
    peak_total = std::max(peak_total, profile.f_total_n[i]);
    peak_active = std::max(peak_active, profile.f_active_n[i]);
  }
  std::cout << "optimize: " << phase_token << " phase, " << profile.percent_rom.size()
            << " grid points; peak device force " << peak_total << " N (" << peak_active
            << " N active)\n"
            << "wrote " << (out / "profile.csv").string() << "\n";
}

// ---------------------------------------------------------------------------

struct Subcommand {
  const char* name;
  const char* help;
  SchemaDef (*schema)();
  void (*run)(const CommonArgs&);
};

const Subcommand kSubcommands[] = {
    {"bench", "Quasi-static pull on the tensile bench (clutch schedules, optional held pressure)",
     bench_schema, run_bench},
    {"dynamic", "Fast pull and return with pressure regulation and timed deflation",
     dynamic_schema, run_dynamic},
    {"deflate", "Fixed-elongation venting study: pressure/force/mass vs time", deflate_schema,
     run_deflate},
    {"calibrate", "Size the release orifice for a target vent duration", calibrate_schema,
     run_calibrate},
    {"synth", "Generate a labeled synthetic lifting dataset (train/test split)", synth_schema,
     run_synth},
    {"train", "Train the posture and weight classifiers on a dataset", train_schema, run_train},
    {"classify", "Run the classifiers plus dwell filter over a trace", classify_schema,
     run_classify},
    {"replay", "Closed-loop replay: classify, control, and simulate the plant over a trace",
     replay_schema, run_replay},
    {"energy", "Per-cycle device work audit of a closed-loop replay", replay_schema, run_energy},
    {"optimize", "Static-optimization force profile over a lifting/lowering trial",
     optimize_schema, run_optimize},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"variable-elastic back-support actuator: simulation, calibration, learning, and "
               "closed-loop replay"};
  app.set_version_flag("--version", "vebs " VEBS_VERSION);
  app.require_subcommand(1);

  constexpr std::size_t kCount = std::size(kSubcommands);
  std::vector<CommonArgs> args(kCount);
  const Subcommand* chosen = nullptr;
  const CommonArgs* chosen_args = nullptr;

  for (std::size_t i = 0; i < kCount; ++i) {
    const Subcommand& sc = kSubcommands[i];
    CommonArgs& a = args[i];
    CLI::App* sub = app.add_subcommand(sc.name, sc.help);
    sub->add_option("--config", a.config_path, "key=value config file");
    sub->add_option("--set", a.sets, "config override, key=value (repeatable)");
    sub->add_option("--out", a.out_dir,
                    std::string("results directory (default: runs/") + sc.name + ")");
    sub->add_flag("--schema", a.print_schema, "print this subcommand's config schema and exit");

    const std::string name = sc.name;
    if (name == "bench") {
      sub->add_option_function<std::string>(
             "--profile",
             [&a](const std::string& p) {
               if (p == "disengaged") {
                 a.flag_sets.push_back("clutch=never");
               } else if (p == "engaged") {
                 a.flag_sets.push_back("clutch=throughout");
               } else {
                 a.flag_sets.push_back("clutch=at-threshold");
                 a.flag_sets.push_back("engage_at_mm=75");
               }
             },
             "preset: disengaged | engaged | engaged-at-75mm")
          ->check(CLI::IsMember({"disengaged", "engaged", "engaged-at-75mm"}));
    } else if (name == "deflate") {
      sub->add_option_function<double>(
          "--from", [&a](double v) { a.flag_sets.push_back("from_psig=" + fmt(v)); },
          "initial gauge pressure, psig");
      sub->add_option_function<double>(
          "--to", [&a](double v) { a.flag_sets.push_back("to_psig=" + fmt(v)); },
          "target gauge pressure, psig");
      sub->add_option_function<double>(
          "--elongation", [&a](double v) { a.flag_sets.push_back("elongation_mm=" + fmt(v)); },
          "held elongation, mm");
    } else if (name == "optimize") {
      sub->add_option_function<std::string>(
          "--phase", [&a](const std::string& v) { a.flag_sets.push_back("phase=" + v); },
          "lowering | lifting");
      sub->add_option_function<std::string>(
          "--trial", [&a](const std::string& v) { a.flag_sets.push_back("trial=" + v); },
          "surrogate | path to a lift-trial CSV");
    } else if (name == "classify" || name == "replay" || name == "energy") {
      sub->add_option_function<std::string>(
          "--trace", [&a](const std::string& v) { a.flag_sets.push_back("trace=" + v); },
          "input trace CSV");
      sub->add_option_function<std::string>(
          "--models", [&a](const std::string& v) { a.flag_sets.push_back("models_dir=" + v); },
          "trained-model directory");
    }
    if (name == "synth" || name == "train" || name == "classify" || name == "replay" ||
        name == "energy") {
      sub->add_option_function<long long>(
          "--seed", [&a](long long v) { a.flag_sets.push_back("seed=" + std::to_string(v)); },
          "generator seed");
    }

    sub->callback([&chosen, &chosen_args, &sc, &a] {
      chosen = &sc;
      chosen_args = &a;
    });
  }

  try {
    app.parse(argc, argv);
    if (chosen_args->print_schema) {
      std::cout << config::describe_schema(chosen->schema().specs);
      return 0;
    }
    chosen->run(*chosen_args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NoSolutionError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
