// pipsim: processing-in-pixel sensor simulator and rate/power calculators.
//
// Exit codes: 0 ok, 1 internal, 2 config/validation, 3 input, 4 geometry,
// 5 timing infeasible.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include <CLI11.hpp>

#include "pipsim/analysis.hpp"
#include "pipsim/io.hpp"
#include "pipsim/optics.hpp"
#include "pipsim/scheduler.hpp"
#include "pipsim/simulator.hpp"

namespace fs = std::filesystem;
using namespace pipsim;

namespace {

enum Exit { kOk = 0, kInternal = 1, kConfig = 2, kInput = 3, kGeometry = 4, kTiming = 5 };

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return kConfig;
    case ErrorKind::input: return kInput;
    case ErrorKind::geometry: return kGeometry;
    case ErrorKind::timing: return kTiming;
    case ErrorKind::internal: return kInternal;
  }
  return kInternal;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidConfig({msg});
}

bool on_off(const std::string& v) { return v == "on"; }

struct SceneArgs {
  std::string config;
  std::string scene;
  std::string weights;
  double lux_scale = 1500.0;
};

void add_scene_args(CLI::App* cmd, SceneArgs& a, bool weights = true) {
  cmd->add_option("--config", a.config, "sensor config file (key = value)");
  cmd->add_option("--scene", a.scene, "8-bit RGGB raster (PGM or PNG)")->required();
  if (weights) cmd->add_option("--weights", a.weights, "weights file")->required();
  cmd->add_option("--lux-scale", a.lux_scale, "illuminance of code 255 [lux]")->capture_default_str();
}

ValidatedConfig config_for(const std::string& path, const Grid<std::uint8_t>* raster) {
  if (!path.empty()) return validate_config(load_config(path));
  SensorConfig c;
  if (raster) {
    c.height_px = static_cast<int>(raster->rows());
    c.width_px = static_cast<int>(raster->cols());
  }
  return validate_config(c);
}

struct Loaded {
  ValidatedConfig cfg;
  PhotocurrentMap currents;
  WeightsFile weights;
};

Loaded load_inputs(const SceneArgs& a) {
  require(a.lux_scale > 0, "--lux-scale must be > 0");
  const auto raster = read_raster(a.scene);
  ValidatedConfig cfg = config_for(a.config, &raster);
  const Scene scene = scene_from_image(raster, lux_to_irradiance(a.lux_scale), cfg);
  WeightsFile w = a.weights.empty() ? WeightsFile{} : load_weights(a.weights);
  return {cfg, photocurrents(scene, cfg), std::move(w)};
}

std::string channel_file(int channel, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fmap_c%03d.%s", channel, ext);
  return buf;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<double> parse_doubles(const std::vector<std::string>& items, const char* flag) {
  std::vector<double> out;
  for (const auto& s : items) {
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw InvalidConfig({std::string(flag) + ": not a number: " + s});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct SimArgs {
  SceneArgs in;
  std::string policy = "full-coverage";
  std::uint64_t seed = 1;
  std::string noise = "off";
  std::string adc = "model";
  std::string leakage = "on";
  std::string dark = "off";
  std::string out;
  bool ideal = false;
  bool auto_exposure = false;
  bool codes = false;
  bool binary = false;
  double read_sigma = 0.25e-3;
  double mismatch = 0;
  double offset_fpn = 0;
  double prnu = 0;
  double dsnu = 0;
  std::string snr;
};

int cmd_simulate(const SimArgs& a) {
  Loaded in = load_inputs(a.in);
  require(!in.weights.kernels.empty(), "weights file has no kernels");

  SimulationOptions opts;
  opts.policy = parse_policy(a.policy);
  opts.leakage = on_off(a.leakage);
  opts.adc_bypass = a.adc == "bypass";
  opts.dark_correction = on_off(a.dark);
  opts.auto_exposure = a.auto_exposure;
  opts.record_codes = a.codes;
  if (on_off(a.noise)) {
    NoiseModel m = NoiseModel::typical(a.seed);
    m.read_sigma = a.read_sigma;
    m.mismatch_sigma = a.mismatch;
    m.offset_fpn_sigma = a.offset_fpn;
    m.prnu_sigma = a.prnu;
    m.dsnu_sigma = a.dsnu;
    opts.noise = m;
  }
  if (!a.snr.empty()) {
    const double snr = parse_doubles({a.snr}, "--snr").front();
    if (std::isfinite(snr)) opts.target_snr_db = snr;
  }
  if (a.ideal) {
    opts = SimulationOptions::ideal();
    opts.policy = parse_policy(a.policy);
    opts.record_codes = a.codes;
  }

  const auto res = simulate(in.currents, in.weights.kernels, in.weights.s, in.cfg, opts);

  fs::create_directories(a.out);
  RunManifest man;
  man.command = "simulate";
  man.config_path = a.in.config;
  man.scene_path = a.in.scene;
  man.weights_path = a.in.weights;
  if (opts.noise) man.seed = a.seed;
  man.out_dir = a.out;
  man.options = {{"policy", a.policy},
                 {"noise", opts.noise ? "on" : "off"},
                 {"adc", opts.adc_bypass ? "bypass" : "model"},
                 {"leakage", opts.leakage ? "on" : "off"},
                 {"dark_correction", opts.dark_correction ? "on" : "off"},
                 {"auto_exposure", opts.auto_exposure ? "on" : "off"},
                 {"ideal", a.ideal ? "on" : "off"},
                 {"lux_scale", fmt("%.17g", a.in.lux_scale)},
                 {"k_expo", fmt("%.17g", res.k_expo)}};
  if (opts.target_snr_db) man.options["snr_db"] = fmt("%.17g", *opts.target_snr_db);

  for (const auto& fm : res.maps) {
    const std::string name = channel_file(fm.info.channel_id, "csv");
    write_feature_map_csv(fm, (fs::path(a.out) / name).string());
    man.outputs.push_back(name);
    if (a.binary) {
      const std::string bin = channel_file(fm.info.channel_id, "f64");
      write_feature_map_bin(fm, (fs::path(a.out) / bin).string());
      man.outputs.push_back(bin);
    }
  }
  write_schedule_csv(res.schedule, (fs::path(a.out) / "schedule.csv").string());
  man.outputs.push_back("schedule.csv");
  if (a.codes) {
    write_codes_csv(res.codes, (fs::path(a.out) / "codes.csv").string());
    man.outputs.push_back("codes.csv");
  }
  write_manifest(man, (fs::path(a.out) / "manifest.json").string());

  std::cout << "channels        " << res.maps.size() << "\n"
            << "output          " << res.schedule.out_rows << " x " << res.schedule.out_cols << "\n"
            << "steps           " << res.schedule.total_steps() << "\n"
            << "k_expo [s/LSB]  " << fmt("%.6g", res.k_expo) << "\n"
            << "saturated tiles " << res.saturated_tiles << "\n"
            << "clamped codes   " << res.clamped_codes << "\n"
            << "stalls          " << res.schedule.stalls.size() << "\n";
  return kOk;
}

int cmd_oracle(const SceneArgs& a, const std::string& out) {
  Loaded in = load_inputs(a);
  const auto maps = oracle_conv(in.currents, in.weights.kernels, in.weights.s);
  fs::create_directories(out);
  RunManifest man;
  man.command = "oracle";
  man.config_path = a.config;
  man.scene_path = a.scene;
  man.weights_path = a.weights;
  man.out_dir = out;
  man.options = {{"lux_scale", fmt("%.17g", a.lux_scale)}};
  for (const auto& fm : maps) {
    const std::string name = channel_file(fm.info.channel_id, "csv");
    write_feature_map_csv(fm, (fs::path(out) / name).string());
    man.outputs.push_back(name);
  }
  write_manifest(man, (fs::path(out) / "manifest.json").string());
  std::cout << "channels " << maps.size() << "\n";
  return kOk;
}

struct RateArgs {
  std::vector<int> r{3, 5, 7, 9};
  int s = 2;
  double fps = 60;
  int channels = 64;
  std::vector<int> height{128};
  double t_expo = kTableExposure;
  std::string csv;
};

int cmd_rates(const RateArgs& a) {
  require(a.fps > 0, "--fps must be > 0");
  require(a.channels > 0, "--channels must be > 0");
  require(a.t_expo > 0, "--t-expo must be > 0");
  for (int h : a.height) require(h > 0, "--height must be > 0");
  std::vector<RateReport> rows;
  for (int h : a.height)
    for (int r : a.r) rows.push_back(rate_report(r, a.s, a.fps, a.channels, h, a.t_expo));

  std::printf("%-4s %-3s %-6s %-14s %-14s %s\n", "r", "s", "H", "f_adc_min", "f_real_max", "f_real");
  for (const auto& r : rows) {
    const std::string adc = r.f_adc_min >= 1e6 ? fmt("%.2f MHz", r.f_adc_min / 1e6) : fmt("%.2f kHz", r.f_adc_min / 1e3);
    std::printf("%-4d %-3d %-6d %-14s %-14lld %.0f\n", r.r, r.s, r.H, adc.c_str(), floor_rate(r.f_real_max), r.f_real);
  }
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw InputError("cannot write " + a.csv);
    write_rates_csv(rows, f);
  }
  return kOk;
}

struct PowerArgs {
  std::vector<double> fps;
  std::vector<int> r;
  std::vector<int> s;
  bool printed = false;
  std::string csv;
};

int cmd_power(const PowerArgs& a) {
  struct Row {
    double fps;
    int r;
    int s;
  };
  std::vector<Row> rows;
  if (a.fps.empty() && a.r.empty() && a.s.empty()) {
    rows = {{60, 3, 2}, {120, 3, 2}, {60, 5, 2}, {60, 5, 4}, {60, 7, 2}, {60, 7, 4}};
  } else {
    const std::vector<double> fps = a.fps.empty() ? std::vector<double>{60} : a.fps;
    const std::vector<int> rs = a.r.empty() ? std::vector<int>{3} : a.r;
    const std::vector<int> ss = a.s.empty() ? std::vector<int>{2} : a.s;
    for (double f : fps)
      for (int r : rs)
        for (int s : ss) rows.push_back({f, r, s});
  }
  const PowerCalibration calib = a.printed ? PowerCalibration::printed() : PowerCalibration{};
  std::vector<PowerReport> reps;
  for (const auto& row : rows) {
    require(row.fps > 0 && std::isfinite(row.fps), "--fps must be > 0");
    require(row.r >= 1, "--r must be >= 1");
    require(row.s >= 1, "--s must be >= 1");
    reps.push_back(power_model(row.fps, row.r, row.s, calib));
  }
  std::printf("%-5s %-3s %-3s %10s %10s %10s %10s %8s %8s %10s\n", "fps", "r", "s", "pixel_uW", "readout_uW",
              "adc_uW", "total_uW", "TOPS/W", "FoM_pJ", "E/frame_uJ");
  for (const auto& p : reps)
    std::printf("%-5g %-3d %-3d %10.2f %10.2f %10.2f %10.2f %8.2f %8.2f %10.2f\n", p.fps, p.r, p.s, p.p_pixel * 1e6,
                p.p_readout * 1e6, p.p_adc * 1e6, p.p_total * 1e6, p.efficiency / 1e12, p.fom * 1e12,
                energy_per_frame(p) * 1e6);
  if (!a.csv.empty()) {
    std::ofstream f(a.csv);
    if (!f) throw InputError("cannot write " + a.csv);
    write_power_csv(reps, f);
  }
  return kOk;
}

struct SweepArgs {
  SceneArgs in;
  std::vector<std::string> snr{"60", "40", "20", "0"};
  std::vector<std::string> mismatch{"0.05", "0.10", "0.20"};
  int trials = 3;
  std::uint64_t seed = 1;
  std::string noise = "on";
  std::string adc = "model";
  std::string out;
};

int cmd_sweep(const SweepArgs& a) {
  require(a.trials >= 1, "--trials must be >= 1");
  SweepOptions so;
  so.snr_db = parse_doubles(a.snr, "--snr");
  so.mismatch = parse_doubles(a.mismatch, "--mismatch");
  for (double m : so.mismatch) require(m >= 0 && std::isfinite(m), "--mismatch values must be >= 0");
  so.trials = a.trials;
  so.seed = a.seed;
  so.base = on_off(a.noise) ? NoiseModel::typical(a.seed) : NoiseModel{};
  so.adc_bypass = a.adc == "bypass";
  Loaded in = load_inputs(a.in);
  require(!in.weights.kernels.empty(), "weights file has no kernels");
  const auto cells = noise_sweep(in.currents, in.weights.kernels, in.weights.s, in.cfg, so);

  fs::create_directories(a.out);
  {
    std::ofstream f(fs::path(a.out) / "noise_sweep.csv");
    if (!f) throw InputError("cannot write noise_sweep.csv");
    write_sweep_csv(cells, f);
  }
  RunManifest man;
  man.command = "sweep-noise";
  man.config_path = a.in.config;
  man.scene_path = a.in.scene;
  man.weights_path = a.in.weights;
  man.seed = a.seed;
  man.out_dir = a.out;
  man.options = {{"trials", std::to_string(a.trials)}, {"noise", a.noise}, {"adc", a.adc}};
  man.outputs = {"noise_sweep.csv"};
  write_manifest(man, (fs::path(a.out) / "manifest.json").string());
  write_sweep_csv(cells, std::cout);
  return kOk;
}

struct ScheduleArgs {
  std::string config;
  int r = 3;
  int s = 2;
  std::string policy = "full-coverage";
  bool strict = false;
  std::string out;
};

int cmd_schedule(const ScheduleArgs& a) {
  const ValidatedConfig cfg = config_for(a.config, nullptr);
  TileSchedule sched = plan_steps(a.r, a.s, cfg, parse_policy(a.policy));
  sched = build_timeline(std::move(sched), cfg, {!a.strict});
  const auto wiring = wiring_check(sched);
  const auto overlaps = find_overlaps(sched);
  double min_slack = std::numeric_limits<double>::infinity();
  for (const auto& t : sched.timeline) min_slack = std::min(min_slack, t.slack);
  std::cout << "policy               " << to_string(sched.policy) << "\n"
            << "grid                 " << sched.grid_rows << " x " << sched.grid_cols << "\n"
            << "output               " << sched.out_rows << " x " << sched.out_cols << "\n"
            << "passes               " << sched.passes() << "\n"
            << "steps per pass       " << sched.steps_per_pass() << "\n"
            << "total steps          " << sched.total_steps() << "\n"
            << "readouts per step    " << sched.max_readouts_per_step() << "\n"
            << "equivalent exposures " << count_equivalent_exposures(sched) << "\n"
            << "wiring               " << (wiring.ok() ? "ok" : "VIOLATED") << "\n"
            << "overlaps             " << overlaps.size() << "\n";
  if (sched.policy == SchedulePolicy::full_coverage)
    std::cout << "coverage errors      " << find_coverage_errors(sched).size() << "\n";
  std::cout << "min slack [us]       " << fmt("%.3f", min_slack * 1e6) << "\n"
            << "stalls               " << sched.stalls.size() << "\n"
            << "cycle time [us]      " << fmt("%.3f", sched.cycle_time * 1e6) << "\n";
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    write_schedule_csv(sched, (fs::path(a.out) / "schedule.csv").string());
  }
  return kOk;
}

struct CurveArgs {
  std::string config;
  std::string mode = "both";
  double lux_min = 1;
  double lux_max = 1e6;
  int points = 25;
  int r = 3;
  int s = 2;
};

int cmd_curve(const CurveArgs& a) {
  require(a.points >= 2, "--points must be >= 2");
  require(a.lux_min > 0 && a.lux_max > a.lux_min, "need 0 < --lux-min < --lux-max");
  require(a.mode == "both" || a.mode == "computing" || a.mode == "traditional", "--mode must be computing, traditional or both");
  const ValidatedConfig cfg = config_for(a.config, nullptr);
  std::vector<double> lux;
  for (int i = 0; i < a.points; ++i)
    lux.push_back(a.lux_min * std::pow(a.lux_max / a.lux_min, static_cast<double>(i) / (a.points - 1)));
  CurveOptions co;
  co.r = a.r;
  co.s = a.s;
  const auto comp = frame_rate_curve(lux, cfg, SensorMode::computing, co);
  const auto trad = frame_rate_curve(lux, cfg, SensorMode::traditional, co);
  std::cout << "lux";
  if (a.mode != "traditional") std::cout << ",computing_fps";
  if (a.mode != "computing") std::cout << ",traditional_fps";
  std::cout << "\n";
  for (std::size_t i = 0; i < lux.size(); ++i) {
    std::cout << fmt("%.6g", lux[i]);
    if (a.mode != "traditional") std::cout << "," << fmt("%.6g", comp[i].fps);
    if (a.mode != "computing") std::cout << "," << fmt("%.6g", trad[i].fps);
    std::cout << "\n";
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Processing-in-pixel image sensor simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  SimArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "run the in-sensor convolution");
  add_scene_args(c_sim, sim.in);
  c_sim->add_option("--policy", sim.policy)->check(CLI::IsMember({"paper-steps", "full-coverage"}))->capture_default_str();
  c_sim->add_option("--seed", sim.seed)->capture_default_str();
  c_sim->add_option("--noise", sim.noise)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  c_sim->add_option("--adc", sim.adc)->check(CLI::IsMember({"model", "bypass"}))->capture_default_str();
  c_sim->add_option("--leakage", sim.leakage)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  c_sim->add_option("--dark-correction", sim.dark)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  c_sim->add_flag("--ideal", sim.ideal, "leakage off, noise off, ADC bypass, dark correction on");
  c_sim->add_flag("--auto-exposure", sim.auto_exposure, "shrink k_expo so no tile saturates");
  c_sim->add_flag("--codes", sim.codes, "write every ADC conversion to codes.csv");
  c_sim->add_flag("--binary", sim.binary, "also write float64 feature maps with JSON sidecars");
  c_sim->add_option("--read-sigma", sim.read_sigma, "read noise [V rms]")->capture_default_str();
  c_sim->add_option("--mismatch", sim.mismatch, "capacitor mismatch sigma (fraction of c_fd)");
  c_sim->add_option("--offset-fpn", sim.offset_fpn, "per-unit readout offset sigma [V]");
  c_sim->add_option("--prnu", sim.prnu, "photo-response nonuniformity sigma (fraction)");
  c_sim->add_option("--dsnu", sim.dsnu, "dark-signal nonuniformity sigma [A]");
  c_sim->add_option("--snr", sim.snr, "inject additive readout noise at this SNR [dB]");
  c_sim->add_option("--out", sim.out, "output directory")->required();

  SceneArgs orc;
  std::string orc_out;
  auto* c_orc = app.add_subcommand("oracle", "direct convolution reference");
  add_scene_args(c_orc, orc);
  c_orc->add_option("--out", orc_out, "output directory")->required();

  RateArgs rates;
  auto* c_rates = app.add_subcommand("rates", "minimum ADC rate and maximum real frame rate");
  c_rates->add_option("--r", rates.r, "kernel sides")->capture_default_str();
  c_rates->add_option("--s", rates.s)->capture_default_str();
  c_rates->add_option("--fps", rates.fps)->capture_default_str();
  c_rates->add_option("--channels", rates.channels)->capture_default_str();
  c_rates->add_option("--height", rates.height, "pixel heights")->capture_default_str();
  c_rates->add_option("--t-expo", rates.t_expo, "exposure budget [s]")->capture_default_str();
  c_rates->add_option("--csv", rates.csv);

  PowerArgs power;
  auto* c_power = app.add_subcommand("power", "power, efficiency and FoM");
  c_power->add_option("--fps", power.fps);
  c_power->add_option("--r", power.r);
  c_power->add_option("--s", power.s);
  c_power->add_flag("--printed-calibration", power.printed, "use the rounded baseline constants");
  c_power->add_option("--csv", power.csv);

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep-noise", "RMS error over a mismatch x SNR grid");
  add_scene_args(c_sweep, sweep.in);
  c_sweep->add_option("--snr", sweep.snr, "SNR grid [dB]; 'inf' disables injection")->capture_default_str();
  c_sweep->add_option("--mismatch", sweep.mismatch, "mismatch sigmas (fractions)")->capture_default_str();
  c_sweep->add_option("--trials", sweep.trials)->capture_default_str();
  c_sweep->add_option("--seed", sweep.seed)->capture_default_str();
  c_sweep->add_option("--noise", sweep.noise)->check(CLI::IsMember({"on", "off"}))->capture_default_str();
  c_sweep->add_option("--adc", sweep.adc)->check(CLI::IsMember({"model", "bypass"}))->capture_default_str();
  c_sweep->add_option("--out", sweep.out, "output directory")->required();

  ScheduleArgs sch;
  auto* c_sch = app.add_subcommand("schedule", "enumerate steps and check timing and wiring");
  c_sch->add_option("--config", sch.config);
  c_sch->add_option("--r", sch.r)->capture_default_str();
  c_sch->add_option("--s", sch.s)->capture_default_str();
  c_sch->add_option("--policy", sch.policy)->check(CLI::IsMember({"paper-steps", "full-coverage"}))->capture_default_str();
  c_sch->add_flag("--strict", sch.strict, "fail on pipeline violations instead of stalling");
  c_sch->add_option("--out", sch.out, "directory for schedule.csv");

  CurveArgs curve;
  auto* c_curve = app.add_subcommand("curve", "maximum frame rate vs illuminance");
  c_curve->add_option("--config", curve.config);
  c_curve->add_option("--mode", curve.mode)->capture_default_str();
  c_curve->add_option("--lux-min", curve.lux_min)->capture_default_str();
  c_curve->add_option("--lux-max", curve.lux_max)->capture_default_str();
  c_curve->add_option("--points", curve.points)->capture_default_str();
  c_curve->add_option("--r", curve.r)->capture_default_str();
  c_curve->add_option("--s", curve.s)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_orc) return cmd_oracle(orc, orc_out);
    if (*c_rates) return cmd_rates(rates);
    if (*c_power) return cmd_power(power);
    if (*c_sweep) return cmd_sweep(sweep);
    if (*c_sch) return cmd_schedule(sch);
    if (*c_curve) return cmd_curve(curve);
  } catch (const InvalidConfig& e) {
    std::cerr << "error: invalid configuration\n";
    for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
    return kConfig;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
