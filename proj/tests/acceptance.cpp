// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <sys/wait.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>

#include "fixtures.hpp"
#include "pipsim/analysis.hpp"
#include "pipsim/noise.hpp"
#include "pipsim/simulator.hpp"

using namespace pipsim;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string cli(const std::string& args, int* code = nullptr) {
  const std::string cmd = std::string(PIPSIM_CLI) + " " + args + " 2>&1";
  std::string out;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return out;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) out.append(buf.data(), n);
  const int status = ::pclose(p);
  if (code) *code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

std::string fmt(const char* f, double v) {
  char b[64];
  std::snprintf(b, sizeof b, f, v);
  return b;
}

struct RateLine {
  int r = 0, s = 0, H = 0;
  double adc = 0;  // in the printed unit
  std::string unit;
  long long real_max = 0;
};

std::vector<RateLine> parse_rates(const std::string& text) {
  std::vector<RateLine> rows;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    RateLine r;
    std::istringstream ls(line);
    if (ls >> r.r >> r.s >> r.H >> r.adc >> r.unit >> r.real_max) rows.push_back(r);
  }
  return rows;
}

Outcome table_rates() {
  int code = -1;
  const auto rows = parse_rates(cli("rates --r 3 5 7 9 --s 2 --channels 64 --fps 60 --height 128", &code));
  const double adc[] = {327.68, 234.06, 182.04, 148.95};
  const long long real[] = {3840, 1371, 711, 436};
  if (code != 0 || rows.size() != 4) return {false, "rates exited " + std::to_string(code)};
  bool ok = true;
  std::string d;
  for (std::size_t i = 0; i < 4; ++i) {
    ok = ok && rows[i].unit == "kHz" && std::abs(rows[i].adc - adc[i]) <= 0.01 + 1e-9 && rows[i].real_max == real[i];
    d += fmt("%.2f", rows[i].adc) + "/" + std::to_string(rows[i].real_max) + " ";
  }
  return {ok, d};
}

Outcome table_resolution() {
  int code = -1;
  const auto rows = parse_rates(cli("rates --r 3 --s 2 --height 1080 720 480 128 32", &code));
  const double mhz[] = {2.76, 1.84, 1.23, 0.32768, 0.08192};
  if (code != 0 || rows.size() != 5) return {false, "rates exited " + std::to_string(code)};
  bool ok = true;
  std::string d;
  for (std::size_t i = 0; i < 5; ++i) {
    const bool is_mhz = rows[i].unit == "MHz";
    const double printed_expected = is_mhz ? mhz[i] : mhz[i] * 1e3;
    ok = ok && (is_mhz == (mhz[i] >= 1.0)) && std::abs(rows[i].adc - printed_expected) <= 0.01 + 1e-9;
    d += fmt("%.2f", rows[i].adc) + rows[i].unit + " ";
  }
  return {ok, d};
}

Outcome table_power() {
  int code = -1;
  const std::string text = cli("power", &code);
  struct Row {
    double total, eff, fom;
  };
  const Row want[] = {{245.13, 4.62, 3.90}, {490.25, 4.62, 3.90}, {358.79, 8.77, 5.70},
                      {89.70, 8.77, 1.43},  {529.29, 11.65, 8.41}, {132.32, 11.65, 2.10}};
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<Row> got;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    double fps, pix, rd, adc, tot, eff, fom;
    int r, s;
    if (ls >> fps >> r >> s >> pix >> rd >> adc >> tot >> eff >> fom) got.push_back({tot, eff, fom});
  }
  if (code != 0 || got.size() != 6) return {false, "power exited " + std::to_string(code)};
  bool ok = true;
  double worst = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double e = std::max({std::abs(got[i].total - want[i].total), std::abs(got[i].eff - want[i].eff),
                               std::abs(got[i].fom - want[i].fom)});
    worst = std::max(worst, e);
    ok = ok && e <= 0.01 + 1e-9;
  }
  return {ok, "max deviation " + fmt("%.3f", worst)};
}

Outcome oracle_equivalence() {
  std::mt19937_64 rng(2024);
  const int sizes[] = {16, 32, 48, 64, 96, 128};
  const int rs[] = {3, 5, 7, 9};
  const int ss[] = {2, 4};
  int instances = 0;
  double worst = 0;
  for (int i = 0; instances < 120; ++i) {
    const int px = sizes[i % 6];
    const int r = rs[(i / 6) % 4];
    const int s = ss[(i / 24) % 2];
    if (px / 2 < r) continue;
    const ValidatedConfig cfg = fixtures::sensor(px, px);
    const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
    const auto ks = fixtures::random_kernels(r, 1, rng);
    const auto sim = simulate(pm, ks, s, cfg, SimulationOptions::ideal());
    const auto ref = oracle_conv(pm, ks, s);
    worst = std::max(worst, compare(sim.maps[0], ref[0]).rms);
    ++instances;
  }
  return {worst <= 1e-6, std::to_string(instances) + " instances, worst relative RMS " + fmt("%.3g", worst)};
}

double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy * sxy / (sxx * syy);
}

// Positive-phase readout voltage of one r = 3 tile under a uniform scene,
// full chain with default leakage and the ADC bypassed.
double readout_voltage(double lux, int weight, const ValidatedConfig& cfg) {
  const PhotocurrentMap pm = photocurrents(uniform_scene(cfg, lux_to_irradiance(lux)), cfg);
  WeightKernel k;
  k.r = 3;
  k.weights = Grid<int>(6, 6, weight);
  SimulationOptions o;
  o.adc_bypass = true;
  o.record_codes = true;
  const auto sim = simulate(pm, std::span(&k, 1), 2, cfg, o);
  for (const auto& c : sim.codes)
    if (c.phase == Sign::pos) return c.volts;
  return NAN;
}

Outcome linearity() {
  const ValidatedConfig cfg = fixtures::sensor(6, 6);
  std::vector<double> lux, v_lux, w, v_w;
  for (int i = 1; i <= 20; ++i) {
    lux.push_back(250.0 * i);
    v_lux.push_back(readout_voltage(lux.back(), 64, cfg));
  }
  for (int q = 0; q <= 127; q += 8) {
    w.push_back(q);
    v_w.push_back(readout_voltage(1500.0, q, cfg));
  }
  const double a = r_squared(lux, v_lux);
  const double b = r_squared(w, v_w);
  return {a > 0.98 && b > 0.98, "R^2 vs lux " + fmt("%.6f", a) + ", vs weight " + fmt("%.6f", b)};
}

double variance(const std::vector<double>& x) {
  double m = 0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

Outcome noise_properties() {
  const ValidatedConfig cfg = fixtures::sensor(64, 64);
  NoiseModel m;
  m.reset = true;
  NoiseRng rng(123, {});
  std::vector<double> single, shared;
  for (int i = 0; i < 100000; ++i) {
    TileState t = make_tile(0, {0, 0}, 1, 1, cfg);
    apply_reset_noise(t, m, rng);
    single.push_back(t.volts[0]);
  }
  for (int i = 0; i < 100000; ++i) {
    TileState t = make_tile(0, {0, 0}, 3, 3, cfg);
    apply_reset_noise(t, m, rng);
    shared.push_back(splice_voltages(t.volts, t.caps));
  }
  const double ktc = kBoltzmann * 300.0 / cfg.c_fd();
  const double ea = std::abs(variance(single) / ktc - 1);
  const double eb = std::abs(variance(shared) / averaging_gain(3, std::sqrt(ktc)).noise_power - 1);

  std::mt19937_64 g(7);
  const PhotocurrentMap pm = fixtures::random_currents(cfg, g);
  const auto ks = fixtures::random_kernels(3, 4, g);
  const auto clean = simulate(pm, ks, 2, cfg, SimulationOptions::ideal());
  SimulationOptions o = SimulationOptions::ideal();
  NoiseModel fpn;
  fpn.offset_fpn_sigma = 5e-3;
  o.noise = fpn;
  const auto off = simulate(pm, ks, 2, cfg, o);
  double ec = 0;
  for (std::size_t c = 0; c < ks.size(); ++c) ec = std::max(ec, compare(off.maps[c], clean.maps[c]).rms);

  return {ea <= 0.05 && eb <= 0.05 && ec <= 1e-9, "kTC " + fmt("%.2f%%", 100 * ea) + ", sigma^2/9 " +
                                                       fmt("%.2f%%", 100 * eb) + ", FPN residual " + fmt("%.2g", ec)};
}

Outcome rms_trend() {
  const ValidatedConfig cfg = fixtures::sensor(64, 64);
  std::mt19937_64 g(99);
  const PhotocurrentMap pm = fixtures::random_currents(cfg, g);
  const auto ks = fixtures::random_kernels(3, 8, g);
  SweepOptions so;
  so.trials = 3;
  const auto cells = noise_sweep(pm, ks, 2, cfg, so);
  bool ok = true;
  std::string d;
  const std::size_t n_snr = so.snr_db.size();
  for (std::size_t mi = 0; mi < so.mismatch.size(); ++mi) {
    const SweepCell* row = &cells[mi * n_snr];
    for (std::size_t k = 1; k < n_snr; ++k) ok = ok && row[k].mean_rms >= row[k - 1].mean_rms;
    const double ratio = row[n_snr - 1].mean_rms / row[0].mean_rms;
    ok = ok && ratio >= 5.0;
    d += fmt("%g%%: ", 100 * so.mismatch[mi]) + fmt("%.3g", row[0].mean_rms) + " -> " +
         fmt("%.3g", row[n_snr - 1].mean_rms) + " (x" + fmt("%.1f", ratio) + ") ";
  }
  return {ok, d};
}

Outcome schedule_legality() {
  const ValidatedConfig big = fixtures::sensor(256, 256);
  int checked = 0;
  std::string bad;
  for (int r : {3, 5, 7, 9}) {
    for (int s : {2, 4}) {
      try {
        const TileSchedule sched = build_timeline(plan_steps(r, s, big, SchedulePolicy::full_coverage), big);
        double slack = INFINITY;
        for (const auto& t : sched.timeline) slack = std::min(slack, t.slack);
        if (!find_overlaps(sched).empty() || !find_coverage_errors(sched).empty() || !wiring_check(sched).ok() ||
            slack < 0)
          bad += "(" + std::to_string(r) + "," + std::to_string(s) + ") ";
        const TileSchedule acct = plan_steps(r, s, big, SchedulePolicy::paper_steps);
        if (!find_overlaps(acct).empty()) bad += "paper-steps(" + std::to_string(r) + "," + std::to_string(s) + ") ";
      } catch (const Error& e) {
        bad += "(" + std::to_string(r) + "," + std::to_string(s) + ": " + e.what() + ") ";
      }
      ++checked;
    }
  }
  const ValidatedConfig cfg = fixtures::sensor(128, 128);
  const TileSchedule p32 = plan_steps(3, 2, cfg, SchedulePolicy::paper_steps);
  const TileSchedule p52 = plan_steps(5, 2, cfg, SchedulePolicy::paper_steps);
  const bool counts = p32.steps_per_pass() == 4 && p52.steps_per_pass() == 6 && p32.max_readouts_per_step() == 11;
  return {bad.empty() && counts, std::to_string(checked) + " geometries at 256x256" +
                                     (bad.empty() ? "" : ", failing " + bad) + "; paper-steps " +
                                     std::to_string(p32.steps_per_pass()) + "/" + std::to_string(p52.steps_per_pass()) +
                                     " steps, " + std::to_string(p32.max_readouts_per_step()) + " readouts"};
}

Outcome curve_shape() {
  const ValidatedConfig cfg = fixtures::sensor(128, 128);
  std::vector<double> lux;
  for (double l = 0.1; l <= 1e7; l *= 1.25) lux.push_back(l);
  const auto comp = frame_rate_curve(lux, cfg, SensorMode::computing);
  const auto trad = frame_rate_curve(lux, cfg, SensorMode::traditional);
  const double plateau = 3.0 * 2 * cfg.f_adc() / (2.0 * cfg.height_px() * 2);
  bool ok = std::abs(comp.back().fps - plateau) <= 1e-9 * plateau;
  ok = ok && std::abs(comp[1].fps / comp[0].fps - 1.25) < 1e-9;  // proportional at low light
  bool crossed = false;
  for (std::size_t i = 0; i < lux.size(); ++i) {
    if (i) ok = ok && comp[i].fps >= comp[i - 1].fps;
    if (comp[i].fps > trad[i].fps) {
      crossed = true;
      ok = ok && trad[i].readout_limited();
    }
  }
  ok = ok && crossed;
  return {ok, "plateau " + fmt("%.1f", comp.back().fps) + " fps, traditional cap " + fmt("%.1f", trad.back().fps) +
                  " fps"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {{"rate table", table_rates},
                                {"resolution table", table_resolution},
                                {"power table", table_power},
                                {"oracle equivalence", oracle_equivalence},
                                {"linearity", linearity},
                                {"noise properties", noise_properties},
                                {"RMS trend", rms_trend},
                                {"schedule legality", schedule_legality},
                                {"frame-rate curve", curve_shape}};
  int failed = 0;
  int idx = 1;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %d %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", idx++, c.name, o.detail.c_str(), secs);
    if (!o.pass) ++failed;
  }
  return failed ? 1 : 0;
}
