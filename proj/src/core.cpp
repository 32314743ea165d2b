#include "pipsim/core.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <thread>

namespace pipsim {

namespace {

std::string join_lines(const std::vector<std::string>& items) {
  std::string out = "invalid sensor configuration:";
  for (const auto& v : items) out += "\n  - " + v;
  return out;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

InvalidConfig::InvalidConfig(std::vector<std::string> violations)
    : Error(ErrorKind::config, join_lines(violations)), violations_(std::move(violations)) {}

ValidatedConfig validate_config(const SensorConfig& in) {
  SensorConfig cfg = in;
  std::vector<std::string> bad;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) bad.push_back(msg);
  };
  auto finite = [](double v) { return std::isfinite(v); };

  need(cfg.width_px >= 4, "width_px must be >= 4");
  need(cfg.height_px >= 4, "height_px must be >= 4");
  need(cfg.width_px % 2 == 0, "width_px must be even");
  need(cfg.height_px % 2 == 0, "height_px must be even");
  need(finite(cfg.c_fd) && cfg.c_fd > 0, "c_fd must be > 0");
  // r_leak may be +inf (leakage disabled)
  need(!std::isnan(cfg.r_leak) && cfg.r_leak > 0, "r_leak must be > 0");
  need(finite(cfg.v_rst) && finite(cfg.v_min), "v_rst and v_min must be finite");
  need(cfg.v_min >= 0, "v_min must be >= 0");
  need(cfg.v_rst > cfg.v_min, "v_rst must exceed v_min");
  need(finite(cfg.responsivity) && cfg.responsivity >= 0, "responsivity must be >= 0");
  need(finite(cfg.pd_area) && cfg.pd_area > 0, "pd_area must be > 0");
  need(finite(cfg.i_dark) && cfg.i_dark >= 0, "i_dark must be >= 0");
  need(finite(cfg.t_rst) && cfg.t_rst > 0, "t_rst must be > 0");
  need(finite(cfg.t_expo_max) && cfg.t_expo_max > 0, "t_expo_max must be > 0");
  need(finite(cfg.f_adc) && cfg.f_adc > 0, "f_adc must be > 0");
  need(cfg.adc_bits >= 1 && cfg.adc_bits <= 16, "adc_bits must be in [1, 16]");
  need(finite(cfg.t_rd) && cfg.t_rd >= 0, "t_rd must be >= 0 (0 derives 3 / f_adc)");
  need(finite(cfg.k_expo) && cfg.k_expo >= 0, "k_expo must be >= 0 (0 derives t_expo_max / 128)");

  if (!bad.empty()) throw InvalidConfig(std::move(bad));

  if (cfg.t_rd == 0) cfg.t_rd = 3.0 / cfg.f_adc;
  if (cfg.k_expo == 0) cfg.k_expo = cfg.t_expo_max / ValidatedConfig::kPwmPeriod;
  if (!(cfg.k_expo > 0)) throw InvalidConfig({"k_expo must be > 0"});
  return ValidatedConfig(cfg);
}

ValidatedConfig ValidatedConfig::with_k_expo(double k) const {
  if (!std::isfinite(k) || k <= 0) throw InvalidConfig({"k_expo must be > 0"});
  SensorConfig c = cfg_;
  c.k_expo = k;
  return ValidatedConfig(c);
}

namespace {

using Setter = std::function<void(SensorConfig&, const std::string&)>;

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || trim(v.substr(used)) != "")
    throw InvalidConfig({"config key '" + key + "': not a number: '" + v + "'"});
  return out;
}

int parse_int(const std::string& key, const std::string& v) {
  const double d = parse_double(key, v);
  if (d != std::floor(d) || std::abs(d) > 1e9)
    throw InvalidConfig({"config key '" + key + "': not an integer: '" + v + "'"});
  return static_cast<int>(d);
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"width_px", [](SensorConfig& c, const std::string& v) { c.width_px = parse_int("width_px", v); }},
      {"height_px", [](SensorConfig& c, const std::string& v) { c.height_px = parse_int("height_px", v); }},
      {"c_fd", [](SensorConfig& c, const std::string& v) { c.c_fd = parse_double("c_fd", v); }},
      {"r_leak", [](SensorConfig& c, const std::string& v) { c.r_leak = parse_double("r_leak", v); }},
      {"v_rst", [](SensorConfig& c, const std::string& v) { c.v_rst = parse_double("v_rst", v); }},
      {"v_min", [](SensorConfig& c, const std::string& v) { c.v_min = parse_double("v_min", v); }},
      {"responsivity", [](SensorConfig& c, const std::string& v) { c.responsivity = parse_double("responsivity", v); }},
      {"pd_area", [](SensorConfig& c, const std::string& v) { c.pd_area = parse_double("pd_area", v); }},
      {"i_dark", [](SensorConfig& c, const std::string& v) { c.i_dark = parse_double("i_dark", v); }},
      {"t_rst", [](SensorConfig& c, const std::string& v) { c.t_rst = parse_double("t_rst", v); }},
      {"t_rd", [](SensorConfig& c, const std::string& v) { c.t_rd = parse_double("t_rd", v); }},
      {"t_expo_max", [](SensorConfig& c, const std::string& v) { c.t_expo_max = parse_double("t_expo_max", v); }},
      {"k_expo", [](SensorConfig& c, const std::string& v) { c.k_expo = parse_double("k_expo", v); }},
      {"adc_bits", [](SensorConfig& c, const std::string& v) { c.adc_bits = parse_int("adc_bits", v); }},
      {"f_adc", [](SensorConfig& c, const std::string& v) { c.f_adc = parse_double("f_adc", v); }},
  };
  return table;
}

}  // namespace

SensorConfig parse_config(const std::string& text) {
  SensorConfig cfg;
  std::vector<std::string> bad;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      bad.push_back("line " + std::to_string(lineno) + ": expected 'key = value'");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) {
      bad.push_back("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
      continue;
    }
    try {
      it->second(cfg, value);
    } catch (const InvalidConfig& e) {
      for (const auto& v : e.violations()) bad.push_back("line " + std::to_string(lineno) + ": " + v);
    }
  }
  if (!bad.empty()) throw InvalidConfig(std::move(bad));
  return cfg;
}

SensorConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string format_config(const SensorConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "width_px = " << c.width_px << "\n"
    << "height_px = " << c.height_px << "\n"
    << "c_fd = " << c.c_fd << "\n"
    << "r_leak = " << c.r_leak << "\n"
    << "v_rst = " << c.v_rst << "\n"
    << "v_min = " << c.v_min << "\n"
    << "responsivity = " << c.responsivity << "\n"
    << "pd_area = " << c.pd_area << "\n"
    << "i_dark = " << c.i_dark << "\n"
    << "t_rst = " << c.t_rst << "\n"
    << "t_rd = " << c.t_rd << "\n"
    << "t_expo_max = " << c.t_expo_max << "\n"
    << "k_expo = " << c.k_expo << "\n"
    << "adc_bits = " << c.adc_bits << "\n"
    << "f_adc = " << c.f_adc << "\n";
  return o.str();
}

const char* to_string(ColorPlane p) noexcept {
  switch (p) {
    case ColorPlane::R: return "R";
    case ColorPlane::G1: return "G1";
    case ColorPlane::G2: return "G2";
    case ColorPlane::B: return "B";
  }
  return "?";
}

void WeightKernel::validate() const {
  if (r < 1 || r % 2 == 0)
    throw InputError("kernel side r must be odd and >= 1, got " + std::to_string(r));
  const auto side = static_cast<std::size_t>(2 * r);
  if (weights.rows() != side || weights.cols() != side)
    throw InputError("kernel weights must be " + std::to_string(side) + "x" + std::to_string(side));
  for (int w : weights.flat())
    if (w < kMin || w > kMax) throw InputError("weight out of [-128, 127]: " + std::to_string(w));
}

long long WeightKernel::weight_sum() const {
  long long s = 0;
  for (int w : weights.flat()) s += w;
  return s;
}

std::pair<PhaseWeights, PhaseWeights> decompose_weights(const WeightKernel& kernel) {
  PhaseWeights pos{Grid<int>(kernel.weights.rows(), kernel.weights.cols())};
  PhaseWeights neg{Grid<int>(kernel.weights.rows(), kernel.weights.cols())};
  auto src = kernel.weights.flat();
  auto p = pos.weights.flat();
  auto n = neg.weights.flat();
  for (std::size_t i = 0; i < src.size(); ++i) {
    p[i] = src[i] > 0 ? src[i] : 0;
    n[i] = src[i] < 0 ? -src[i] : 0;
  }
  return {std::move(pos), std::move(neg)};
}

const char* to_string(SchedulePolicy p) noexcept {
  return p == SchedulePolicy::paper_steps ? "paper-steps" : "full-coverage";
}

SchedulePolicy parse_policy(const std::string& s) {
  if (s == "paper-steps") return SchedulePolicy::paper_steps;
  if (s == "full-coverage") return SchedulePolicy::full_coverage;
  throw InputError("unknown schedule policy: " + s);
}

const char* to_string(MapSource s) noexcept {
  switch (s) {
    case MapSource::oracle: return "oracle";
    case MapSource::ideal: return "ideal";
    case MapSource::noisy: return "noisy";
  }
  return "?";
}

OutputGeometry output_geometry(int unit_rows, int unit_cols, int r, int stride) {
  if (r < 1 || stride < 1)
    throw UnsupportedGeometry("kernel side and stride must be positive");
  if (unit_rows < r || unit_cols < r)
    throw UnsupportedGeometry("a " + std::to_string(r) + "x" + std::to_string(r) +
                              "-unit kernel does not fit a " + std::to_string(unit_rows) + "x" +
                              std::to_string(unit_cols) + "-unit array");
  return {(unit_rows - r) / stride + 1, (unit_cols - r) / stride + 1};
}

unsigned worker_threads() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PIPSIM_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && cap >= 1) n = std::min<unsigned>(n, static_cast<unsigned>(cap));
  }
  return n;
}

}  // namespace pipsim
