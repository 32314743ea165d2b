#include "pipsim/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace pipsim {

namespace {

std::string slurp(const std::string& path, const char* what) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError(std::string("cannot open ") + what + ": " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string strip_comments(const std::string& text) {
  std::string out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    out += line;
    out += '\n';
  }
  return out;
}

MapSource parse_source(const std::string& s) {
  if (s == "oracle") return MapSource::oracle;
  if (s == "ideal") return MapSource::ideal;
  if (s == "noisy") return MapSource::noisy;
  throw InputError("unknown map source: " + s);
}

std::map<std::string, std::string> header_fields(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream in(line.substr(1));
  std::string tok;
  while (in >> tok) {
    const auto eq = tok.find('=');
    if (eq != std::string::npos) kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

void apply_info(FeatureMapInfo& info, const std::map<std::string, std::string>& kv) {
  try {
    if (auto it = kv.find("channel"); it != kv.end()) info.channel_id = std::stoi(it->second);
    if (auto it = kv.find("r"); it != kv.end()) info.r = std::stoi(it->second);
    if (auto it = kv.find("stride"); it != kv.end()) info.stride = std::stoi(it->second);
    if (auto it = kv.find("policy"); it != kv.end()) info.policy = parse_policy(it->second);
    if (auto it = kv.find("source"); it != kv.end()) info.source = parse_source(it->second);
    if (auto it = kv.find("seed"); it != kv.end() && it->second != "none") info.seed = std::stoull(it->second);
    if (auto it = kv.find("adc"); it != kv.end()) info.adc = it->second == "on";
    if (auto it = kv.find("units"); it != kv.end()) info.units = it->second;
  } catch (const std::logic_error&) {
    throw InputError("malformed feature-map header");
  }
}

std::string info_line(const FeatureMapInfo& info) {
  std::ostringstream o;
  o << "# channel=" << info.channel_id << " r=" << info.r << " stride=" << info.stride
    << " policy=" << to_string(info.policy) << " source=" << to_string(info.source)
    << " seed=" << (info.seed ? std::to_string(*info.seed) : std::string("none"))
    << " adc=" << (info.adc ? "on" : "off") << " units=" << info.units;
  return o.str();
}

}  // namespace

WeightsFile parse_weights(const std::string& text) {
  std::istringstream in(strip_comments(text));
  WeightsFile wf;
  int channels = 0;
  if (!(in >> wf.r >> wf.s >> channels)) throw InputError("weights header must be 'r s channels'");
  if (wf.r < 1 || wf.r % 2 == 0) throw InputError("weights: r must be odd and >= 1");
  if (wf.s < 1) throw InputError("weights: stride must be >= 1");
  if (channels < 1) throw InputError("weights: channel count must be >= 1");
  const auto side = static_cast<std::size_t>(2 * wf.r);
  for (int c = 0; c < channels; ++c) {
    WeightKernel k;
    k.r = wf.r;
    k.channel_id = c;
    k.weights = Grid<int>(side, side);
    for (auto& w : k.weights.flat()) {
      long long v;
      if (!(in >> v))
        throw InputError("weights: channel " + std::to_string(c) + " has fewer than " +
                         std::to_string(side * side) + " values");
      if (v < WeightKernel::kMin || v > WeightKernel::kMax)
        throw InputError("weights: value " + std::to_string(v) + " outside [-128, 127]");
      w = static_cast<int>(v);
    }
    wf.kernels.push_back(std::move(k));
  }
  std::string extra;
  if (in >> extra) throw InputError("weights: trailing data after " + std::to_string(channels) + " channels");
  return wf;
}

WeightsFile load_weights(const std::string& path) { return parse_weights(slurp(path, "weights file")); }

std::string format_weights(const WeightsFile& w) {
  std::ostringstream o;
  o << w.r << ' ' << w.s << ' ' << w.kernels.size() << '\n';
  for (const auto& k : w.kernels) {
    o << "# channel " << k.channel_id << '\n';
    for (std::size_t y = 0; y < k.weights.rows(); ++y) {
      for (std::size_t x = 0; x < k.weights.cols(); ++x) o << (x ? " " : "") << k.weights(y, x);
      o << '\n';
    }
  }
  return o.str();
}

std::string format_feature_map(const FeatureMap& fm) {
  std::string out = info_line(fm.info) + "\n# rows=" + std::to_string(fm.values.rows()) +
                    " cols=" + std::to_string(fm.values.cols()) + "\n";
  char buf[40];
  for (std::size_t y = 0; y < fm.values.rows(); ++y) {
    for (std::size_t x = 0; x < fm.values.cols(); ++x) {
      std::snprintf(buf, sizeof buf, "%.17g", fm.values(y, x));
      if (x) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_feature_map_csv(const FeatureMap& fm, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << format_feature_map(fm);
}

FeatureMap read_feature_map_csv(const std::string& path) {
  std::istringstream in(slurp(path, "feature map"));
  FeatureMap fm;
  std::map<std::string, std::string> kv;
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      for (auto& [k, v] : header_fields(line)) kv[k] = v;
      continue;
    }
    std::vector<double> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::logic_error&) {
        throw InputError("feature map " + path + ": bad value '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) throw InputError("feature map " + path + ": ragged rows");
    rows.push_back(std::move(row));
  }
  apply_info(fm.info, kv);
  fm.values = Grid<double>(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t y = 0; y < rows.size(); ++y)
    for (std::size_t x = 0; x < rows[y].size(); ++x) fm.values(y, x) = rows[y][x];
  return fm;
}

void write_feature_map_bin(const FeatureMap& fm, const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "binary feature maps assume a little-endian host");
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  auto flat = fm.values.flat();
  f.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(double)));

  nlohmann::ordered_json j;
  j["dtype"] = "<f8";
  j["rows"] = fm.values.rows();
  j["cols"] = fm.values.cols();
  j["channel"] = fm.info.channel_id;
  j["r"] = fm.info.r;
  j["stride"] = fm.info.stride;
  j["policy"] = to_string(fm.info.policy);
  j["source"] = to_string(fm.info.source);
  j["seed"] = fm.info.seed ? nlohmann::ordered_json(*fm.info.seed) : nlohmann::ordered_json(nullptr);
  j["adc"] = fm.info.adc;
  j["units"] = fm.info.units;
  std::ofstream side(path + ".json");
  if (!side) throw InputError("cannot write " + path + ".json");
  side << j.dump(2) << '\n';
}

FeatureMap read_feature_map_bin(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(path + ".json", "feature-map sidecar"));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ".json: " + e.what());
  }
  FeatureMap fm;
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  fm.values = Grid<double>(rows, cols);
  const std::string raw = slurp(path, "feature-map binary");
  if (raw.size() != rows * cols * sizeof(double)) throw InputError(path + ": size does not match sidecar shape");
  std::memcpy(fm.values.flat().data(), raw.data(), raw.size());
  fm.info.channel_id = j.value("channel", 0);
  fm.info.r = j.value("r", 3);
  fm.info.stride = j.value("stride", 2);
  fm.info.policy = parse_policy(j.value("policy", std::string("full-coverage")));
  fm.info.source = parse_source(j.value("source", std::string("oracle")));
  if (j.contains("seed") && !j["seed"].is_null()) fm.info.seed = j["seed"].get<std::uint64_t>();
  fm.info.adc = j.value("adc", false);
  fm.info.units = j.value("units", std::string("A*LSB"));
  return fm;
}

void write_manifest(const RunManifest& m, const std::string& path) {
  nlohmann::ordered_json j;
  j["tool"] = "pipsim";
  j["version"] = m.version;
  j["command"] = m.command;
  j["config"] = m.config_path;
  j["scene"] = m.scene_path;
  j["weights"] = m.weights_path;
  j["seed"] = m.seed ? nlohmann::ordered_json(*m.seed) : nlohmann::ordered_json(nullptr);
  j["out"] = m.out_dir;
  j["options"] = m.options;
  j["outputs"] = m.outputs;
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path);
  f << j.dump(2) << '\n';
}

RunManifest read_manifest(const std::string& path) {
  RunManifest m;
  try {
    const auto j = nlohmann::json::parse(slurp(path, "manifest"));
    m.version = j.at("version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config_path = j.value("config", std::string());
    m.scene_path = j.value("scene", std::string());
    m.weights_path = j.value("weights", std::string());
    if (j.contains("seed") && !j["seed"].is_null()) m.seed = j["seed"].get<std::uint64_t>();
    m.out_dir = j.value("out", std::string());
    m.options = j.value("options", std::map<std::string, std::string>{});
    m.outputs = j.value("outputs", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return m;
}

}  // namespace pipsim
