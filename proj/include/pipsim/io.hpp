#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pipsim/core.hpp"

namespace pipsim {

inline constexpr const char* kToolVersion = "0.1.0";

struct WeightsFile {
  int r = 3;
  int s = 2;
  std::vector<WeightKernel> kernels;
};

/// Text format: header `r s channels`, then per channel 2r x 2r signed
/// integers, row-major, whitespace separated. `#` starts a comment.
/// Throws InputError on missing files, bad counts, or out-of-range weights.
WeightsFile parse_weights(const std::string& text);
WeightsFile load_weights(const std::string& path);
std::string format_weights(const WeightsFile& w);

/// CSV with `#` header lines naming channel and geometry, then one line per
/// output row (%.17g, comma separated).
std::string format_feature_map(const FeatureMap& fm);
void write_feature_map_csv(const FeatureMap& fm, const std::string& path);
FeatureMap read_feature_map_csv(const std::string& path);

/// Raw little-endian float64, row-major, plus `<path>.json` with the shape
/// and metadata.
void write_feature_map_bin(const FeatureMap& fm, const std::string& path);
FeatureMap read_feature_map_bin(const std::string& path);

struct RunManifest {
  std::string command;
  std::string config_path;
  std::string scene_path;
  std::string weights_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string version = kToolVersion;
  std::map<std::string, std::string> options;
  std::vector<std::string> outputs;
};

void write_manifest(const RunManifest& m, const std::string& path);
RunManifest read_manifest(const std::string& path);

}  // namespace pipsim
