#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "pipsim/core.hpp"
#include "pipsim/optics.hpp"

namespace fixtures {

using namespace pipsim;

inline ValidatedConfig sensor(int height_px, int width_px) {
  SensorConfig c;
  c.height_px = height_px;
  c.width_px = width_px;
  return validate_config(c);
}

inline Grid<std::uint8_t> random_raster(int h, int w, std::mt19937_64& rng) {
  Grid<std::uint8_t> g(static_cast<std::size_t>(h), static_cast<std::size_t>(w));
  std::uniform_int_distribution<int> d(0, 255);
  for (auto& v : g.flat()) v = static_cast<std::uint8_t>(d(rng));
  return g;
}

inline PhotocurrentMap random_currents(const ValidatedConfig& cfg, std::mt19937_64& rng) {
  const auto raster = random_raster(cfg.height_px(), cfg.width_px(), rng);
  return photocurrents(scene_from_image(raster, kDefaultLuxScale, cfg), cfg);
}

inline WeightKernel random_kernel(int r, int channel, std::mt19937_64& rng) {
  WeightKernel k;
  k.r = r;
  k.channel_id = channel;
  k.weights = Grid<int>(static_cast<std::size_t>(2 * r), static_cast<std::size_t>(2 * r));
  std::uniform_int_distribution<int> d(-128, 127);
  for (auto& w : k.weights.flat()) w = d(rng);
  return k;
}

inline std::vector<WeightKernel> random_kernels(int r, int n, std::mt19937_64& rng) {
  std::vector<WeightKernel> ks;
  for (int c = 0; c < n; ++c) ks.push_back(random_kernel(r, c, rng));
  return ks;
}

// Independent reference: walks pixel units and their four colour planes
// explicitly instead of the flat photodiode window.
inline std::vector<std::vector<double>> brute_conv(const Grid<double>& amps, const WeightKernel& k, int s) {
  const int units_h = static_cast<int>(amps.rows()) / 2;
  const int units_w = static_cast<int>(amps.cols()) / 2;
  std::vector<std::vector<double>> out;
  for (int i = 0; i * s + k.r <= units_h; ++i) {
    std::vector<double> row;
    for (int j = 0; j * s + k.r <= units_w; ++j) {
      double acc = 0;
      for (int uy = 0; uy < k.r; ++uy)
        for (int ux = 0; ux < k.r; ++ux)
          for (int plane = 0; plane < 4; ++plane) {
            const int dy = plane / 2, dx = plane % 2;
            const int py = 2 * uy + dy, px = 2 * ux + dx;
            acc += amps(static_cast<std::size_t>(2 * (i * s + uy) + dy), static_cast<std::size_t>(2 * (j * s + ux) + dx)) *
                   k.weights(static_cast<std::size_t>(py), static_cast<std::size_t>(px));
          }
      row.push_back(acc);
    }
    out.push_back(row);
  }
  return out;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pipsim_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixtures
