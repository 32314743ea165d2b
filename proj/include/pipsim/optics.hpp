#pragma once

#include <cstdint>
#include <string>

#include "pipsim/core.hpp"

namespace pipsim {

/// Optical power density reaching each photodiode after its colour filter [W/m^2].
struct Scene {
  Grid<double> power;
};

/// Photometric-to-radiometric approximation at 555 nm: 1 lux ~ 1/683 W/m^2.
constexpr double kLumensPerWatt555 = 683.0;
constexpr double lux_to_irradiance(double lux) noexcept { return lux / kLumensPerWatt555; }

/// Default full-scale irradiance for 8-bit rasters (about 1500 lux).
constexpr double kDefaultLuxScale = 1500.0 / kLumensPerWatt555;

/// P_in = code / 255 * lux_scale. The raster is an already-mosaicked RGGB frame.
/// Throws DimensionMismatch when the raster is not width_px x height_px and
/// InputError when lux_scale <= 0.
Scene scene_from_image(const Grid<std::uint8_t>& raster, double lux_scale, const ValidatedConfig& cfg);

/// Uniform scene at the given irradiance.
Scene uniform_scene(const ValidatedConfig& cfg, double watts_per_m2);

/// I = responsivity * P_in * pd_area, elementwise.
PhotocurrentMap photocurrents(const Scene& scene, const ValidatedConfig& cfg);

/// 8-bit rasters: binary/ASCII PGM (P5/P2, maxval <= 255) and single-channel PNG.
Grid<std::uint8_t> read_pgm(const std::string& path);
Grid<std::uint8_t> read_png(const std::string& path);
/// Dispatches on the file signature.
Grid<std::uint8_t> read_raster(const std::string& path);
void write_pgm(const Grid<std::uint8_t>& raster, const std::string& path);

void write_scene_csv(const Scene& scene, const std::string& path);

}  // namespace pipsim
