#include "pipsim/optics.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

namespace pipsim {

Scene scene_from_image(const Grid<std::uint8_t>& raster, double lux_scale, const ValidatedConfig& cfg) {
  if (!(lux_scale > 0) || !std::isfinite(lux_scale))
    throw InputError("lux_scale must be a positive finite number");
  if (raster.rows() != static_cast<std::size_t>(cfg.height_px()) ||
      raster.cols() != static_cast<std::size_t>(cfg.width_px()))
    throw DimensionMismatch("raster is " + std::to_string(raster.cols()) + "x" +
                            std::to_string(raster.rows()) + ", sensor is " +
                            std::to_string(cfg.width_px()) + "x" + std::to_string(cfg.height_px()));
  Scene scene{Grid<double>(raster.rows(), raster.cols())};
  auto src = raster.flat();
  auto dst = scene.power.flat();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] / 255.0 * lux_scale;
  return scene;
}

Scene uniform_scene(const ValidatedConfig& cfg, double watts_per_m2) {
  if (!(watts_per_m2 >= 0) || !std::isfinite(watts_per_m2))
    throw InputError("irradiance must be finite and >= 0");
  return {Grid<double>(cfg.height_px(), cfg.width_px(), watts_per_m2)};
}

PhotocurrentMap photocurrents(const Scene& scene, const ValidatedConfig& cfg) {
  PhotocurrentMap out{Grid<double>(scene.power.rows(), scene.power.cols())};
  const double gain = cfg.responsivity() * cfg.pd_area();
  auto src = scene.power.flat();
  auto dst = out.amps.flat();
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!(src[i] >= 0) || !std::isfinite(src[i]))
      throw InputError("scene power must be finite and >= 0");
    dst[i] = gain * src[i];
  }
  return out;
}

namespace {

// PGM header tokens, skipping '#' comments.
std::string next_token(std::istream& in) {
  std::string tok;
  char c;
  while (in.get(c)) {
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(c);
  }
  return tok;
}

int header_int(std::istream& in, const std::string& path) {
  const std::string tok = next_token(in);
  try {
    return std::stoi(tok);
  } catch (const std::exception&) {
    throw InputError("malformed PGM header in " + path);
  }
}

}  // namespace

Grid<std::uint8_t> read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image: " + path);
  const std::string magic = next_token(in);
  if (magic != "P5" && magic != "P2") throw InputError("not a PGM file: " + path);
  const int w = header_int(in, path);
  const int h = header_int(in, path);
  const int maxval = header_int(in, path);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    throw InputError("unsupported PGM geometry or depth (8-bit only): " + path);
  Grid<std::uint8_t> img(h, w);
  if (magic == "P5") {
    in.read(reinterpret_cast<char*>(img.flat().data()), static_cast<std::streamsize>(img.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.size())) throw InputError("truncated PGM: " + path);
  } else {
    for (auto& px : img.flat()) {
      const int v = header_int(in, path);
      if (v < 0 || v > maxval) throw InputError("PGM sample out of range: " + path);
      px = static_cast<std::uint8_t>(v);
    }
  }
  if (maxval != 255)
    for (auto& px : img.flat()) px = static_cast<std::uint8_t>(std::lround(px * 255.0 / maxval));
  return img;
}

Grid<std::uint8_t> read_png(const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw InputError("cannot open image: " + path);

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("libpng initialisation failed");
  }
  Grid<std::uint8_t> img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("corrupt PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw InputError("PNG must be single-channel grayscale: " + path);
  }
  if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (depth == 16) png_set_strip_16(png);
  png_read_update_info(png, info);
  const auto w = png_get_image_width(png, info);
  const auto h = png_get_image_height(png, info);
  img = Grid<std::uint8_t>(h, w);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = &img(y, 0);
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

Grid<std::uint8_t> read_raster(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open image: " + path);
  char sig[8] = {};
  in.read(sig, sizeof sig);
  if (in.gcount() >= 8 && static_cast<unsigned char>(sig[0]) == 0x89 && sig[1] == 'P' && sig[2] == 'N' &&
      sig[3] == 'G')
    return read_png(path);
  if (in.gcount() >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '2')) return read_pgm(path);
  throw InputError("unrecognised image format (expected PGM or PNG): " + path);
}

void write_pgm(const Grid<std::uint8_t>& raster, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write image: " + path);
  out << "P5\n" << raster.cols() << " " << raster.rows() << "\n255\n";
  out.write(reinterpret_cast<const char*>(raster.flat().data()), static_cast<std::streamsize>(raster.size()));
}

void write_scene_csv(const Scene& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out.precision(17);
  out << "# scene W/m^2 rows=" << scene.power.rows() << " cols=" << scene.power.cols() << "\n";
  for (std::size_t r = 0; r < scene.power.rows(); ++r) {
    for (std::size_t c = 0; c < scene.power.cols(); ++c) {
      if (c) out << ',';
      out << scene.power(r, c);
    }
    out << '\n';
  }
}

}  // namespace pipsim
