#include "pipsim/noise.hpp"

#include <cmath>

namespace pipsim {

NoiseModel NoiseModel::typical(std::uint64_t seed) {
  NoiseModel m;
  m.shot = true;
  m.reset = true;
  m.read_sigma = 0.25e-3;
  m.seed = seed;
  return m;
}

void NoiseModel::validate() const {
  for (double s : {read_sigma, dsnu_sigma, prnu_sigma, offset_fpn_sigma, mismatch_sigma})
    if (!(s >= 0) || !std::isfinite(s)) throw InputError("noise sigmas must be finite and >= 0");
  if (!(temperature > 0)) throw InputError("temperature must be > 0");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
  std::uint64_t h = splitmix64(seed);
  for (auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

NoiseRng::NoiseRng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) : engine_(mix_seed(seed, keys)) {}

double NoiseRng::normal(double sigma) {
  if (sigma == 0) return 0.0;
  return std::normal_distribution<double>(0.0, sigma)(engine_);
}

std::uint64_t NoiseRng::poisson(double mean) {
  if (!(mean > 0)) return 0;
  return std::poisson_distribution<std::uint64_t>(mean)(engine_);
}

double ktc_sigma(double capacitance, double temperature) {
  return std::sqrt(kBoltzmann * temperature / capacitance);
}

Grid<double> apply_mismatch(const ValidatedConfig& cfg, double sigma_c, std::uint64_t seed) {
  if (!(sigma_c >= 0)) throw InputError("mismatch sigma must be >= 0");
  Grid<double> caps(cfg.unit_height(), cfg.unit_width(), cfg.c_fd());
  if (sigma_c == 0) return caps;
  NoiseRng rng(seed, {0x6361707300ULL});  // "caps"
  const double c0 = cfg.c_fd();
  for (auto& c : caps.flat()) {
    double z;
    do {
      z = rng.normal();
    } while (std::abs(z) > 4.0);
    c = std::max(c0 * (1.0 + sigma_c * z), 0.1 * c0);
  }
  return caps;
}

std::vector<double> FixedPattern::tile_caps(UnitCoord origin, int rows, int cols) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows * cols));
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x)
      out.push_back(caps(static_cast<std::size_t>(origin.row + y), static_cast<std::size_t>(origin.col + x)));
  return out;
}

FixedPattern make_fixed_pattern(const NoiseModel& model, const ValidatedConfig& cfg) {
  model.validate();
  FixedPattern fp;
  fp.caps = apply_mismatch(cfg, model.mismatch_sigma, model.seed);
  fp.offsets = Grid<double>(cfg.unit_height(), cfg.unit_width());
  fp.prnu_gain = Grid<double>(cfg.height_px(), cfg.width_px(), 1.0);
  fp.dark = Grid<double>(cfg.height_px(), cfg.width_px(), cfg.i_dark());
  if (model.offset_fpn_sigma > 0) {
    NoiseRng rng(model.seed, {0x6f66667365ULL});
    for (auto& o : fp.offsets.flat()) o = rng.normal(model.offset_fpn_sigma);
  }
  if (model.prnu_sigma > 0) {
    NoiseRng rng(model.seed, {0x70726e75ULL});
    for (auto& g : fp.prnu_gain.flat()) g = std::max(0.0, 1.0 + rng.normal(model.prnu_sigma));
  }
  if (model.dsnu_sigma > 0) {
    NoiseRng rng(model.seed, {0x64736e75ULL});
    for (auto& d : fp.dark.flat()) d += rng.normal(model.dsnu_sigma);
  }
  return fp;
}

PhotocurrentMap apply_prnu(const PhotocurrentMap& currents, const FixedPattern& fpn) {
  if (fpn.prnu_gain.rows() != currents.amps.rows() || fpn.prnu_gain.cols() != currents.amps.cols())
    throw DimensionMismatch("PRNU map does not match the photocurrent map");
  PhotocurrentMap out = currents;
  auto dst = out.amps.flat();
  auto gain = fpn.prnu_gain.flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] *= gain[i];
  return out;
}

void apply_reset_noise(TileState& tile, const NoiseModel& model, NoiseRng& rng) {
  if (!model.reset) return;
  for (std::size_t i = 0; i < tile.volts.size(); ++i)
    tile.volts[i] += rng.normal(ktc_sigma(tile.caps[i], model.temperature));
}

void apply_shot_noise(TileState& tile, const NoiseModel& model, NoiseRng& rng) {
  if (!model.shot) return;
  const double ctot = tile.total_capacitance();
  const double v_now = tile.volts.empty() ? tile.v_expose_start : tile.volts.front();
  const double charge = ctot * (tile.v_expose_start - v_now);
  if (charge <= 0) return;
  const double electrons = static_cast<double>(rng.poisson(charge / kElementaryCharge));
  const double v = tile.v_expose_start - electrons * kElementaryCharge / ctot;
  std::fill(tile.volts.begin(), tile.volts.end(), v);
}

double apply_read_noise(double volts, UnitCoord read_unit, const NoiseModel& model, const FixedPattern* fpn,
                        NoiseRng& rng) {
  double v = volts + rng.normal(model.read_sigma);
  if (fpn && !fpn->offsets.empty())
    v += fpn->offsets(static_cast<std::size_t>(read_unit.row), static_cast<std::size_t>(read_unit.col));
  return v;
}

const std::vector<double>& sample_noise(TileState& tile, NoiseEvent event, const NoiseModel& model, NoiseRng& rng,
                                        const FixedPattern* fpn) {
  switch (event) {
    case NoiseEvent::reset: apply_reset_noise(tile, model, rng); break;
    case NoiseEvent::exposure_end: apply_shot_noise(tile, model, rng); break;
    case NoiseEvent::readout:
      for (int y = 0; y < tile.rows; ++y) {
        for (int x = 0; x < tile.cols; ++x) {
          auto& v = tile.volts[static_cast<std::size_t>(y * tile.cols + x)];
          v = apply_read_noise(v, {tile.origin.row + y, tile.origin.col + x}, model, fpn, rng);
        }
      }
      break;
  }
  return tile.volts;
}

AveragingGain averaging_gain(int r, double sigma) {
  if (r < 1 || !(sigma >= 0)) throw InputError("averaging_gain needs r >= 1 and sigma >= 0");
  const double n = static_cast<double>(r) * r;
  return {sigma * sigma / n, n};
}

double inject_target_snr(double signal_power, double snr_db) {
  if (!(signal_power > 0)) throw InputError("signal power must be > 0 for SNR injection");
  if (std::isinf(snr_db) && snr_db > 0) return 0.0;
  return std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
}

}  // namespace pipsim
