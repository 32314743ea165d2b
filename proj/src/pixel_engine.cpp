#include "pipsim/pixel_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pipsim {

const char* to_string(TilePhase p) noexcept {
  switch (p) {
    case TilePhase::reset: return "reset";
    case TilePhase::exposing_pos: return "exposing+";
    case TilePhase::exposing_neg: return "exposing-";
    case TilePhase::ready: return "ready";
    case TilePhase::read: return "read";
  }
  return "?";
}

double TileState::total_capacitance() const noexcept {
  return std::accumulate(caps.begin(), caps.end(), 0.0);
}

TileState make_tile(int id, UnitCoord origin, int rows, int cols, const ValidatedConfig& cfg,
                    std::span<const double> caps) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("tile must contain at least one unit");
  const auto n = static_cast<std::size_t>(rows * cols);
  TileState t;
  t.id = id;
  t.origin = origin;
  t.rows = rows;
  t.cols = cols;
  if (caps.empty()) {
    t.caps.assign(n, cfg.c_fd());
  } else {
    if (caps.size() != n) throw std::invalid_argument("capacitance list does not match tile size");
    t.caps.assign(caps.begin(), caps.end());
  }
  t.volts.assign(n, cfg.v_rst());
  t.phase = TilePhase::reset;
  t.v_expose_start = cfg.v_rst();
  return t;
}

void reset_tile(TileState& tile, const ValidatedConfig& cfg) {
  std::fill(tile.volts.begin(), tile.volts.end(), cfg.v_rst());
  tile.phase = TilePhase::reset;
  tile.saturated = false;
}

double splice_voltages(std::span<const double> v, std::span<const double> c) {
  if (v.empty() || v.size() != c.size())
    throw std::invalid_argument("splice_voltages needs equal-length nonempty lists");
  double q = 0.0;
  double ctot = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(c[i] > 0)) throw std::invalid_argument("capacitances must be positive");
    q += c[i] * v[i];
    ctot += c[i];
  }
  return q / ctot;
}

namespace {

struct Pulse {
  double width;    // seconds
  double current;  // amps
};

}  // namespace

void expose_tile(TileState& tile, Sign sign, const PhaseWeights& weights, const PhotocurrentMap& currents,
                 const ValidatedConfig& cfg, const ExposureOptions& opts) {
  if (tile.phase != TilePhase::reset)
    throw NotReady("tile " + std::to_string(tile.id) + " must be reset before exposure (phase " +
                   to_string(tile.phase) + ")");
  const auto pd_rows = static_cast<std::size_t>(2 * tile.rows);
  const auto pd_cols = static_cast<std::size_t>(2 * tile.cols);
  if (weights.weights.rows() != pd_rows || weights.weights.cols() != pd_cols)
    throw DimensionMismatch("phase weights do not match tile footprint");
  const std::size_t row0 = 2 * static_cast<std::size_t>(tile.origin.row);
  const std::size_t col0 = 2 * static_cast<std::size_t>(tile.origin.col);
  if (row0 + pd_rows > currents.amps.rows() || col0 + pd_cols > currents.amps.cols())
    throw DimensionMismatch("tile exceeds the photocurrent map");

  tile.phase = sign == Sign::pos ? TilePhase::exposing_pos : TilePhase::exposing_neg;
  tile.sign = sign;

  const double k = cfg.k_expo();
  std::vector<Pulse> pulses;
  pulses.reserve(pd_rows * pd_cols);
  for (std::size_t y = 0; y < pd_rows; ++y) {
    for (std::size_t x = 0; x < pd_cols; ++x) {
      const int w = weights.weights(y, x);
      if (w < 0) throw std::invalid_argument("phase weights must be nonnegative");
      if (w == 0) continue;
      double width = k * w;
      if (opts.pwm_step && *opts.pwm_step > 0) width = std::round(width / *opts.pwm_step) * *opts.pwm_step;
      const double dark = opts.dark_map ? (*opts.dark_map)(row0 + y, col0 + x) : cfg.i_dark();
      pulses.push_back({width, currents.amps(row0 + y, col0 + x) + dark});
    }
  }

  const double ctot = tile.total_capacitance();
  double v = splice_voltages(tile.volts, tile.caps);
  tile.v_expose_start = v;
  const double window = std::max(cfg.exposure_window(),
                                 pulses.empty() ? 0.0
                                                : std::max_element(pulses.begin(), pulses.end(),
                                                                   [](const Pulse& a, const Pulse& b) {
                                                                     return a.width < b.width;
                                                                   })->width) +
                        opts.hold_time;

  const bool leaky = opts.leakage && std::isfinite(cfg.r_leak());
  if (!leaky) {
    double charge = 0.0;
    for (const auto& p : pulses) charge += p.current * p.width;
    v -= charge / ctot;
  } else {
    // C dV/dt = -I(t) - n V / R on the shared node; I(t) piecewise constant.
    std::sort(pulses.begin(), pulses.end(), [](const Pulse& a, const Pulse& b) { return a.width < b.width; });
    const double conductance = tile.unit_count() / cfg.r_leak();
    const double tau = ctot / conductance;
    double i_now = 0.0;
    for (const auto& p : pulses) i_now += p.current;
    double t = 0.0;
    auto advance = [&](double until) {
      const double dt = until - t;
      if (dt <= 0) return;
      const double v_inf = -i_now / conductance;
      v += (v_inf - v) * -std::expm1(-dt / tau);
      t = until;
    };
    for (const auto& p : pulses) {
      advance(p.width);
      i_now -= p.current;
    }
    i_now = 0.0;
    advance(window);
  }

  if (v < cfg.v_min()) {
    v = cfg.v_min();
    tile.saturated = true;
  }
  std::fill(tile.volts.begin(), tile.volts.end(), v);
  tile.phase = TilePhase::ready;
}

double auto_exposure_constant(std::span<const double> tile_loads, const ValidatedConfig& cfg) {
  const double budget = 0.9 * (cfg.v_rst() - cfg.v_min());
  double worst = 0.0;
  for (double l : tile_loads) worst = std::max(worst, l);
  if (worst <= 0) return cfg.k_expo();
  return std::min(cfg.k_expo(), budget / worst);
}

}  // namespace pipsim
