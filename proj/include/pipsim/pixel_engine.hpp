#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pipsim/core.hpp"

namespace pipsim {

struct UnitCoord {
  int row = 0;
  int col = 0;
  friend bool operator==(const UnitCoord&, const UnitCoord&) = default;
};

enum class TilePhase { reset, exposing_pos, exposing_neg, ready, read };
enum class Sign { pos, neg };

const char* to_string(TilePhase p) noexcept;

/// A rows x cols block of spliced pixel units. Voltages and capacitances are
/// stored row-major per unit.
struct TileState {
  int id = 0;
  UnitCoord origin;
  int rows = 0;
  int cols = 0;
  std::vector<double> caps;
  std::vector<double> volts;
  TilePhase phase = TilePhase::reset;
  Sign sign = Sign::pos;
  bool saturated = false;
  double v_expose_start = 0.0;  // shared voltage when exposure began

  int unit_count() const noexcept { return rows * cols; }
  double total_capacitance() const noexcept;
  bool contains(UnitCoord u) const noexcept {
    return u.row >= origin.row && u.row < origin.row + rows && u.col >= origin.col && u.col < origin.col + cols;
  }
};

/// New tile in the reset phase with every unit at v_rst. When `caps` is empty
/// every unit gets the nominal c_fd; otherwise it must hold rows*cols values.
TileState make_tile(int id, UnitCoord origin, int rows, int cols, const ValidatedConfig& cfg,
                    std::span<const double> caps = {});

/// Forces every unit to v_rst regardless of phase or capacitance.
void reset_tile(TileState& tile, const ValidatedConfig& cfg);

struct ExposureOptions {
  bool leakage = true;
  /// Extra hold time between the end of the PWM window and readout [s].
  double hold_time = 0.0;
  /// Quantise each pulse width to a multiple of this step [s]; nullopt = continuous.
  std::optional<double> pwm_step;
  /// Per-photodiode dark current [A] (width_px x height_px); null = cfg.i_dark everywhere.
  const Grid<double>* dark_map = nullptr;
};

/// Integrates one PWM exposure phase. Every photodiode i of the tile
/// (2*rows x 2*cols, mapped from `weights`) sources I_i + I_dark for k*w_i
/// seconds (start-aligned pulses) into the spliced FD node; all units settle
/// at the shared voltage
///     U = splice(U_units) - k * sum((I_i + I_dark) * w_i) / sum(C_j)
/// With leakage each unit discharges through r_leak toward 0 V for the whole
/// window (k * 128 plus hold_time), solved piecewise analytically. Voltages
/// below v_min clamp and set `saturated`.
/// Precondition: tile in the reset phase (throws NotReady otherwise).
void expose_tile(TileState& tile, Sign sign, const PhaseWeights& weights, const PhotocurrentMap& currents,
                 const ValidatedConfig& cfg, const ExposureOptions& opts = {});

/// Charge-sharing voltage sum(C_j V_j) / sum(C_j).
/// Throws std::invalid_argument on empty/mismatched input or non-positive caps.
double splice_voltages(std::span<const double> unit_voltages, std::span<const double> unit_caps);

/// Largest exposure constant keeping the worst phase drop of every tile at or
/// below 0.9 * (v_rst - v_min), capped at the configured k_expo.
/// `tile_loads` holds, per tile and phase, sum((I_i + I_dark) * w_i) / C_tile [V/s].
double auto_exposure_constant(std::span<const double> tile_loads, const ValidatedConfig& cfg);

}  // namespace pipsim
