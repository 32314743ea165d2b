#pragma once

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "pipsim/core.hpp"
#include "pipsim/pixel_engine.hpp"
#include "pipsim/scheduler.hpp"

namespace pipsim {

/// Column ADC: round-to-nearest over [v_lo, v_hi]. `bypass` passes the analog
/// voltage through unquantised (oracle runs).
struct AdcModel {
  int bits = 10;
  double v_lo = 0.4;
  double v_hi = 1.8;
  double f_adc = 330e3;
  bool bypass = false;

  static AdcModel from_config(const ValidatedConfig& cfg, bool bypass = false);
  int max_code() const noexcept { return (1 << bits) - 1; }
  double lsb() const noexcept { return (v_hi - v_lo) / max_code(); }
};

struct Conversion {
  int code = 0;
  bool clamped = false;
};

/// code = clamp(round((v - v_lo) / (v_hi - v_lo) * (2^bits - 1)), 0, 2^bits - 1)
Conversion quantize(double volts, const AdcModel& adc);
double dequantize(int code, const AdcModel& adc);

struct ReadoutSample {
  int tile_id = 0;
  Sign phase = Sign::pos;
  double volts = 0;  // analog value presented to the ADC
  int code = -1;     // -1 in bypass mode
  bool clamped = false;

  double value(const AdcModel& adc) const { return adc.bypass ? volts : dequantize(code, adc); }
};

ReadoutSample convert(int tile_id, Sign phase, double volts, const AdcModel& adc);

struct MacValue {
  double mac = 0;    // reconstructed sum(I_i * w_i) [A * LSB]
  double scale = 0;  // units * c_fd / k_expo applied to the voltage difference
};

struct SubtractOptions {
  /// Remove the residual i_dark * sum(w) term left by the two-phase difference.
  bool dark_correction = false;
  long long weight_sum = 0;
};

/// (U- - U+) * units * c_fd / k_expo with `units` the spliced unit count of
/// the tile. Throws PhaseMismatch unless both samples come from the same
/// tile with opposite phases.
MacValue subtract_phases(const ReadoutSample& neg, const ReadoutSample& pos, const AdcModel& adc, int units,
                         const ValidatedConfig& cfg, const SubtractOptions& opts = {});

/// Tile states of one step, keyed by schedule tile id.
struct StepState {
  std::unordered_map<int, TileState> tiles;
  int slots_used = 0;
};

/// Per-readout analog perturbation (read noise, offset FPN, injected noise).
using ReadHook = std::function<double(const TileState&, const ScheduledTile&, double volts)>;

struct GroupReadout {
  int group = 0;
  /// One row per tile-row (C1, C2, C3 order), samples ordered by column.
  std::vector<std::vector<ReadoutSample>> rows;
};

/// Reads every tile of `group` through its enable line, marks the tiles read
/// and consumes one readout slot. Throws NotReady if any tile is not ready.
GroupReadout read_group(const ReadGroup& group, const ScheduleStep& step, StepState& states, const AdcModel& adc,
                        const ReadHook& hook = {});

/// Traditional-mode per-photodiode voltages after one exposure of `t_expo`
/// (each photodiode read individually through its unit's FD node).
Grid<double> traditional_readout(const PhotocurrentMap& currents, const ValidatedConfig& cfg, double t_expo,
                                 bool leakage = true);

struct CodeRecord {
  int channel = 0;
  int step = 0;
  Sign phase = Sign::pos;
  int group = 0;
  int column = 0;  // physical unit column of the conversion
  int tile = 0;
  int code = -1;
  double volts = 0;
};

void write_codes_csv(const std::vector<CodeRecord>& codes, const std::string& path);

}  // namespace pipsim
