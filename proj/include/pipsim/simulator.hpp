#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pipsim/core.hpp"
#include "pipsim/noise.hpp"
#include "pipsim/readout.hpp"
#include "pipsim/scheduler.hpp"

namespace pipsim {

struct SimulationOptions {
  SchedulePolicy policy = SchedulePolicy::full_coverage;
  bool leakage = true;
  bool adc_bypass = false;
  bool dark_correction = false;
  /// Pick the largest k_expo (capped at the configured one) that keeps every
  /// phase above v_min.
  bool auto_exposure = false;
  double hold_time = 0.0;
  /// Throw InfeasibleTiming instead of recording stalls.
  bool strict_timing = false;
  std::optional<NoiseModel> noise;
  /// Additive white noise on the differential readout at this SNR.
  std::optional<double> target_snr_db;
  /// Signal power for the SNR definition [V^2]; measured from a noiseless
  /// run when unset.
  std::optional<double> signal_power;
  bool record_codes = false;

  /// Leakage off, noise off, ADC bypass, dark-current correction on.
  static SimulationOptions ideal();
};

struct SimulationResult {
  std::vector<FeatureMap> maps;
  TileSchedule schedule;
  std::vector<CodeRecord> codes;
  double k_expo = 0;
  int saturated_tiles = 0;
  int clamped_codes = 0;
  /// Mean square of the differential voltages U- - U+ over every tile read.
  double differential_power = 0;
};

/// Runs the array convolution for every kernel: per step, each tile is
/// reset, exposed with the positive weights, read, reset, exposed with the
/// negative weights, read; the differences are rescaled and the splice
/// slices summed. All kernels must share one r.
/// Throws UnsupportedGeometry for the paper-steps policy (its sites are not
/// photodiode units) and for unsupported (r, stride).
SimulationResult simulate(const PhotocurrentMap& currents, std::span<const WeightKernel> kernels, int stride,
                          const ValidatedConfig& cfg, const SimulationOptions& opts = {});

struct SweepOptions {
  std::vector<double> mismatch{0.05, 0.10, 0.20};
  std::vector<double> snr_db{60, 40, 20, 0};
  int trials = 3;
  std::uint64_t seed = 1;
  /// Temporal noise present in every cell; the seed is replaced per trial.
  NoiseModel base = NoiseModel::typical();
  bool adc_bypass = false;
};

struct SweepCell {
  double mismatch = 0;
  double snr_db = 0;
  double mean_rms = 0;
  double std_rms = 0;
  int trials = 0;
  std::uint64_t seed = 0;
};

/// Mean normalised RMS error against the oracle over a mismatch x SNR grid.
/// Trial t of every cell reuses the same random streams (common random
/// numbers), so cells differ only in the swept magnitudes.
/// Throws InputError when trials < 1.
std::vector<SweepCell> noise_sweep(const PhotocurrentMap& currents, std::span<const WeightKernel> kernels, int stride,
                                   const ValidatedConfig& cfg, const SweepOptions& opts = {});

void write_sweep_csv(std::span<const SweepCell> cells, std::ostream& out);

}  // namespace pipsim
