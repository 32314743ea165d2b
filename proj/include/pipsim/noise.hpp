#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

#include "pipsim/core.hpp"
#include "pipsim/pixel_engine.hpp"

namespace pipsim {

constexpr double kBoltzmann = 1.380649e-23;         // J/K
constexpr double kElementaryCharge = 1.602176634e-19;  // C

/// Noise sources and their magnitudes. Defaults are all-off; none of the
/// magnitudes in `typical()` are measured values for this sensor.
struct NoiseModel {
  bool shot = false;              // Poisson on integrated electrons
  bool reset = false;             // kT/C per unit per reset
  double read_sigma = 0.0;        // V rms per readout
  double dsnu_sigma = 0.0;        // A, per-photodiode dark-current offset
  double prnu_sigma = 0.0;        // fractional per-photodiode gain
  double offset_fpn_sigma = 0.0;  // V, per-unit readout offset
  double mismatch_sigma = 0.0;    // fraction of c_fd
  double temperature = 300.0;     // K
  std::uint64_t seed = 1;

  /// Shot + kTC + 0.25 mV read noise.
  static NoiseModel typical(std::uint64_t seed = 1);
  bool temporal() const noexcept { return shot || reset || read_sigma > 0; }
  bool fixed_pattern() const noexcept {
    return dsnu_sigma > 0 || prnu_sigma > 0 || offset_fpn_sigma > 0 || mismatch_sigma > 0;
  }
  /// Throws InputError on negative sigmas or non-positive temperature.
  void validate() const;
};

/// Deterministic stream derived from a seed and a key path, e.g.
/// (seed, channel, tile, event). Independent of evaluation order.
class NoiseRng {
public:
  NoiseRng(std::uint64_t seed, std::initializer_list<std::uint64_t> keys);
  double normal(double sigma = 1.0);
  std::uint64_t poisson(double mean);
  std::mt19937_64& engine() noexcept { return engine_; }

private:
  std::mt19937_64 engine_;
};

std::uint64_t mix_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept;

/// sqrt(kT / C) [V rms].
double ktc_sigma(double capacitance, double temperature = 300.0);

/// Per-unit capacitances ~ Normal(c_fd, (sigma_c c_fd)^2), redrawn outside
/// +-4 sigma and floored at 0.1 c_fd. unit_height x unit_width.
Grid<double> apply_mismatch(const ValidatedConfig& cfg, double sigma_c, std::uint64_t seed);

/// Per-sensor fixed-pattern draws, made once from the model seed.
struct FixedPattern {
  Grid<double> caps;       // per unit [F]
  Grid<double> offsets;    // per unit readout offset [V]
  Grid<double> prnu_gain;  // per photodiode multiplier
  Grid<double> dark;       // per photodiode dark current [A]

  std::vector<double> tile_caps(UnitCoord origin, int rows, int cols) const;
};

FixedPattern make_fixed_pattern(const NoiseModel& model, const ValidatedConfig& cfg);

/// Currents scaled by the PRNU gain map.
PhotocurrentMap apply_prnu(const PhotocurrentMap& currents, const FixedPattern& fpn);

enum class NoiseEvent { reset, exposure_end, readout };

/// Adds kT/C noise to every unit of a freshly reset tile.
void apply_reset_noise(TileState& tile, const NoiseModel& model, NoiseRng& rng);
/// Resamples the integrated charge as Poisson electrons.
void apply_shot_noise(TileState& tile, const NoiseModel& model, NoiseRng& rng);
/// Readout voltage with read noise and the read unit's offset FPN.
double apply_read_noise(double volts, UnitCoord read_unit, const NoiseModel& model, const FixedPattern* fpn,
                        NoiseRng& rng);

/// Applies the temporal noise belonging to `event` to every unit of the tile
/// (readout perturbs every unit independently) and returns the new voltages.
const std::vector<double>& sample_noise(TileState& tile, NoiseEvent event, const NoiseModel& model, NoiseRng& rng,
                                        const FixedPattern* fpn = nullptr);

struct AveragingGain {
  double noise_power = 0;
  double snr_gain = 1;
};

/// Mean over r^2 independent units: noise sigma^2 / r^2, SNR gain r^2.
AveragingGain averaging_gain(int r, double sigma);

/// Additive white-noise sigma giving `snr_db` against `signal_power`.
/// Throws InputError when signal_power <= 0.
double inject_target_snr(double signal_power, double snr_db);

}  // namespace pipsim
