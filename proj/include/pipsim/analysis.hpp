#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pipsim/core.hpp"

namespace pipsim {

// ---------------------------------------------------------------------------
// Rates
// ---------------------------------------------------------------------------

/// Exposure budget of one phase used by the rate tables: 1/38400 s (26.04 us).
constexpr double kTableExposure = 1.0 / 38400.0;

/// 2 f n H (r - 1) / (3 s) [Hz]. Throws InputError on non-positive arguments.
double min_adc_rate(double f, int n, int H, int r, int s);

/// s / ([2(r + 1) + s] (r - 1) t_expo) [channel-frames/s], unfloored.
double max_real_frame_rate(int r, int s, double t_expo);

/// Floors a rate for table comparison, tolerating representation error just
/// below an integer (3839.9999999 -> 3840).
long long floor_rate(double rate);

struct RateReport {
  int r = 3;
  int s = 2;
  double f = 60;  // fps
  int n = 64;     // channels
  int H = 128;    // px
  double t_expo = kTableExposure;
  double f_real_max = 0;  // channel-frames/s
  double f_real = 0;      // min(f * n, f_real_max)
  double f_adc_min = 0;   // Hz, evaluated at f_real
};

/// Both rates for one configuration. The requested f * n is capped at the
/// exposure-limited maximum before the ADC rate is evaluated (larger kernels
/// cannot run 64 channels at 60 fps). Throws UnsupportedGeometry unless
/// r in {3,5,7,9} and s in {2,4}.
RateReport rate_report(int r, int s, double f = 60, int n = 64, int H = 128, double t_expo = kTableExposure);

void write_rates_csv(std::span<const RateReport> rows, std::ostream& out);

// ---------------------------------------------------------------------------
// Operations and power
// ---------------------------------------------------------------------------

/// out_h * out_w * in_ch * out_ch * fps * 2 r^2 [OPS/s].
double total_ops(int out_h, int out_w, int in_ch, int out_ch, double fps, int r);

/// Baseline row (60 fps, r = 3, s = 2) the scaling laws start from [W].
/// Defaults are refit to the whole reference table; `printed()` holds the
/// rounded baseline values.
struct PowerCalibration {
  double p_pixel = 63.937e-6;
  double p_readout = 4.016e-6;
  double p_adc = 177.174e-6;

  static PowerCalibration printed() { return {63.94e-6, 4.02e-6, 177.17e-6}; }
};

struct PowerReport {
  double fps = 60;
  int r = 3;
  int s = 2;
  double p_pixel = 0;
  double p_readout = 0;
  double p_adc = 0;
  double p_total = 0;
  double total_ops = 0;   // OPS/s
  double efficiency = 0;  // OPS/W
  double fom = 0;         // J per pixel per frame per output channel
};

struct ArrayShape {
  int height = 128;
  int width = 128;
  int in_ch = 4;
  int out_ch = 64;
};

/// p_pixel * (fps/60)(2r^2/18)(4/s^2); p_readout and p_adc * (fps/60)(4/s^2).
/// Throws InputError unless fps > 0, r >= 1, s >= 1.
PowerReport power_model(double fps, int r, int s, const PowerCalibration& calib = {}, const ArrayShape& shape = {});

/// Energy of one frame [J].
double energy_per_frame(const PowerReport& p);

void write_power_csv(std::span<const PowerReport> rows, std::ostream& out);

// ---------------------------------------------------------------------------
// Reference convolution and comparison
// ---------------------------------------------------------------------------

/// Exact sum(I_i * w_i) per valid output position: output (i, k) covers
/// photodiodes [2is, 2is + 2r) x [2ks, 2ks + 2r). One map per kernel.
/// Throws DimensionMismatch on odd current maps or kernels that do not fit.
std::vector<FeatureMap> oracle_conv(const PhotocurrentMap& currents, std::span<const WeightKernel> kernels, int s);

struct CompareMetrics {
  double rms = 0;      // RMS error / RMS of the reference (absolute when the reference is all zero)
  double max_abs = 0;  // absolute
  double ref_rms = 0;
  Grid<double> error;  // simulated - reference
};

/// Throws DimensionMismatch when the grids differ in shape.
CompareMetrics compare(const FeatureMap& simulated, const FeatureMap& reference);

/// Mean of per-channel normalised RMS errors.
double mean_rms(std::span<const FeatureMap> simulated, std::span<const FeatureMap> reference);

// ---------------------------------------------------------------------------
// Frame rate vs illuminance
// ---------------------------------------------------------------------------

enum class SensorMode { computing, traditional };

struct FrameRatePoint {
  double lux = 0;
  double fps = 0;
  double exposure_limit = 0;
  double readout_limit = 0;
  bool readout_limited() const noexcept { return readout_limit <= exposure_limit; }
};

struct CurveOptions {
  int r = 3;
  int s = 2;
  /// FD swing one exposure must reach: 0.09 V makes 1500 lux need 26.04 us.
  double swing = 0.09;
};

/// Computing: min(1 / (E T_req), 3 s f_adc / (2 H (r - 1))) with E the
/// equivalent exposures per frame. Traditional: min(1 / T_req, f_adc / (2 H)).
/// T_req = swing * c_fd / I(lux). Throws InputError on negative lux.
std::vector<FrameRatePoint> frame_rate_curve(std::span<const double> lux, const ValidatedConfig& cfg, SensorMode mode,
                                             const CurveOptions& opts = {});

}  // namespace pipsim
