#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace pipsim {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Error classes; each maps to a distinct CLI exit code.
enum class ErrorKind { config, input, geometry, timing, internal };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class InvalidConfig : public Error {
public:
  explicit InvalidConfig(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
  std::vector<std::string> violations_;
};

struct InputError : Error {
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};
struct DimensionMismatch : Error {
  explicit DimensionMismatch(const std::string& what) : Error(ErrorKind::input, what) {}
};
struct UnsupportedGeometry : Error {
  explicit UnsupportedGeometry(const std::string& what) : Error(ErrorKind::geometry, what) {}
};
struct InfeasibleTiming : Error {
  explicit InfeasibleTiming(const std::string& what) : Error(ErrorKind::timing, what) {}
};
struct PhaseMismatch : Error {
  explicit PhaseMismatch(const std::string& what) : Error(ErrorKind::internal, what) {}
};
struct NotReady : Error {
  explicit NotReady(const std::string& what) : Error(ErrorKind::internal, what) {}
};

// ---------------------------------------------------------------------------
// Grid
// ---------------------------------------------------------------------------

/// Dense row-major 2-D array.
template <class T>
class Grid {
public:
  Grid() = default;
  Grid(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<T> flat() noexcept { return data_; }
  std::span<const T> flat() const noexcept { return data_; }

  Grid transposed() const {
    Grid out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

// ---------------------------------------------------------------------------
// Sensor configuration
// ---------------------------------------------------------------------------

/// Physical and timing constants of the modeled sensor. SI units throughout.
/// Zero-valued t_rd / k_expo mean "derive" (see ValidatedConfig).
struct SensorConfig {
  int width_px = 128;
  int height_px = 128;
  double c_fd = 22.2e-15;        // FD capacitance per pixel unit [F]
  double r_leak = 8.07e15;       // FD leakage resistance [ohm]
  double v_rst = 1.8;            // reset voltage [V]
  double v_min = 0.4;            // lowest valid FD voltage [V]
  double responsivity = 0.35;    // [A/W]
  double pd_area = 1.0e-10;      // photodiode area [m^2]
  double i_dark = 1.0e-15;       // dark current per photodiode [A]
  double t_rst = 100e-9;         // reset interval [s]
  double t_rd = 0.0;             // per-group readout time [s]; 0 -> 3 / f_adc
  double t_expo_max = 1.0 / 38400.0;  // exposure budget of one phase [s]
  double k_expo = 0.0;           // seconds per weight LSB; 0 -> t_expo_max / 128
  int adc_bits = 10;
  double f_adc = 330e3;          // column ADC conversion rate [Hz]
};

/// A SensorConfig whose invariants hold and whose derived fields are filled.
/// Immutable once constructed.
class ValidatedConfig {
public:
  const SensorConfig& raw() const noexcept { return cfg_; }
  int width_px() const noexcept { return cfg_.width_px; }
  int height_px() const noexcept { return cfg_.height_px; }
  int unit_width() const noexcept { return cfg_.width_px / 2; }
  int unit_height() const noexcept { return cfg_.height_px / 2; }
  double c_fd() const noexcept { return cfg_.c_fd; }
  double r_leak() const noexcept { return cfg_.r_leak; }
  double v_rst() const noexcept { return cfg_.v_rst; }
  double v_min() const noexcept { return cfg_.v_min; }
  double responsivity() const noexcept { return cfg_.responsivity; }
  double pd_area() const noexcept { return cfg_.pd_area; }
  double i_dark() const noexcept { return cfg_.i_dark; }
  double t_rst() const noexcept { return cfg_.t_rst; }
  double t_rd() const noexcept { return cfg_.t_rd; }
  double t_expo_max() const noexcept { return cfg_.t_expo_max; }
  double k_expo() const noexcept { return cfg_.k_expo; }
  int adc_bits() const noexcept { return cfg_.adc_bits; }
  double f_adc() const noexcept { return cfg_.f_adc; }

  /// Exposure window of one PWM phase (128 weight LSBs).
  double exposure_window() const noexcept { return cfg_.k_expo * kPwmPeriod; }

  /// Copy with a different exposure constant; throws InvalidConfig if k <= 0.
  ValidatedConfig with_k_expo(double k) const;

  static constexpr int kPwmPeriod = 128;

private:
  friend ValidatedConfig validate_config(const SensorConfig&);
  explicit ValidatedConfig(SensorConfig cfg) : cfg_(std::move(cfg)) {}
  SensorConfig cfg_;
};

/// Checks every invariant and fills derived fields. Throws InvalidConfig
/// listing all violations at once.
ValidatedConfig validate_config(const SensorConfig& cfg);

/// Parses `key = value` lines (SI units, `#` comments). Unknown keys and
/// malformed values raise InvalidConfig.
SensorConfig parse_config(const std::string& text);
SensorConfig load_config(const std::string& path);
std::string format_config(const SensorConfig& cfg);

// ---------------------------------------------------------------------------
// Mosaic, weights, currents, feature maps
// ---------------------------------------------------------------------------

/// Colour plane of a photodiode inside its 2x2 unit:
///   (even row, even col) R, (even, odd) G1, (odd, even) G2, (odd, odd) B.
enum class ColorPlane { R, G1, G2, B };

constexpr ColorPlane color_plane(std::size_t row_px, std::size_t col_px) noexcept {
  const bool odd_row = row_px % 2 != 0;
  const bool odd_col = col_px % 2 != 0;
  if (!odd_row) return odd_col ? ColorPlane::G1 : ColorPlane::R;
  return odd_col ? ColorPlane::B : ColorPlane::G2;
}

const char* to_string(ColorPlane p) noexcept;

/// Signed 8-bit kernel stored at photodiode granularity: 2r x 2r entries
/// covering an r x r block of pixel units.
struct WeightKernel {
  int r = 3;
  Grid<int> weights;
  int channel_id = 0;

  static constexpr int kMin = -128;
  static constexpr int kMax = 127;

  /// Throws InputError when the shape or a weight range is wrong.
  void validate() const;
  long long weight_sum() const;
};

/// Nonnegative exposure weights of one phase.
struct PhaseWeights {
  Grid<int> weights;
};

/// w = w+ - w-, both nonnegative and never both nonzero.
std::pair<PhaseWeights, PhaseWeights> decompose_weights(const WeightKernel& kernel);

/// Per-photodiode photocurrent [A], width_px x height_px.
struct PhotocurrentMap {
  Grid<double> amps;

  ColorPlane plane(std::size_t row_px, std::size_t col_px) const noexcept {
    return color_plane(row_px, col_px);
  }
};

enum class SchedulePolicy { paper_steps, full_coverage };
const char* to_string(SchedulePolicy p) noexcept;
SchedulePolicy parse_policy(const std::string& s);

enum class MapSource { oracle, ideal, noisy };
const char* to_string(MapSource s) noexcept;

struct FeatureMapInfo {
  int channel_id = 0;
  int r = 3;
  int stride = 2;
  SchedulePolicy policy = SchedulePolicy::full_coverage;
  MapSource source = MapSource::oracle;
  std::optional<std::uint64_t> seed;
  bool adc = false;
  std::string units = "A*LSB";
};

struct FeatureMap {
  Grid<double> values;
  FeatureMapInfo info;
};

/// Output geometry on the pixel-unit grid: outputs sit at unit origins
/// (i*s, j*s) with the r x r block fully inside the array.
struct OutputGeometry {
  int rows = 0;
  int cols = 0;
};

/// Throws UnsupportedGeometry if the kernel does not fit.
OutputGeometry output_geometry(int unit_rows, int unit_cols, int r, int stride);

/// Worker count: hardware concurrency capped by PIPSIM_THREADS when set.
unsigned worker_threads();

/// Runs fn(i) for i in [0, n) on up to worker_threads() threads.
/// The first exception thrown by any worker is rethrown.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn);

}  // namespace pipsim

#include "pipsim/detail/parallel.hpp"
