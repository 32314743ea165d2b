#include "pipsim/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "pipsim/optics.hpp"
#include "pipsim/scheduler.hpp"

namespace pipsim {

namespace {

void require_positive(double v, const char* name) {
  if (!(v > 0) || !std::isfinite(v)) throw InputError(std::string(name) + " must be positive");
}

void require_supported(int r, int s) {
  if (r != 3 && r != 5 && r != 7 && r != 9)
    throw UnsupportedGeometry("kernel side must be 3, 5, 7 or 9 (got " + std::to_string(r) + ")");
  if (s != 2 && s != 4) throw UnsupportedGeometry("stride must be 2 or 4 (got " + std::to_string(s) + ")");
}

}  // namespace

double min_adc_rate(double f, int n, int H, int r, int s) {
  require_positive(f, "frame rate");
  require_positive(n, "channel count");
  require_positive(H, "height");
  require_positive(r - 1, "r - 1");
  require_positive(s, "stride");
  return 2.0 * f * n * H * (r - 1) / (3.0 * s);
}

double max_real_frame_rate(int r, int s, double t_expo) {
  require_positive(r - 1, "r - 1");
  require_positive(s, "stride");
  require_positive(t_expo, "exposure time");
  return s / ((2.0 * (r + 1) + s) * (r - 1) * t_expo);
}

long long floor_rate(double rate) {
  return static_cast<long long>(std::floor(rate * (1.0 + 1e-12)));
}

RateReport rate_report(int r, int s, double f, int n, int H, double t_expo) {
  require_supported(r, s);
  RateReport rep;
  rep.r = r;
  rep.s = s;
  rep.f = f;
  rep.n = n;
  rep.H = H;
  rep.t_expo = t_expo;
  rep.f_real_max = max_real_frame_rate(r, s, t_expo);
  require_positive(f * n, "f * n");
  rep.f_real = std::min(f * n, rep.f_real_max);
  rep.f_adc_min = min_adc_rate(rep.f_real, 1, H, r, s);
  return rep;
}

void write_rates_csv(std::span<const RateReport> rows, std::ostream& out) {
  out << "r,s,fps,channels,H,t_expo_s,f_real,f_adc_min_khz,f_real_max\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%d,%g,%d,%d,%.6g,%.2f,%.2f,%lld\n", r.r, r.s, r.f, r.n, r.H, r.t_expo,
                  r.f_real, r.f_adc_min / 1e3, floor_rate(r.f_real_max));
    out << buf;
  }
}

double total_ops(int out_h, int out_w, int in_ch, int out_ch, double fps, int r) {
  return static_cast<double>(out_h) * out_w * in_ch * out_ch * fps * 2.0 * r * r;
}

PowerReport power_model(double fps, int r, int s, const PowerCalibration& calib, const ArrayShape& shape) {
  require_positive(fps, "frame rate");
  require_positive(r, "kernel side");
  require_positive(s, "stride");
  PowerReport p;
  p.fps = fps;
  p.r = r;
  p.s = s;
  const double rate = fps / 60.0;
  const double density = 4.0 / (static_cast<double>(s) * s);
  p.p_pixel = calib.p_pixel * rate * (2.0 * r * r / 18.0) * density;
  p.p_readout = calib.p_readout * rate * density;
  p.p_adc = calib.p_adc * rate * density;
  p.p_total = p.p_pixel + p.p_readout + p.p_adc;
  p.total_ops = total_ops(shape.height / s, shape.width / s, shape.in_ch, shape.out_ch, fps, r);
  p.efficiency = p.total_ops / p.p_total;
  p.fom = p.p_total / (static_cast<double>(shape.height) * shape.width * fps * shape.out_ch);
  return p;
}

double energy_per_frame(const PowerReport& p) { return p.p_total / p.fps; }

void write_power_csv(std::span<const PowerReport> rows, std::ostream& out) {
  out << "fps,r,s,p_pixel_uw,p_readout_uw,p_adc_uw,p_total_uw,tops_per_w,fom_pj\n";
  char buf[256];
  for (const auto& p : rows) {
    std::snprintf(buf, sizeof buf, "%g,%d,%d,%.2f,%.2f,%.2f,%.2f,%.2f,%.2f\n", p.fps, p.r, p.s, p.p_pixel * 1e6,
                  p.p_readout * 1e6, p.p_adc * 1e6, p.p_total * 1e6, p.efficiency / 1e12, p.fom * 1e12);
    out << buf;
  }
}

std::vector<FeatureMap> oracle_conv(const PhotocurrentMap& currents, std::span<const WeightKernel> kernels, int s) {
  const Grid<double>& amps = currents.amps;
  if (amps.rows() % 2 != 0 || amps.cols() % 2 != 0 || amps.empty())
    throw DimensionMismatch("photocurrent map must have even, nonzero dimensions");
  std::vector<FeatureMap> out(kernels.size());
  for (const auto& k : kernels) k.validate();

  parallel_for(kernels.size(), [&](std::size_t c) {
    const WeightKernel& k = kernels[c];
    OutputGeometry geom;
    try {
      geom = output_geometry(static_cast<int>(amps.rows() / 2), static_cast<int>(amps.cols() / 2), k.r, s);
    } catch (const UnsupportedGeometry& e) {
      throw DimensionMismatch(e.what());
    }
    FeatureMap fm;
    fm.values = Grid<double>(static_cast<std::size_t>(geom.rows), static_cast<std::size_t>(geom.cols));
    fm.info.channel_id = k.channel_id;
    fm.info.r = k.r;
    fm.info.stride = s;
    fm.info.source = MapSource::oracle;
    const auto side = static_cast<std::size_t>(2 * k.r);
    for (std::size_t i = 0; i < fm.values.rows(); ++i) {
      for (std::size_t j = 0; j < fm.values.cols(); ++j) {
        const std::size_t y0 = 2 * i * static_cast<std::size_t>(s);
        const std::size_t x0 = 2 * j * static_cast<std::size_t>(s);
        double acc = 0.0;
        for (std::size_t py = 0; py < side; ++py)
          for (std::size_t px = 0; px < side; ++px) acc += amps(y0 + py, x0 + px) * k.weights(py, px);
        fm.values(i, j) = acc;
      }
    }
    out[c] = std::move(fm);
  });
  return out;
}

CompareMetrics compare(const FeatureMap& simulated, const FeatureMap& reference) {
  const auto& a = simulated.values;
  const auto& b = reference.values;
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionMismatch("feature maps differ in shape: " + std::to_string(a.rows()) + "x" +
                            std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                            std::to_string(b.cols()));
  CompareMetrics m;
  m.error = Grid<double>(a.rows(), a.cols());
  double se = 0.0;
  double sr = 0.0;
  auto fa = a.flat();
  auto fb = b.flat();
  auto fe = m.error.flat();
  for (std::size_t i = 0; i < fa.size(); ++i) {
    fe[i] = fa[i] - fb[i];
    se += fe[i] * fe[i];
    sr += fb[i] * fb[i];
    m.max_abs = std::max(m.max_abs, std::abs(fe[i]));
  }
  const double n = fa.empty() ? 1.0 : static_cast<double>(fa.size());
  m.ref_rms = std::sqrt(sr / n);
  const double err_rms = std::sqrt(se / n);
  m.rms = m.ref_rms > 0 ? err_rms / m.ref_rms : err_rms;
  return m;
}

double mean_rms(std::span<const FeatureMap> simulated, std::span<const FeatureMap> reference) {
  if (simulated.size() != reference.size() || simulated.empty())
    throw DimensionMismatch("channel counts differ or are zero");
  double acc = 0.0;
  for (std::size_t c = 0; c < simulated.size(); ++c) acc += compare(simulated[c], reference[c]).rms;
  return acc / static_cast<double>(simulated.size());
}

std::vector<FrameRatePoint> frame_rate_curve(std::span<const double> lux, const ValidatedConfig& cfg, SensorMode mode,
                                             const CurveOptions& opts) {
  require_positive(opts.swing, "swing");
  const double H = cfg.height_px();
  double readout_limit;
  double exposures;
  if (mode == SensorMode::computing) {
    readout_limit = 3.0 * opts.s * cfg.f_adc() / (2.0 * H * (opts.r - 1));
    exposures = equivalent_exposures(opts.r, opts.s);
  } else {
    readout_limit = cfg.f_adc() / (2.0 * H);
    exposures = 1.0;
  }
  std::vector<FrameRatePoint> out;
  out.reserve(lux.size());
  for (double l : lux) {
    if (!(l >= 0) || !std::isfinite(l)) throw InputError("illuminance must be finite and >= 0");
    const double current = cfg.responsivity() * lux_to_irradiance(l) * cfg.pd_area();
    FrameRatePoint p;
    p.lux = l;
    p.readout_limit = readout_limit;
    // 1 / (E * swing * C / I)
    p.exposure_limit = current / (exposures * opts.swing * cfg.c_fd());
    p.fps = std::min(p.exposure_limit, p.readout_limit);
    out.push_back(p);
  }
  return out;
}

}  // namespace pipsim
