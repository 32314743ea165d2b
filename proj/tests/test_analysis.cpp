#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "fixtures.hpp"
#include "pipsim/analysis.hpp"

using namespace pipsim;

TEST_CASE("minimum ADC rate") {
  CHECK(min_adc_rate(60, 64, 128, 3, 2) == doctest::Approx(327680.0));
  CHECK(min_adc_rate(60, 64, 1080, 3, 2) / 1e6 == doctest::Approx(2.76).epsilon(0.002));
  CHECK(min_adc_rate(60, 64, 128, 3, 4) * 2 == doctest::Approx(min_adc_rate(60, 64, 128, 3, 2)));
  CHECK_THROWS_AS(min_adc_rate(0, 64, 128, 3, 2), InputError);
}

TEST_CASE("maximum real frame rate") {
  CHECK(floor_rate(max_real_frame_rate(3, 2, kTableExposure)) == 3840);
  CHECK(floor_rate(max_real_frame_rate(5, 2, kTableExposure)) == 1371);
  CHECK(floor_rate(max_real_frame_rate(7, 2, kTableExposure)) == 711);
  CHECK(floor_rate(max_real_frame_rate(9, 2, kTableExposure)) == 436);
  CHECK(floor_rate(3839.9999999999) == 3840);
  CHECK(floor_rate(3839.9) == 3839);
}

TEST_CASE("rate table rows") {
  const double f_adc_khz[] = {327.68, 234.06, 182.04, 148.95};
  const int rs[] = {3, 5, 7, 9};
  for (int i = 0; i < 4; ++i) {
    const RateReport rep = rate_report(rs[i], 2);
    CHECK(std::abs(rep.f_adc_min / 1e3 - f_adc_khz[i]) <= 0.01);
    CHECK(rep.f_real <= rep.f * rep.n);
  }
  // r = 3 runs the requested 60 fps x 64 channels exactly
  CHECK(rate_report(3, 2).f_real == 3840.0);
  CHECK_THROWS_AS(rate_report(4, 2), UnsupportedGeometry);
  CHECK_THROWS_AS(rate_report(3, 3), UnsupportedGeometry);
}

TEST_CASE("rates CSV") {
  const RateReport rows[] = {rate_report(3, 2), rate_report(9, 4)};
  std::ostringstream out;
  write_rates_csv(rows, out);
  CHECK(out.str().rfind("r,s,fps,channels,H,t_expo_s,f_real,f_adc_min_khz,f_real_max\n", 0) == 0);
  const std::string text = out.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
}

TEST_CASE("operation counts") {
  CHECK(total_ops(64, 64, 4, 64, 60, 3) == 1132462080.0);
  CHECK(total_ops(32, 32, 4, 64, 60, 5) == 786432000.0);
  CHECK(total_ops(1, 1, 1, 1, 1, 1) == 2.0);
}

TEST_CASE("reference power table") {
  struct Row {
    double fps;
    int r, s;
    double p_total_uw, tops_w, fom_pj;
  };
  const Row rows[] = {{60, 3, 2, 245.13, 4.62, 3.90}, {120, 3, 2, 490.25, 4.62, 3.90}, {60, 5, 2, 358.79, 8.77, 5.70},
                      {60, 5, 4, 89.70, 8.77, 1.43},  {60, 7, 2, 529.29, 11.65, 8.41}, {60, 7, 4, 132.32, 11.65, 2.10}};
  for (const auto& row : rows) {
    CAPTURE(row.r);
    CAPTURE(row.s);
    CAPTURE(row.fps);
    const PowerReport p = power_model(row.fps, row.r, row.s);
    CHECK(std::abs(p.p_total * 1e6 - row.p_total_uw) <= 0.01);
    CHECK(std::abs(p.efficiency / 1e12 - row.tops_w) <= 0.01);
    CHECK(std::abs(p.fom * 1e12 - row.fom_pj) <= 0.01);
    CHECK(p.p_total == doctest::Approx(p.p_pixel + p.p_readout + p.p_adc));
    CHECK(p.efficiency == doctest::Approx(p.total_ops / p.p_total));
  }
}

TEST_CASE("power scaling laws") {
  const PowerReport base = power_model(60, 3, 2);
  const PowerReport half = power_model(30, 3, 2);
  CHECK(half.p_total * 2 == doctest::Approx(base.p_total));
  const PowerReport wide = power_model(60, 3, 4);
  CHECK(wide.p_adc * 4 == doctest::Approx(base.p_adc));
  const PowerReport big = power_model(60, 9, 2);
  CHECK(big.p_pixel == doctest::Approx(base.p_pixel * 9));
  CHECK(big.p_readout == doctest::Approx(base.p_readout));
  CHECK_THROWS_AS(power_model(0, 3, 2), InputError);
  CHECK_THROWS_AS(power_model(60, 0, 2), InputError);
  CHECK_THROWS_AS(power_model(60, 3, 0), InputError);
}

TEST_CASE("efficiency does not depend on frame rate or stride") {
  for (int r : {3, 5, 7}) {
    const double e = power_model(60, r, 2).efficiency;
    for (double fps : {1.0, 30.0, 240.0})
      for (int s : {2, 4}) CHECK(power_model(fps, r, s).efficiency == doctest::Approx(e).epsilon(1e-12));
  }
}

TEST_CASE("printed calibration stays within rounding of the refit") {
  const PowerReport a = power_model(60, 3, 2, PowerCalibration::printed());
  CHECK(a.p_total * 1e6 == doctest::Approx(245.13).epsilon(1e-4));
}

TEST_CASE("energy per frame") {
  CHECK(energy_per_frame(power_model(60, 7, 2)) * 1e6 == doctest::Approx(8.82).epsilon(1e-3));
}

TEST_CASE("oracle matches an independent brute-force loop") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const int h = 16 + 8 * (trial % 4);
    const ValidatedConfig cfg = fixtures::sensor(h, h + 8);
    const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
    for (int r : {3, 5}) {
      for (int s : {2, 4}) {
        const auto ks = fixtures::random_kernels(r, 2, rng);
        const auto maps = oracle_conv(pm, ks, s);
        for (std::size_t c = 0; c < ks.size(); ++c) {
          const auto ref = fixtures::brute_conv(pm.amps, ks[c], s);
          REQUIRE(maps[c].values.rows() == ref.size());
          REQUIRE(maps[c].values.cols() == ref.front().size());
          for (std::size_t i = 0; i < ref.size(); ++i)
            for (std::size_t j = 0; j < ref[i].size(); ++j)
              CHECK(maps[c].values(i, j) == doctest::Approx(ref[i][j]).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("delta and zero kernels") {
  std::mt19937_64 rng(32);
  const ValidatedConfig cfg = fixtures::sensor(16, 16);
  const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
  WeightKernel z;
  z.r = 3;
  z.weights = Grid<int>(6, 6);
  WeightKernel d = z;
  d.weights(3, 2) = 1;  // G2 plane of unit (1, 1)
  const WeightKernel ks[] = {z, d};
  const auto maps = oracle_conv(pm, ks, 2);
  for (double v : maps[0].values.flat()) CHECK(v == 0.0);
  for (std::size_t i = 0; i < maps[1].values.rows(); ++i)
    for (std::size_t j = 0; j < maps[1].values.cols(); ++j) CHECK(maps[1].values(i, j) == pm.amps(4 * i + 3, 4 * j + 2));
}

TEST_CASE("transposing scene and kernel transposes the output") {
  std::mt19937_64 rng(33);
  const ValidatedConfig cfg = fixtures::sensor(24, 32);
  const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
  WeightKernel k = fixtures::random_kernel(3, 0, rng);
  WeightKernel kt = k;
  kt.weights = k.weights.transposed();
  const auto a = oracle_conv(pm, std::span(&k, 1), 2);
  const auto b = oracle_conv(PhotocurrentMap{pm.amps.transposed()}, std::span(&kt, 1), 2);
  REQUIRE(a[0].values.rows() == b[0].values.cols());
  for (std::size_t i = 0; i < a[0].values.rows(); ++i)
    for (std::size_t j = 0; j < a[0].values.cols(); ++j)
      CHECK(a[0].values(i, j) == doctest::Approx(b[0].values(j, i)).epsilon(1e-12));
}

TEST_CASE("oracle geometry errors") {
  std::mt19937_64 rng(34);
  const WeightKernel k = fixtures::random_kernel(9, 0, rng);
  CHECK_THROWS_AS(oracle_conv(PhotocurrentMap{Grid<double>(8, 8)}, std::span(&k, 1), 2), DimensionMismatch);
  CHECK_THROWS_AS(oracle_conv(PhotocurrentMap{Grid<double>(19, 20)}, std::span(&k, 1), 2), DimensionMismatch);
}

TEST_CASE("compare metrics") {
  FeatureMap ref;
  ref.values = Grid<double>(4, 4, 1.0);
  CHECK(compare(ref, ref).rms == 0.0);
  FeatureMap off = ref;
  for (auto& v : off.values.flat()) v += 0.1;
  const CompareMetrics m = compare(off, ref);
  CHECK(m.rms == doctest::Approx(0.1));
  CHECK(m.max_abs == doctest::Approx(0.1));
  CHECK(m.error(2, 3) == doctest::Approx(0.1));
  FeatureMap zero;
  zero.values = Grid<double>(4, 4);
  CHECK(compare(off, zero).rms == doctest::Approx(1.1));
  FeatureMap small;
  small.values = Grid<double>(3, 4);
  CHECK_THROWS_AS(compare(small, ref), DimensionMismatch);
  const FeatureMap sims[] = {ref, off};
  const FeatureMap refs[] = {ref, ref};
  CHECK(mean_rms(sims, refs) == doctest::Approx(0.05));
}

TEST_CASE("frame-rate curve shape") {
  const ValidatedConfig cfg = fixtures::sensor(128, 128);
  std::vector<double> lux;
  for (double l = 1; l <= 1e6; l *= 1.5) lux.push_back(l);
  const auto comp = frame_rate_curve(lux, cfg, SensorMode::computing);
  const auto trad = frame_rate_curve(lux, cfg, SensorMode::traditional);
  const double adc_limit = 3.0 * 2 * 330e3 / (2.0 * 128 * 2);
  CHECK(comp.back().fps == doctest::Approx(adc_limit));
  CHECK(comp.back().readout_limited());
  CHECK_FALSE(comp.front().readout_limited());
  CHECK(comp[1].fps / comp[0].fps == doctest::Approx(1.5));
  for (std::size_t i = 1; i < comp.size(); ++i) CHECK(comp[i].fps >= comp[i - 1].fps);
  for (std::size_t i = 0; i < comp.size(); ++i)
    if (comp[i].fps > trad[i].fps) CHECK(trad[i].readout_limited());
  const double zero[] = {0.0};
  CHECK(frame_rate_curve(zero, cfg, SensorMode::computing)[0].fps == 0.0);
  const double neg[] = {-1.0};
  CHECK_THROWS_AS(frame_rate_curve(neg, cfg, SensorMode::computing), InputError);
}

TEST_CASE("1500 lux needs one table exposure") {
  const ValidatedConfig cfg = fixtures::sensor(128, 128);
  const double l[] = {1500.0};
  const auto trad = frame_rate_curve(l, cfg, SensorMode::traditional);
  CHECK(1.0 / trad[0].exposure_limit == doctest::Approx(kTableExposure).epsilon(0.005));
}
