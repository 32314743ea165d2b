#include <doctest.h>

#include <sstream>

#include "fixtures.hpp"
#include "pipsim/analysis.hpp"
#include "pipsim/simulator.hpp"

using namespace pipsim;

TEST_CASE("ideal chain equals the oracle for every supported geometry") {
  std::mt19937_64 rng(41);
  for (int h : {32, 64}) {
    const ValidatedConfig cfg = fixtures::sensor(h, h);
    const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
    for (int r : {3, 5, 7, 9}) {
      for (int s : {2, 4}) {
        CAPTURE(h);
        CAPTURE(r);
        CAPTURE(s);
        const auto ks = fixtures::random_kernels(r, 3, rng);
        const SimulationResult sim = simulate(pm, ks, s, cfg, SimulationOptions::ideal());
        const auto ref = oracle_conv(pm, ks, s);
        CHECK(sim.saturated_tiles == 0);
        for (std::size_t c = 0; c < ks.size(); ++c) {
          CHECK(sim.maps[c].info.source == MapSource::ideal);
          CHECK(compare(sim.maps[c], ref[c]).rms <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("the ADC costs accuracy but stays close") {
  std::mt19937_64 rng(42);
  const ValidatedConfig cfg = fixtures::sensor(32, 32);
  const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
  const auto ks = fixtures::random_kernels(3, 2, rng);
  SimulationOptions o = SimulationOptions::ideal();
  o.adc_bypass = false;
  const auto sim = simulate(pm, ks, 2, cfg, o);
  const double e = mean_rms(sim.maps, oracle_conv(pm, ks, 2));
  CHECK(e > 1e-9);
  CHECK(e < 0.05);
}

TEST_CASE("noisy runs are reproducible and thread-count independent") {
  std::mt19937_64 rng(43);
  const ValidatedConfig cfg = fixtures::sensor(32, 32);
  const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
  const auto ks = fixtures::random_kernels(5, 3, rng);
  SimulationOptions o;
  NoiseModel m = NoiseModel::typical(9);
  m.mismatch_sigma = 0.05;
  o.noise = m;
  o.target_snr_db = 30;
  o.record_codes = true;
  const auto a = simulate(pm, ks, 2, cfg, o);
  ::setenv("PIPSIM_THREADS", "1", 1);
  const auto b = simulate(pm, ks, 2, cfg, o);
  ::unsetenv("PIPSIM_THREADS");
  for (std::size_t c = 0; c < ks.size(); ++c) CHECK(a.maps[c].values == b.maps[c].values);
  CHECK(a.codes.size() == b.codes.size());
  m.seed = 10;
  o.noise = m;
  CHECK_FALSE(simulate(pm, ks, 2, cfg, o).maps[0].values == a.maps[0].values);
}

TEST_CASE("code records cover both phases of every tile") {
  std::mt19937_64 rng(44);
  const ValidatedConfig cfg = fixtures::sensor(16, 16);
  const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
  const auto ks = fixtures::random_kernels(3, 2, rng);
  SimulationOptions o;
  o.record_codes = true;
  const auto sim = simulate(pm, ks, 2, cfg, o);
  CHECK(sim.codes.size() == 2 * ks.size() * sim.schedule.tile_count());
  for (const auto& c : sim.codes) {
    CHECK(c.code >= 0);
    CHECK(c.code <= 1023);
  }
}

TEST_CASE("geometry and input errors") {
  std::mt19937_64 rng(45);
  const ValidatedConfig cfg = fixtures::sensor(32, 32);
  const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
  auto ks = fixtures::random_kernels(3, 1, rng);
  SimulationOptions accounting;
  accounting.policy = SchedulePolicy::paper_steps;
  CHECK_THROWS_AS(simulate(pm, ks, 2, cfg, accounting), UnsupportedGeometry);
  CHECK_THROWS_AS(simulate(pm, ks, 3, cfg), UnsupportedGeometry);
  CHECK_THROWS_AS(simulate(pm, std::span<const WeightKernel>{}, 2, cfg), InputError);
  CHECK_THROWS_AS(simulate(PhotocurrentMap{Grid<double>(16, 32)}, ks, 2, cfg), DimensionMismatch);
  ks.push_back(fixtures::random_kernel(5, 1, rng));
  CHECK_THROWS_AS(simulate(pm, ks, 2, cfg), InputError);
  PhotocurrentMap bad = pm;
  bad.amps(0, 0) = -1e-12;
  CHECK_THROWS_AS(simulate(bad, std::span(ks.data(), 1), 2, cfg), InputError);
  SimulationOptions strict;
  strict.strict_timing = true;
  const ValidatedConfig full = fixtures::sensor(128, 128);
  CHECK_THROWS_AS(simulate(fixtures::random_currents(full, rng), fixtures::random_kernels(9, 1, rng), 2, full, strict),
                  InfeasibleTiming);
}

TEST_CASE("bright scenes saturate; auto exposure recovers them") {
  std::mt19937_64 rng(46);
  const ValidatedConfig cfg = fixtures::sensor(32, 32);
  PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
  for (auto& a : pm.amps.flat()) a *= 200;
  const auto ks = fixtures::random_kernels(3, 2, rng);
  SimulationOptions o = SimulationOptions::ideal();
  const auto burnt = simulate(pm, ks, 2, cfg, o);
  CHECK(burnt.saturated_tiles > 0);
  o.auto_exposure = true;
  const auto fixed = simulate(pm, ks, 2, cfg, o);
  CHECK(fixed.saturated_tiles == 0);
  CHECK(fixed.k_expo < cfg.k_expo());
  CHECK(mean_rms(fixed.maps, oracle_conv(pm, ks, 2)) <= 1e-9);
}

TEST_CASE("leakage bends the response only slightly at default settings") {
  std::mt19937_64 rng(47);
  const ValidatedConfig cfg = fixtures::sensor(32, 32);
  const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
  const auto ks = fixtures::random_kernels(3, 2, rng);
  SimulationOptions o = SimulationOptions::ideal();
  o.leakage = true;
  const double e = mean_rms(simulate(pm, ks, 2, cfg, o).maps, oracle_conv(pm, ks, 2));
  CHECK(e > 0);
  CHECK(e < 1e-3);
}

TEST_CASE("noise sweep grid") {
  std::mt19937_64 rng(48);
  const ValidatedConfig cfg = fixtures::sensor(32, 32);
  const PhotocurrentMap pm = fixtures::random_currents(cfg, rng);
  const auto ks = fixtures::random_kernels(3, 2, rng);
  SweepOptions so;
  so.mismatch = {0.05};
  so.snr_db = {60, 20, 0};
  so.trials = 2;
  const auto cells = noise_sweep(pm, ks, 2, cfg, so);
  REQUIRE(cells.size() == 3);
  CHECK(cells[0].mean_rms <= cells[1].mean_rms);
  CHECK(cells[1].mean_rms <= cells[2].mean_rms);
  CHECK(cells[2].trials == 2);
  const auto again = noise_sweep(pm, ks, 2, cfg, so);
  CHECK(again[1].mean_rms == cells[1].mean_rms);
  std::ostringstream csv;
  write_sweep_csv(cells, csv);
  CHECK(csv.str().rfind("mismatch,snr_db,mean_rms,std_rms,trials,seed\n", 0) == 0);
  so.trials = 0;
  CHECK_THROWS_AS(noise_sweep(pm, ks, 2, cfg, so), InputError);
}
