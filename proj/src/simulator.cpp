#include "pipsim/simulator.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "pipsim/analysis.hpp"

namespace pipsim {

SimulationOptions SimulationOptions::ideal() {
  SimulationOptions o;
  o.leakage = false;
  o.adc_bypass = true;
  o.dark_correction = true;
  return o;
}

namespace {

struct SliceWeights {
  PhaseWeights pos;
  PhaseWeights neg;
  long long weight_sum = 0;
};

std::vector<SliceWeights> prepare_slices(const WeightKernel& k, const SplicePlan& plan) {
  const auto [pos, neg] = decompose_weights(k);
  std::vector<SliceWeights> out;
  for (std::size_t part = 0; part < plan.parts.size(); ++part) {
    SliceWeights sw{slice_weights(pos, plan, part), slice_weights(neg, plan, part), 0};
    auto p = sw.pos.weights.flat();
    auto n = sw.neg.weights.flat();
    for (std::size_t i = 0; i < p.size(); ++i) sw.weight_sum += p[i] - n[i];
    out.push_back(std::move(sw));
  }
  return out;
}

// sum((I_i + I_dark) * w_i) over the photodiodes of one tile [A * LSB]
double weighted_current(const ScheduledTile& t, const PhaseWeights& w, const PhotocurrentMap& currents,
                        const ValidatedConfig& cfg, const Grid<double>* dark) {
  const auto row0 = 2 * static_cast<std::size_t>(t.origin.row);
  const auto col0 = 2 * static_cast<std::size_t>(t.origin.col);
  double acc = 0.0;
  for (std::size_t y = 0; y < w.weights.rows(); ++y) {
    for (std::size_t x = 0; x < w.weights.cols(); ++x) {
      const int wt = w.weights(y, x);
      if (wt == 0) continue;
      const double d = dark ? (*dark)(row0 + y, col0 + x) : cfg.i_dark();
      acc += (currents.amps(row0 + y, col0 + x) + d) * wt;
    }
  }
  return acc;
}

struct ChannelOutput {
  FeatureMap map;
  std::vector<CodeRecord> codes;
  int saturated = 0;
  int clamped = 0;
  double diff_sq = 0;
  std::size_t diff_count = 0;
};

enum StreamKey : std::uint64_t { kReset = 0, kShot = 1, kRead = 2, kInject = 3 };

}  // namespace

SimulationResult simulate(const PhotocurrentMap& currents, std::span<const WeightKernel> kernels, int stride,
                          const ValidatedConfig& cfg_in, const SimulationOptions& opts) {
  if (opts.policy == SchedulePolicy::paper_steps)
    throw UnsupportedGeometry("the paper-steps schedule is an accounting schedule; simulate with full-coverage");
  if (kernels.empty()) throw InputError("no kernels to simulate");
  if (currents.amps.rows() != static_cast<std::size_t>(cfg_in.height_px()) ||
      currents.amps.cols() != static_cast<std::size_t>(cfg_in.width_px()))
    throw DimensionMismatch("photocurrent map is " + std::to_string(currents.amps.rows()) + "x" +
                            std::to_string(currents.amps.cols()) + ", sensor is " +
                            std::to_string(cfg_in.height_px()) + "x" + std::to_string(cfg_in.width_px()));
  const int r = kernels.front().r;
  for (const auto& k : kernels) {
    k.validate();
    if (k.r != r) throw InputError("all kernels of one run must share r");
  }
  for (double a : currents.amps.flat())
    if (!(a >= 0) || !std::isfinite(a)) throw InputError("photocurrents must be finite and >= 0");

  std::optional<FixedPattern> fpn;
  if (opts.noise) {
    opts.noise->validate();
    if (opts.noise->fixed_pattern()) fpn = make_fixed_pattern(*opts.noise, cfg_in);
  }
  const PhotocurrentMap eff = fpn && opts.noise->prnu_sigma > 0 ? apply_prnu(currents, *fpn) : currents;
  const Grid<double>* dark = fpn && opts.noise->dsnu_sigma > 0 ? &fpn->dark : nullptr;

  TileSchedule sched = plan_steps(r, stride, cfg_in, opts.policy);
  const SplicePlan& plan = sched.splice;
  std::vector<std::vector<SliceWeights>> slices;
  slices.reserve(kernels.size());
  for (const auto& k : kernels) slices.push_back(prepare_slices(k, plan));

  ValidatedConfig cfg = cfg_in;
  if (opts.auto_exposure) {
    std::vector<double> loads;
    for (const auto& step : sched.steps) {
      for (const auto& t : step.tiles) {
        double ctot = 0.0;
        if (fpn)
          for (double c : fpn->tile_caps(t.origin, t.rows, t.cols)) ctot += c;
        else
          ctot = cfg.c_fd() * t.rows * t.cols;
        for (const auto& ch : slices) {
          const auto& sw = ch[static_cast<std::size_t>(t.pass)];
          loads.push_back(weighted_current(t, sw.pos, eff, cfg, dark) / ctot);
          loads.push_back(weighted_current(t, sw.neg, eff, cfg, dark) / ctot);
        }
      }
    }
    cfg = cfg.with_k_expo(auto_exposure_constant(loads, cfg));
  }
  sched = build_timeline(std::move(sched), cfg, {!opts.strict_timing});

  double inject_sigma = 0.0;
  if (opts.target_snr_db) {
    double power;
    if (opts.signal_power) {
      power = *opts.signal_power;
    } else {
      SimulationOptions clean = opts;
      clean.noise.reset();
      clean.target_snr_db.reset();
      clean.adc_bypass = true;
      clean.record_codes = false;
      power = simulate(currents, kernels, stride, cfg_in, clean).differential_power;
    }
    // split between the two phase readouts
    inject_sigma = inject_target_snr(power, *opts.target_snr_db) / std::sqrt(2.0);
  }

  const AdcModel adc = AdcModel::from_config(cfg, opts.adc_bypass);
  const bool noisy = opts.noise.has_value() || opts.target_snr_db.has_value();
  const std::uint64_t seed = opts.noise ? opts.noise->seed : 0;
  ExposureOptions expo;
  expo.leakage = opts.leakage;
  expo.hold_time = opts.hold_time;
  expo.dark_map = dark;

  std::vector<ChannelOutput> outputs(kernels.size());
  parallel_for(kernels.size(), [&](std::size_t c) {
    ChannelOutput& out = outputs[c];
    out.map.values = Grid<double>(static_cast<std::size_t>(sched.out_rows), static_cast<std::size_t>(sched.out_cols));
    auto& info = out.map.info;
    info.channel_id = kernels[c].channel_id;
    info.r = r;
    info.stride = stride;
    info.policy = opts.policy;
    info.source = noisy ? MapSource::noisy : MapSource::ideal;
    if (opts.noise) info.seed = seed;
    info.adc = !opts.adc_bypass;

    for (const auto& step : sched.steps) {
      StepState state;
      for (const auto& t : step.tiles) {
        std::vector<double> caps;
        if (fpn) caps = fpn->tile_caps(t.origin, t.rows, t.cols);
        state.tiles.emplace(t.id, make_tile(t.id, t.origin, t.rows, t.cols, cfg, caps));
      }
      std::unordered_map<int, const ScheduledTile*> by_id;
      for (const auto& t : step.tiles) by_id.emplace(t.id, &t);
      std::unordered_map<int, ReadoutSample> pos_samples;

      for (Sign phase : {Sign::pos, Sign::neg}) {
        const auto ph = static_cast<std::uint64_t>(phase == Sign::pos ? 0 : 1);
        for (const auto& t : step.tiles) {
          TileState& tile = state.tiles.at(t.id);
          reset_tile(tile, cfg);
          const auto& sw = slices[c][static_cast<std::size_t>(t.pass)];
          if (opts.noise) {
            NoiseRng rng(seed, {c, static_cast<std::uint64_t>(t.id), ph, kReset});
            apply_reset_noise(tile, *opts.noise, rng);
          }
          expose_tile(tile, phase, phase == Sign::pos ? sw.pos : sw.neg, eff, cfg, expo);
          if (opts.noise) {
            NoiseRng rng(seed, {c, static_cast<std::uint64_t>(t.id), ph, kShot});
            apply_shot_noise(tile, *opts.noise, rng);
          }
          if (tile.saturated) ++out.saturated;
        }

        ReadHook hook;
        if (noisy) {
          hook = [&, ph](const TileState&, const ScheduledTile& t, double v) {
            if (opts.noise) {
              NoiseRng rng(seed, {c, static_cast<std::uint64_t>(t.id), ph, kRead});
              v = apply_read_noise(v, t.readout_unit, *opts.noise, fpn ? &*fpn : nullptr, rng);
            }
            if (inject_sigma > 0) {
              NoiseRng rng(seed, {c, static_cast<std::uint64_t>(t.id), ph, kInject});
              v += rng.normal(inject_sigma);
            }
            return v;
          };
        }

        for (const auto& group : step.groups) {
          const GroupReadout gr = read_group(group, step, state, adc, hook);
          for (const auto& row : gr.rows) {
            for (const auto& sample : row) {
              if (sample.clamped) ++out.clamped;
              const ScheduledTile* t = by_id.at(sample.tile_id);
              if (opts.record_codes) {
                CodeRecord rec;
                rec.channel = static_cast<int>(c);
                rec.step = step.index;
                rec.phase = phase;
                rec.group = group.index;
                rec.column = t->readout_unit.col;
                rec.tile = sample.tile_id;
                rec.code = sample.code;
                rec.volts = sample.volts;
                out.codes.push_back(rec);
              }
              if (phase == Sign::pos) {
                pos_samples.emplace(sample.tile_id, sample);
              } else {
                const auto& sw = slices[c][static_cast<std::size_t>(t->pass)];
                const ReadoutSample& pos = pos_samples.at(sample.tile_id);
                const MacValue mv = subtract_phases(sample, pos, adc, t->rows * t->cols, cfg,
                                                    {opts.dark_correction, sw.weight_sum});
                out.map.values(static_cast<std::size_t>(t->out_row), static_cast<std::size_t>(t->out_col)) += mv.mac;
                const double d = sample.volts - pos.volts;
                out.diff_sq += d * d;
                ++out.diff_count;
              }
            }
          }
        }
      }
    }
  });

  SimulationResult res;
  res.k_expo = cfg.k_expo();
  double sq = 0.0;
  std::size_t n = 0;
  for (auto& o : outputs) {
    res.saturated_tiles += o.saturated;
    res.clamped_codes += o.clamped;
    sq += o.diff_sq;
    n += o.diff_count;
    res.codes.insert(res.codes.end(), o.codes.begin(), o.codes.end());
    res.maps.push_back(std::move(o.map));
  }
  res.differential_power = n ? sq / static_cast<double>(n) : 0.0;
  res.schedule = std::move(sched);
  return res;
}

std::vector<SweepCell> noise_sweep(const PhotocurrentMap& currents, std::span<const WeightKernel> kernels, int stride,
                                   const ValidatedConfig& cfg, const SweepOptions& opts) {
  if (opts.trials < 1) throw InputError("trials must be >= 1");
  if (opts.mismatch.empty() || opts.snr_db.empty()) throw InputError("sweep grid is empty");
  for (double m : opts.mismatch)
    if (!(m >= 0)) throw InputError("mismatch levels must be >= 0");

  const auto reference = oracle_conv(currents, kernels, stride);

  SimulationOptions clean;
  clean.adc_bypass = true;
  clean.dark_correction = true;
  const double power = simulate(currents, kernels, stride, cfg, clean).differential_power;

  std::vector<SweepCell> cells;
  for (double m : opts.mismatch) {
    for (double snr : opts.snr_db) {
      SweepCell cell;
      cell.mismatch = m;
      cell.snr_db = snr;
      cell.trials = opts.trials;
      cell.seed = opts.seed;
      std::vector<double> rms;
      for (int t = 0; t < opts.trials; ++t) {
        SimulationOptions so;
        so.adc_bypass = opts.adc_bypass;
        so.dark_correction = true;
        so.noise = opts.base;
        so.noise->seed = mix_seed(opts.seed, {static_cast<std::uint64_t>(t)});
        so.noise->mismatch_sigma = m;
        if (std::isfinite(snr)) so.target_snr_db = snr;
        so.signal_power = power;
        const auto sim = simulate(currents, kernels, stride, cfg, so);
        rms.push_back(mean_rms(sim.maps, reference));
      }
      double mean = 0.0;
      for (double x : rms) mean += x;
      mean /= static_cast<double>(rms.size());
      double var = 0.0;
      for (double x : rms) var += (x - mean) * (x - mean);
      cell.mean_rms = mean;
      cell.std_rms = rms.size() > 1 ? std::sqrt(var / static_cast<double>(rms.size() - 1)) : 0.0;
      cells.push_back(cell);
    }
  }
  return cells;
}

void write_sweep_csv(std::span<const SweepCell> cells, std::ostream& out) {
  out << "mismatch,snr_db,mean_rms,std_rms,trials,seed\n";
  char buf[256];
  for (const auto& c : cells) {
    std::snprintf(buf, sizeof buf, "%g,%g,%.6e,%.6e,%d,%llu\n", c.mismatch, c.snr_db, c.mean_rms, c.std_rms, c.trials,
                  static_cast<unsigned long long>(c.seed));
    out << buf;
  }
}

}  // namespace pipsim
