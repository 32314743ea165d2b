#include "pipsim/readout.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace pipsim {

AdcModel AdcModel::from_config(const ValidatedConfig& cfg, bool bypass) {
  return {cfg.adc_bits(), cfg.v_min(), cfg.v_rst(), cfg.f_adc(), bypass};
}

Conversion quantize(double volts, const AdcModel& adc) {
  const double x = (volts - adc.v_lo) / (adc.v_hi - adc.v_lo) * adc.max_code();
  // round half away from zero; 511.5 -> 512
  const double rounded = std::round(x);
  if (rounded < 0) return {0, true};
  if (rounded > adc.max_code()) return {adc.max_code(), true};
  return {static_cast<int>(rounded), false};
}

double dequantize(int code, const AdcModel& adc) {
  return adc.v_lo + static_cast<double>(code) / adc.max_code() * (adc.v_hi - adc.v_lo);
}

ReadoutSample convert(int tile_id, Sign phase, double volts, const AdcModel& adc) {
  ReadoutSample s;
  s.tile_id = tile_id;
  s.phase = phase;
  s.volts = volts;
  if (!adc.bypass) {
    const Conversion c = quantize(volts, adc);
    s.code = c.code;
    s.clamped = c.clamped;
  }
  return s;
}

MacValue subtract_phases(const ReadoutSample& neg, const ReadoutSample& pos, const AdcModel& adc, int units,
                         const ValidatedConfig& cfg, const SubtractOptions& opts) {
  if (neg.tile_id != pos.tile_id)
    throw PhaseMismatch("samples from tiles " + std::to_string(neg.tile_id) + " and " +
                        std::to_string(pos.tile_id));
  if (neg.phase != Sign::neg || pos.phase != Sign::pos) throw PhaseMismatch("phase order must be (neg, pos)");
  MacValue out;
  out.scale = units * cfg.c_fd() / cfg.k_expo();
  out.mac = (neg.value(adc) - pos.value(adc)) * out.scale;
  if (opts.dark_correction) out.mac -= cfg.i_dark() * static_cast<double>(opts.weight_sum);
  return out;
}

GroupReadout read_group(const ReadGroup& group, const ScheduleStep& step, StepState& states, const AdcModel& adc,
                        const ReadHook& hook) {
  std::map<int, std::vector<const ScheduledTile*>> by_row;
  for (const auto& t : step.tiles)
    if (t.group == group.index) by_row[t.tile_row].push_back(&t);

  for (const auto& [row, tiles] : by_row) {
    for (const auto* t : tiles) {
      const auto it = states.tiles.find(t->id);
      if (it == states.tiles.end() || it->second.phase != TilePhase::ready)
        throw NotReady("tile " + std::to_string(t->id) + " of group " + std::to_string(group.index) +
                       " is not ready for readout");
    }
  }

  GroupReadout out;
  out.group = group.index;
  for (auto& [row, tiles] : by_row) {
    std::sort(tiles.begin(), tiles.end(),
              [](const ScheduledTile* a, const ScheduledTile* b) { return a->origin.col < b->origin.col; });
    std::vector<ReadoutSample> samples;
    samples.reserve(tiles.size());
    for (const auto* t : tiles) {
      TileState& st = states.tiles.at(t->id);
      const int local = (t->readout_unit.row - st.origin.row) * st.cols + (t->readout_unit.col - st.origin.col);
      double v = st.volts.at(static_cast<std::size_t>(local));
      if (hook) v = hook(st, *t, v);
      samples.push_back(convert(t->id, st.sign, v, adc));
      st.phase = TilePhase::read;
    }
    out.rows.push_back(std::move(samples));
  }
  ++states.slots_used;
  return out;
}

Grid<double> traditional_readout(const PhotocurrentMap& currents, const ValidatedConfig& cfg, double t_expo,
                                 bool leakage) {
  Grid<double> out(currents.amps.rows(), currents.amps.cols());
  const bool leaky = leakage && std::isfinite(cfg.r_leak());
  const double c = cfg.c_fd();
  for (std::size_t y = 0; y < out.rows(); ++y) {
    for (std::size_t x = 0; x < out.cols(); ++x) {
      const double i = currents.amps(y, x) + cfg.i_dark();
      double v;
      if (!leaky) {
        v = cfg.v_rst() - i * t_expo / c;
      } else {
        const double tau = cfg.r_leak() * c;
        const double v_inf = -i * cfg.r_leak();
        v = cfg.v_rst() + (v_inf - cfg.v_rst()) * -std::expm1(-t_expo / tau);
      }
      out(y, x) = std::max(v, cfg.v_min());
    }
  }
  return out;
}

void write_codes_csv(const std::vector<CodeRecord>& codes, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out.precision(17);
  out << "channel,step,phase,group,column,tile,code,volts\n";
  for (const auto& c : codes)
    out << c.channel << ',' << c.step << ',' << (c.phase == Sign::pos ? '+' : '-') << ',' << c.group << ',' << c.column << ','
        << c.tile << ',' << c.code << ',' << c.volts << '\n';
}

}  // namespace pipsim
