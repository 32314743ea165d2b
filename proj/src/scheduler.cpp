#include "pipsim/scheduler.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

namespace pipsim {

namespace {

int ceil_div(int a, int b) { return (a + b - 1) / b; }

void require_supported(int r, int s) {
  if (r != 3 && r != 5 && r != 7 && r != 9)
    throw UnsupportedGeometry("kernel side must be 3, 5, 7 or 9 (got " + std::to_string(r) + ")");
  if (s != 2 && s != 4) throw UnsupportedGeometry("stride must be 2 or 4 (got " + std::to_string(s) + ")");
}

}  // namespace

SplicePlan splice_plan(int r) {
  if (r != 3 && r != 5 && r != 7 && r != 9)
    throw UnsupportedGeometry("no splicing plan for r = " + std::to_string(r));
  SplicePlan plan;
  plan.r = r;
  const int parts = (r - 1) / 2;
  for (int j = 0; j < parts; ++j) plan.parts.push_back({2 * j, 3, j == 0 ? 0 : 2 * j + 1});
  return plan;
}

PhaseWeights slice_weights(const PhaseWeights& full, const SplicePlan& plan, std::size_t part) {
  const auto side = static_cast<std::size_t>(2 * plan.r);
  if (full.weights.rows() != side || full.weights.cols() != side)
    throw DimensionMismatch("phase weights do not match the splice plan");
  const SubKernel& sk = plan.parts.at(part);
  PhaseWeights out{Grid<int>(side, 2 * static_cast<std::size_t>(sk.cols))};
  for (int uc = sk.owned_begin; uc < sk.col_begin + sk.cols; ++uc) {
    for (int dx = 0; dx < 2; ++dx) {
      const auto src_col = static_cast<std::size_t>(2 * uc + dx);
      const auto dst_col = static_cast<std::size_t>(2 * (uc - sk.col_begin) + dx);
      for (std::size_t y = 0; y < side; ++y) out.weights(y, dst_col) = full.weights(y, src_col);
    }
  }
  return out;
}

WireOrientation wire_orientation(int col_origin, int cols) noexcept {
  if (cols != 3 || col_origin < 0) return WireOrientation::invalid;
  const Wire a = wire_for_column(col_origin);
  const Wire b = wire_for_column(col_origin + 1);
  const Wire c = wire_for_column(col_origin + 2);
  if (a == Wire::W1 && b == Wire::W2 && c == Wire::W3) return WireOrientation::forward;
  if (a == Wire::W3 && b == Wire::W2 && c == Wire::W1) return WireOrientation::reversed;
  return WireOrientation::invalid;
}

int TileSchedule::max_readouts_per_step() const noexcept {
  std::size_t n = 0;
  for (const auto& st : steps) n = std::max(n, st.groups.size());
  return static_cast<int>(n);
}

std::size_t TileSchedule::tile_count() const noexcept {
  std::size_t n = 0;
  for (const auto& st : steps) n += st.tiles.size();
  return n;
}

int paper_steps_total(int r, int s) {
  require_supported(r, s);
  return ceil_div(r + 1, s) * (r - 1);
}

int equivalent_exposures(int r, int s, bool include_transition_wait) {
  require_supported(r, s);
  return (2 * ceil_div(r + 1, s) + (include_transition_wait ? 1 : 0)) * (r - 1);
}

int count_equivalent_exposures(const TileSchedule& sched) {
  int n = 0;
  for (const auto& st : sched.steps) n += 2 + (st.column_flip ? 1 : 0);
  return n;
}

TileSchedule plan_steps(int r, int s, const ValidatedConfig& cfg, SchedulePolicy policy) {
  require_supported(r, s);
  TileSchedule sched;
  sched.policy = policy;
  sched.r = r;
  sched.s = s;
  sched.splice = splice_plan(r);
  if (policy == SchedulePolicy::paper_steps) {
    sched.grid_rows = cfg.height_px();
    sched.grid_cols = cfg.width_px();
    sched.row_classes = ceil_div(r + 1, s);
    sched.col_classes = 2;
  } else {
    sched.grid_rows = cfg.unit_height();
    sched.grid_cols = cfg.unit_width();
    sched.row_classes = ceil_div(r, s);
    sched.col_classes = ceil_div(3, s);
  }
  const OutputGeometry geom = output_geometry(sched.grid_rows, sched.grid_cols, r, s);
  sched.out_rows = geom.rows;
  sched.out_cols = geom.cols;

  const int period = sched.row_period();
  int next_id = 0;
  for (int pass = 0; pass < sched.passes(); ++pass) {
    const SubKernel& sk = sched.splice.parts[static_cast<std::size_t>(pass)];
    for (int cc = 0; cc < sched.col_classes; ++cc) {
      for (int rc = 0; rc < sched.row_classes; ++rc) {
        ScheduleStep step;
        step.index = static_cast<int>(sched.steps.size());
        step.pass = pass;
        step.row_class = rc;
        step.col_class = cc;
        step.column_flip = rc == 0;  // column class or pass changes (incl. the wrap to step 1)
        for (int i = rc; i < sched.out_rows; i += sched.row_classes) {
          const int tile_row = i / sched.row_classes;
          for (int k = cc; k < sched.out_cols; k += sched.col_classes) {
            ScheduledTile t;
            t.id = next_id++;
            t.out_row = i;
            t.out_col = k;
            t.pass = pass;
            t.origin = {i * s, k * s + sk.col_begin};
            t.rows = r;
            t.cols = sk.cols;
            t.tile_row = tile_row;
            t.group = tile_row / 3;
            t.enable = tile_row % 3;
            t.readout_unit = {tile_row * period + (r - 1), t.origin.col + t.enable};
            step.tiles.push_back(t);
          }
        }
        std::map<int, ReadGroup> groups;
        for (const auto& t : step.tiles) {
          auto [it, fresh] = groups.try_emplace(t.group);
          ReadGroup& g = it->second;
          if (fresh) {
            g.index = t.group;
            g.row_begin = t.origin.row;
            g.row_end = t.origin.row + t.rows;
          }
          if (std::find(g.tile_rows.begin(), g.tile_rows.end(), t.tile_row) == g.tile_rows.end())
            g.tile_rows.push_back(t.tile_row);
          g.tile_ids.push_back(t.id);
          g.row_begin = std::min(g.row_begin, t.origin.row);
          g.row_end = std::max(g.row_end, t.origin.row + t.rows);
        }
        for (auto& [idx, g] : groups) step.groups.push_back(std::move(g));
        sched.steps.push_back(std::move(step));
      }
    }
  }
  return sched;
}

PipelineCheck check_pipeline(int n_rd, double t_rd, double t_rst, double t_expo) {
  const double slack = (n_rd - 1) * t_rd - t_rst - t_expo;
  return {slack >= 0, slack};
}

TileSchedule build_timeline(TileSchedule sched, const ValidatedConfig& cfg, TimelineOptions opts) {
  const double t_rd = cfg.t_rd();
  const double t_rst = cfg.t_rst();
  const double t_expo = cfg.exposure_window();
  sched.timeline.clear();
  sched.stalls.clear();

  double bus_free = 0.0;
  bool first = true;
  bool pending_flip = false;
  std::vector<double> prev_done;
  std::vector<std::pair<int, int>> prev_spans;

  for (const auto& step : sched.steps) {
    pending_flip = pending_flip || step.column_flip;
    const auto n = step.groups.size();
    if (n == 0) continue;
    const PipelineCheck check = check_pipeline(static_cast<int>(n), t_rd, t_rst, t_expo);
    if (n >= 2 && !check.satisfied && !opts.allow_stalls) {
      std::ostringstream msg;
      msg << "step " << step.index << ": " << n << " read groups cannot hide reset+exposure ("
          << (n - 1) * t_rd * 1e6 << " us of readout < " << (t_rst + t_expo) * 1e6 << " us)";
      throw InfeasibleTiming(msg.str());
    }

    std::vector<double> t_reset(n), t_start(n), ready(n);
    for (std::size_t g = 0; g < n; ++g) {
      double start = 0.0;
      if (first || pending_flip) {
        start = bus_free;
      } else {
        for (std::size_t h = 0; h < prev_spans.size(); ++h) {
          const bool overlap = prev_spans[h].first < step.groups[g].row_end &&
                               step.groups[g].row_begin < prev_spans[h].second;
          if (overlap) start = std::max(start, prev_done[h]);
        }
      }
      t_reset[g] = start;
      t_start[g] = start + t_rst;
      ready[g] = t_start[g] + t_expo;
    }
    if (first || pending_flip) sched.stalls.push_back({step.index, ready[0] - bus_free});

    std::vector<double> done(n);
    for (Sign phase : {Sign::pos, Sign::neg}) {
      for (std::size_t g = 0; g < n; ++g) {
        GroupTiming tm;
        tm.step = step.index;
        tm.phase = phase;
        tm.group = step.groups[g].index;
        tm.t_reset = t_reset[g];
        tm.t_expose_start = t_start[g];
        tm.t_expose_end = ready[g];
        tm.t_read_start = std::max(bus_free, ready[g]);
        tm.t_read_end = tm.t_read_start + t_rd;
        tm.slack = check.slack;
        bus_free = tm.t_read_end;
        sched.timeline.push_back(tm);
        if (phase == Sign::pos) {
          t_reset[g] = tm.t_read_end;
          t_start[g] = t_reset[g] + t_rst;
          ready[g] = t_start[g] + t_expo;
        } else {
          done[g] = tm.t_read_end;
        }
      }
    }
    prev_done = std::move(done);
    prev_spans.clear();
    for (const auto& g : step.groups) prev_spans.emplace_back(g.row_begin, g.row_end);
    first = false;
    pending_flip = false;
  }
  sched.cycle_time = bus_free;
  return sched;
}

RollingShutterPlan traditional_mode_plan(const ValidatedConfig& cfg) {
  RollingShutterPlan plan;
  plan.t_row = 4.0 / cfg.f_adc();
  plan.t_expo = cfg.exposure_window();
  for (int u = 0; u < cfg.unit_height(); ++u) {
    RollingRow row;
    row.unit_row = u;
    row.t_reset = u * plan.t_row;
    row.t_expose_start = row.t_reset + cfg.t_rst();
    row.t_read_start = row.t_expose_start + plan.t_expo;
    row.t_read_end = row.t_read_start + plan.t_row;
    plan.rows.push_back(row);
  }
  plan.frame_time = cfg.t_rst() + plan.t_expo + cfg.unit_height() * plan.t_row;
  return plan;
}

WiringReport wiring_check(const TileSchedule& sched, std::span<const int> enable_map) {
  WiringReport rep;
  const int period = sched.row_period();
  auto enable_of = [&](int readout_row_index) {
    if (!enable_map.empty()) {
      if (readout_row_index < 0 || static_cast<std::size_t>(readout_row_index) >= enable_map.size()) return -1;
      return enable_map[static_cast<std::size_t>(readout_row_index)];
    }
    return readout_row_index % 3;
  };
  for (const auto& step : sched.steps) {
    for (const auto& t : step.tiles) {
      switch (wire_orientation(t.origin.col, t.cols)) {
        case WireOrientation::forward: ++rep.forward_tiles; break;
        case WireOrientation::reversed: ++rep.reversed_tiles; break;
        case WireOrientation::invalid:
          rep.violations.push_back({step.index, t.id, "wire order is neither W1,W2,W3 nor W3,W2,W1"});
          break;
      }
      const int rr = t.readout_unit.row;
      if (rr < t.origin.row || rr >= t.origin.row + t.rows)
        rep.violations.push_back({step.index, t.id, "readout row lies outside the tile"});
      if ((rr - (sched.r - 1)) % period != 0)
        rep.violations.push_back({step.index, t.id, "readout row is not an enable-wired row"});
    }
    for (const auto& g : step.groups) {
      if (g.tile_rows.size() > 3)
        rep.violations.push_back({step.index, -1, "group " + std::to_string(g.index) + " has more than three tile-rows"});
      std::set<int> seen;
      for (int tr : g.tile_rows) {
        const int e = enable_of(tr);
        if (e < 0 || e > 2) {
          rep.violations.push_back({step.index, -1, "tile-row " + std::to_string(tr) + " has no C1-C3 enable"});
        } else if (!seen.insert(e).second) {
          rep.violations.push_back({step.index, -1,
                                    "group " + std::to_string(g.index) + " drives C" + std::to_string(e + 1) +
                                        " from two tile-rows"});
        }
      }
    }
  }
  return rep;
}

std::vector<std::string> find_overlaps(const TileSchedule& sched) {
  std::vector<std::string> out;
  for (const auto& step : sched.steps) {
    std::map<std::pair<int, int>, int> owner;
    for (const auto& t : step.tiles) {
      for (int y = t.origin.row; y < t.origin.row + t.rows; ++y) {
        for (int x = t.origin.col; x < t.origin.col + t.cols; ++x) {
          auto [it, fresh] = owner.try_emplace({y, x}, t.id);
          if (!fresh)
            out.push_back(std::to_string(step.index) + ":" + std::to_string(it->second) + ":" + std::to_string(t.id));
        }
      }
    }
  }
  return out;
}

std::vector<std::string> find_coverage_errors(const TileSchedule& sched) {
  std::map<std::tuple<int, int, int>, int> hits;
  for (const auto& step : sched.steps)
    for (const auto& t : step.tiles) ++hits[{t.pass, t.out_row, t.out_col}];
  std::vector<std::string> out;
  for (int p = 0; p < sched.passes(); ++p) {
    for (int i = 0; i < sched.out_rows; ++i) {
      for (int k = 0; k < sched.out_cols; ++k) {
        const auto it = hits.find({p, i, k});
        const int n = it == hits.end() ? 0 : it->second;
        if (n != 1)
          out.push_back("pass " + std::to_string(p) + " (" + std::to_string(i) + "," + std::to_string(k) +
                        ") covered " + std::to_string(n) + "x");
      }
    }
  }
  if (hits.size() != static_cast<std::size_t>(sched.passes() * sched.out_rows * sched.out_cols))
    out.push_back("tiles outside the output grid");
  return out;
}

void write_schedule_csv(const TileSchedule& sched, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out.precision(12);
  std::map<std::tuple<int, int, int>, const GroupTiming*> timing;
  for (const auto& tm : sched.timeline) timing[{tm.step, tm.group, tm.phase == Sign::pos ? 0 : 1}] = &tm;
  out << "# policy=" << to_string(sched.policy) << " r=" << sched.r << " s=" << sched.s
      << " steps=" << sched.total_steps() << " out_rows=" << sched.out_rows << " out_cols=" << sched.out_cols << "\n";
  out << "step,pass,tile,out_row,out_col,origin_row,origin_col,rows,cols,group,enable,"
         "t_reset_pos,t_read_pos,t_reset_neg,t_read_neg\n";
  for (const auto& step : sched.steps) {
    for (const auto& t : step.tiles) {
      out << step.index << ',' << t.pass << ',' << t.id << ',' << t.out_row << ',' << t.out_col << ','
          << t.origin.row << ',' << t.origin.col << ',' << t.rows << ',' << t.cols << ',' << t.group << ','
          << t.enable;
      for (int ph = 0; ph < 2; ++ph) {
        const auto it = timing.find({step.index, t.group, ph});
        if (it == timing.end())
          out << ",,";
        else
          out << ',' << it->second->t_reset << ',' << it->second->t_read_start;
      }
      out << '\n';
    }
  }
}

}  // namespace pipsim
