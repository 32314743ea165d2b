#pragma once

#include <span>
#include <string>
#include <vector>

#include "pipsim/core.hpp"
#include "pipsim/pixel_engine.hpp"

namespace pipsim {

// ---------------------------------------------------------------------------
// Kernel splicing
// ---------------------------------------------------------------------------

/// One r x 3 slice of an r x r kernel, in kernel unit columns.
/// Slice j spans [2j, 2j + 3); a column shared with the slice to its left
/// carries zero weight here (the left slice owns it).
struct SubKernel {
  int col_begin = 0;
  int cols = 3;
  int owned_begin = 0;  // first column this slice contributes
};

struct SplicePlan {
  int r = 3;
  std::vector<SubKernel> parts;
  bool spliced() const noexcept { return parts.size() > 1; }
};

/// r = 3 is a single native slice; r in {5, 7, 9} splits into (r - 1) / 2 slices.
SplicePlan splice_plan(int r);

/// Photodiode weights of one slice (2r x 6), taken from 2r x 2r phase weights.
PhaseWeights slice_weights(const PhaseWeights& full, const SplicePlan& plan, std::size_t part);

// ---------------------------------------------------------------------------
// Schedule
// ---------------------------------------------------------------------------

enum class Wire { W1, W2, W3 };
enum class WireOrientation { forward, reversed, invalid };

/// Weight-loading wire of a unit column: W1, W2, W3, W2, W1, W2, W3, ...
constexpr Wire wire_for_column(int unit_col) noexcept {
  switch (unit_col % 4) {
    case 0: return Wire::W1;
    case 2: return Wire::W3;
    default: return Wire::W2;
  }
}

WireOrientation wire_orientation(int col_origin, int cols) noexcept;

struct ScheduledTile {
  int id = 0;        // unique across the schedule
  int out_row = 0;   // output coordinates
  int out_col = 0;
  int pass = 0;      // splice slice index
  UnitCoord origin;  // on the schedule grid
  int rows = 0;
  int cols = 0;
  int tile_row = 0;  // index of the tile-row within its step
  int group = 0;
  int enable = 0;    // 0..2 -> C1..C3
  UnitCoord readout_unit;
};

/// Tile-rows read together through C1-C3 (at most three).
struct ReadGroup {
  int index = 0;
  std::vector<int> tile_rows;
  std::vector<int> tile_ids;
  int row_begin = 0;  // unit-row span of its tiles
  int row_end = 0;
};

struct ScheduleStep {
  int index = 0;
  int pass = 0;
  int row_class = 0;
  int col_class = 0;
  bool column_flip = false;  // column-direction splicing changes before this step
  std::vector<ScheduledTile> tiles;
  std::vector<ReadGroup> groups;
};

struct GroupTiming {
  int step = 0;
  Sign phase = Sign::pos;
  int group = 0;
  double t_reset = 0;
  double t_expose_start = 0;
  double t_expose_end = 0;
  double t_read_start = 0;
  double t_read_end = 0;
  double slack = 0;  // (n_rd - 1) t_rd - t_rst - t_expo for this step
};

struct StallEvent {
  int before_step = 0;
  double duration = 0;
};

struct TileSchedule {
  SchedulePolicy policy = SchedulePolicy::full_coverage;
  int r = 3;
  int s = 2;
  int grid_rows = 0;  // sites (paper-steps) or pixel units (full-coverage)
  int grid_cols = 0;
  int out_rows = 0;
  int out_cols = 0;
  int row_classes = 0;
  int col_classes = 0;
  SplicePlan splice;
  std::vector<ScheduleStep> steps;

  // Filled by build_timeline.
  std::vector<GroupTiming> timeline;
  std::vector<StallEvent> stalls;
  double cycle_time = 0;

  int passes() const noexcept { return static_cast<int>(splice.parts.size()); }
  int steps_per_pass() const noexcept { return row_classes * col_classes; }
  int total_steps() const noexcept { return static_cast<int>(steps.size()); }
  int row_period() const noexcept { return row_classes * s; }
  int max_readouts_per_step() const noexcept;
  std::size_t tile_count() const noexcept;
};

/// Total steps of the paper-steps policy: ceil((r+1)/s) * (r-1), summed over splice passes.
int paper_steps_total(int r, int s);

/// [2 ceil((r+1)/s) + 1] (r - 1); without the step-transition wait the "+1" term drops.
int equivalent_exposures(int r, int s, bool include_transition_wait = true);

/// Two exposures per step plus one per column-direction transition.
int count_equivalent_exposures(const TileSchedule& sched);

/// Enumerates steps, tiles, and read groups.
/// full-coverage: pixel-unit grid, ceil(r/s) x ceil(3/s) classes per pass.
/// paper-steps: height_px x width_px site grid, ceil((r+1)/s) x 2 classes per
/// pass (an accounting schedule with the reference step and readout counts).
/// Throws UnsupportedGeometry unless r in {3,5,7,9} and s in {2,4}.
TileSchedule plan_steps(int r, int s, const ValidatedConfig& cfg, SchedulePolicy policy);

struct PipelineCheck {
  bool satisfied = false;
  double slack = 0;
};

/// (n_rd - 1) t_rd >= t_rst + t_expo.
PipelineCheck check_pipeline(int n_rd, double t_rd, double t_rst, double t_expo);

struct TimelineOptions {
  bool allow_stalls = false;
};

/// Pipelined reset/expose/read timeline. Each group is reset right after its
/// readout and exposed for the next phase while later groups are read.
/// Column-flip steps wait for every earlier read before resetting.
/// Throws InfeasibleTiming when a multi-group step violates the pipeline
/// inequality and stalls are not allowed. Single-group steps run serially.
TileSchedule build_timeline(TileSchedule sched, const ValidatedConfig& cfg, TimelineOptions opts = {});

struct RollingRow {
  int unit_row = 0;
  double t_reset = 0;
  double t_expose_start = 0;
  double t_read_start = 0;
  double t_read_end = 0;
};

struct RollingShutterPlan {
  double t_row = 0;  // four photodiode conversions per unit row
  double t_expo = 0;
  double frame_time = 0;
  std::vector<RollingRow> rows;
};

/// Traditional-mode rolling shutter: unit rows read in order, each reset
/// t_rst + t_expo ahead of its read slot.
RollingShutterPlan traditional_mode_plan(const ValidatedConfig& cfg);

struct WiringViolation {
  int step = 0;
  int tile_id = 0;
  std::string reason;
};

struct WiringReport {
  std::vector<WiringViolation> violations;
  int forward_tiles = 0;
  int reversed_tiles = 0;
  bool ok() const noexcept { return violations.empty(); }
};

/// Checks wire orders, readout-row placement, and C1-C3 enables.
/// `enable_map[n]` overrides the enable of readout row n (default n % 3).
WiringReport wiring_check(const TileSchedule& sched, std::span<const int> enable_map = {});

/// Pairs of overlapping tiles within a step ("step:tileA:tileB").
std::vector<std::string> find_overlaps(const TileSchedule& sched);
/// Output positions (per pass) not covered exactly once.
std::vector<std::string> find_coverage_errors(const TileSchedule& sched);

void write_schedule_csv(const TileSchedule& sched, const std::string& path);

}  // namespace pipsim
