#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "explo/config_io.hpp"
#include "explo/frontier.hpp"
#include "explo/global_map.hpp"
#include "explo/local_grid.hpp"
#include "explo/occupancy2d.hpp"
#include "explo/trajopt.hpp"

namespace explo::mission {

struct TrackState {
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
};

/// Kinematic stand-in for the attitude/thrust loop: first-order lag towards
/// the curve sample, step length capped at v_max * dt.
class Tracker {
 public:
  Tracker(double lag, double v_max);

  /// State after dt when chasing spline.position(t_curve).
  TrackState step(const traj::UniformBspline& spline, double t_curve, const TrackState& current, double dt) const;

 private:
  double lag_;
  double v_max_;
};

struct WatchResult {
  bool clear = true;
  double hit_time = 0.0;  // curve time of the first blocked sample
};

/// Samples the curve from t_from to its end and reports the first sample in
/// an occupied cell. A blocked run at the very start (the vehicle sitting in
/// an inflated cell) is skipped.
WatchResult collision_watch(const traj::UniformBspline& spline, const grid::LocalGridMap& map, double t_from,
                            double sample_dt = 0.02);

/// 2D A* over the exploration grid. Occupied cells are walls, cells within
/// `clearance` of them are expensive, unknown cells are free. Returns cell
/// centres from `from` to `to` (endpoints exact); empty when unreachable.
std::vector<Vec2> route_2d(const explore::OccupancyGrid2D& grid, const Vec2& from, const Vec2& to, double clearance);

enum class Termination { NoFrontier, BelowThreshold, BudgetExceeded, Failure };
std::string to_string(Termination t);

struct TickRecord {
  double t = 0.0;
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  int goal_id = -1;
  double known_fraction = 0.0;
};

struct GoalRecord {
  int id = 0;
  double t = 0.0;
  Vec3 pos = Vec3::Zero();
  double revenue = 0.0;
  std::int64_t f_info = 0;
  double f_dist = 0.0;
  double angle = 0.0;
  int candidates = 0;
  bool is_return = false;
};

/// Everything select_goal saw on one call, kept for oracle replay.
struct SelectionRecord {
  std::vector<explore::FrontierCandidate> candidates;
  explore::ExploreState state;  // before the history shift
  explore::RevenueMode mode = explore::RevenueMode::Direction;
  std::size_t chosen = 0;
};

struct EpisodeMetrics {
  std::vector<TickRecord> ticks;
  std::vector<GoalRecord> goals;
  std::vector<SelectionRecord> selections;
  std::vector<std::pair<double, double>> coverage_over_time;  // (t, reachable coverage)
  Termination termination = Termination::BudgetExceeded;
  bool returned_home = false;
  double sim_time = 0.0;
  double path_length = 0.0;
  double explore_path_length = 0.0;  // before the return leg
  double known_fraction = 0.0;       // of boundary cells
  double reachable_coverage = 0.0;   // of reachable free cells
  double heading_change = 0.0;       // mean |turn| between successive goal legs, rad
  int explore_goals = 0;
  int planning_failures = 0;
  int replans = 0;
  int watch_triggers = 0;
  int collision_ticks = 0;  // ticks with the true position inside an obstacle
  double wall_clock = 0.0;
};

struct TrajectorySample {
  double t = 0.0;
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
};

struct EpisodeResult {
  EpisodeMetrics metrics;
  explore::GlobalCloudMap cloud;
  explore::OccupancyGrid2D grid;
  std::vector<explore::OccupancyGrid2D> snapshots;
  grid::LocalGridMap local_map;
  std::vector<TrajectorySample> trajectory;  // track rate
};

/// Free cells (at flight altitude) 4-connected to the start cell in the true scene.
std::vector<std::size_t> reachable_cells(const Scene& scene, const explore::OccupancyGrid2D& layout,
                                         const Vec2& start, double altitude);
double coverage_of(const explore::OccupancyGrid2D& grid, std::span<const std::size_t> cells);

/// Mean absolute turn between successive legs start->G1->G2->...; return goals excluded.
double heading_change(const Vec2& start, std::span<const GoalRecord> goals);

EpisodeResult run_episode(const ScenarioConfig& config);

/// metrics.csv, goals.csv, summary.json, trajectory.csv, map.ply,
/// occupancy_####.pgm, local_slice.pgm, config-echo.json.
void export_artifacts(const EpisodeResult& result, const ScenarioConfig& config, const std::string& out_dir);

struct EpisodeSummary {
  std::uint64_t seed = 0;
  std::string mode;
  std::string termination;
  int goals = 0;
  double path_length = 0.0;
  double heading_change = 0.0;
  double known_fraction = 0.0;
  double reachable_coverage = 0.0;
  double sim_time = 0.0;
};

EpisodeSummary summarize(const EpisodeResult& result, const ScenarioConfig& config);
EpisodeSummary read_summary(const std::string& path);

/// Pairs baseline/direction summaries under out_dir/<mode>/seed_<n>/ and
/// writes out_dir/compare.csv. Returns the CSV text.
std::string compare_runs(const std::string& out_dir);

}  // namespace explo::mission
