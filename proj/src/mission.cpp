#include "explo/mission.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>

#include "explo/odom.hpp"
#include "explo/rng.hpp"
#include "json.hpp"

namespace explo::mission {

namespace fs = std::filesystem;
using explore::Cell2;
using explore::OccupancyGrid2D;
using traj::UniformBspline;

Tracker::Tracker(double lag, double v_max) : lag_(lag), v_max_(v_max) {
  if (!(lag >= 0.0) || !(v_max > 0.0)) throw std::invalid_argument("tracker needs lag >= 0 and v_max > 0");
}

TrackState Tracker::step(const UniformBspline& spline, double t_curve, const TrackState& current, double dt) const {
  const Vec3 ref = spline.position(std::clamp(t_curve, 0.0, spline.duration()));
  Vec3 delta = ref - current.pos;
  if (lag_ > 0.0) delta *= 1.0 - std::exp(-dt / lag_);
  const double cap = v_max_ * dt;
  const double len = delta.norm();
  if (len > cap) delta *= cap / len;
  return TrackState{current.pos + delta, delta / dt};
}

WatchResult collision_watch(const UniformBspline& spline, const grid::LocalGridMap& map, double t_from,
                            double sample_dt) {
  const double end = spline.duration();
  bool leading = true;
  for (double t = std::max(0.0, t_from);; t += sample_dt) {
    const double tc = std::min(t, end);
    const bool hit = map.is_occupied(spline.position(tc));
    if (!hit) leading = false;
    if (hit && !leading) return WatchResult{false, tc};
    if (tc >= end) break;
  }
  return {};
}

std::vector<Vec2> route_2d(const OccupancyGrid2D& grid, const Vec2& from, const Vec2& to, double clearance) {
  const auto s = grid.cell_in_bounds(from), g = grid.cell_in_bounds(to);
  if (!s || !g) return {};
  const int nx = grid.nx(), ny = grid.ny();
  const std::size_t n = static_cast<std::size_t>(nx) * ny;
  const auto& cells = grid.cells();

  std::vector<std::uint8_t> near(n, 0);
  const int k = static_cast<int>(std::ceil(clearance / grid.resolution()));
  const double r2 = std::pow(clearance / grid.resolution(), 2);
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      if (cells[grid.index({x, y})] != explore::kOccupied) continue;
      for (int dy = -k; dy <= k; ++dy)
        for (int dx = -k; dx <= k; ++dx) {
          const Cell2 c{x + dx, y + dy};
          if (dx * dx + dy * dy <= r2 && grid.in_bounds(c)) near[grid.index(c)] = 1;
        }
    }

  constexpr double kNearPenalty = 5.0;
  const std::size_t start = grid.index(*s), goal = grid.index(*g);
  std::vector<double> cost(n, std::numeric_limits<double>::infinity());
  std::vector<std::int32_t> parent(n, -1);
  std::vector<std::uint8_t> closed(n, 0);
  auto h = [&](std::size_t i) {
    const double dx = std::abs(static_cast<int>(i % nx) - g->x), dy = std::abs(static_cast<int>(i / nx) - g->y);
    return std::max(dx, dy) + (std::sqrt(2.0) - 1.0) * std::min(dx, dy);
  };
  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  cost[start] = 0.0;
  open.push({h(start), start});
  bool found = false;
  while (!open.empty()) {
    const auto [f, i] = open.top();
    open.pop();
    if (closed[i]) continue;
    closed[i] = 1;
    if (i == goal) {
      found = true;
      break;
    }
    const int cx = static_cast<int>(i % nx), cy = static_cast<int>(i / nx);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (!dx && !dy) continue;
        const Cell2 c{cx + dx, cy + dy};
        if (!grid.in_bounds(c)) continue;
        const std::size_t j = grid.index(c);
        if (closed[j] || (cells[j] == explore::kOccupied && j != goal)) continue;
        // No corner cutting past occupied cells.
        if (dx && dy &&
            (cells[grid.index({cx + dx, cy})] == explore::kOccupied || cells[grid.index({cx, cy + dy})] == explore::kOccupied))
          continue;
        const double step = (dx && dy ? std::sqrt(2.0) : 1.0) * (near[j] ? kNearPenalty : 1.0);
        const double nc = cost[i] + step;
        if (nc < cost[j]) {
          cost[j] = nc;
          parent[j] = static_cast<std::int32_t>(i);
          open.push({nc + h(j), j});
        }
      }
  }
  if (!found) return {};
  std::vector<Vec2> path;
  for (std::size_t i = goal; i != start; i = static_cast<std::size_t>(parent[i]))
    path.push_back(grid.cell_center({static_cast<int>(i % nx), static_cast<int>(i / nx)}));
  path.push_back(from);
  std::reverse(path.begin(), path.end());
  if (path.size() == 1) path.push_back(to);
  path.back() = to;
  return path;
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::NoFrontier: return "no-frontier";
    case Termination::BelowThreshold: return "below-threshold";
    case Termination::BudgetExceeded: return "budget-exceeded";
    case Termination::Failure: return "failure";
  }
  return "failure";
}

std::vector<std::size_t> reachable_cells(const Scene& scene, const OccupancyGrid2D& layout, const Vec2& start,
                                         double altitude) {
  const int nx = layout.nx(), ny = layout.ny();
  std::vector<std::uint8_t> free(static_cast<std::size_t>(nx) * ny, 0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < ny; ++y)
    for (int x = 0; x < nx; ++x) {
      const Vec2 c = layout.cell_center({x, y});
      free[layout.index({x, y})] = !scene.contains(Vec3(c.x(), c.y(), altitude));
    }
  std::vector<std::size_t> out;
  const auto s = layout.cell_in_bounds(start);
  if (!s || !free[layout.index(*s)]) return out;
  std::vector<std::uint8_t> seen(free.size(), 0);
  std::deque<Cell2> queue{*s};
  seen[layout.index(*s)] = 1;
  while (!queue.empty()) {
    const Cell2 c = queue.front();
    queue.pop_front();
    out.push_back(layout.index(c));
    const Cell2 next[4] = {{c.x + 1, c.y}, {c.x - 1, c.y}, {c.x, c.y + 1}, {c.x, c.y - 1}};
    for (const auto& n : next) {
      if (!layout.in_bounds(n)) continue;
      const std::size_t i = layout.index(n);
      if (seen[i] || !free[i]) continue;
      seen[i] = 1;
      queue.push_back(n);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

double coverage_of(const OccupancyGrid2D& grid, std::span<const std::size_t> cells) {
  if (cells.empty()) return 1.0;
  std::size_t known = 0;
  for (auto i : cells) known += grid.cells()[i] != explore::kUnknown;
  return static_cast<double>(known) / static_cast<double>(cells.size());
}

double heading_change(const Vec2& start, std::span<const GoalRecord> goals) {
  std::vector<Vec2> legs;
  Vec2 from = start;
  for (const auto& g : goals) {
    if (g.is_return) continue;
    const Vec2 to = g.pos.head<2>();
    if ((to - from).norm() > 1e-9) legs.push_back(to - from);
    from = to;
  }
  if (legs.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 1; i < legs.size(); ++i) {
    const Vec2& a = legs[i - 1];
    const Vec2& b = legs[i];
    sum += std::abs(std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b)));
  }
  return sum / static_cast<double>(legs.size() - 1);
}

namespace {

enum class Phase { Explore, Return, Done };

/// Points of `route` up to arc length `horizon`, the last one interpolated.
std::vector<Vec2> clip_route(const std::vector<Vec2>& route, double horizon, bool& reaches_end) {
  std::vector<Vec2> out{route.front()};
  double acc = 0.0;
  reaches_end = true;
  for (std::size_t i = 1; i < route.size(); ++i) {
    const double seg = (route[i] - route[i - 1]).norm();
    if (acc + seg > horizon) {
      out.push_back(route[i - 1] + (route[i] - route[i - 1]) * ((horizon - acc) / seg));
      reaches_end = false;
      return out;
    }
    acc += seg;
    out.push_back(route[i]);
  }
  return out;
}

/// Points every `ds` of arc length along a polyline (first point excluded, last included).
std::vector<Vec2> resample(const std::vector<Vec2>& line, double ds) {
  double total = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i) total += (line[i] - line[i - 1]).norm();
  std::vector<Vec2> out;
  if (total < 1e-9) return out;
  const int n = std::max(1, static_cast<int>(std::ceil(total / ds - 1e-9)));
  const double step = total / n;
  std::size_t seg = 1;
  double seg_start = 0.0;
  for (int k = 1; k <= n; ++k) {
    const double s = k == n ? total : k * step;
    while (seg + 1 < line.size() && seg_start + (line[seg] - line[seg - 1]).norm() < s) {
      seg_start += (line[seg] - line[seg - 1]).norm();
      ++seg;
    }
    const double len = (line[seg] - line[seg - 1]).norm();
    const double u = len > 0.0 ? std::clamp((s - seg_start) / len, 0.0, 1.0) : 1.0;
    out.push_back(line[seg - 1] + u * (line[seg] - line[seg - 1]));
  }
  return out;
}

UniformBspline hover_spline(const Vec3& p, double dt) { return UniformBspline(std::vector<Vec3>(4, p), dt); }

class Episode {
 public:
  explicit Episode(const ScenarioConfig& cfg)
      : cfg_(cfg),
        scene_(build_scene(cfg.scene)),
        dt_(1.0 / cfg.rates.imu),
        track_div_(static_cast<int>(std::lround(cfg.rates.imu / cfg.rates.track))),
        watch_div_(static_cast<int>(std::lround(cfg.rates.imu / cfg.rates.collision_check))),
        lidar_div_(static_cast<int>(std::lround(cfg.rates.imu / cfg.rates.lidar))),
        start_(cfg.mission.start.x(), cfg.mission.start.y(), cfg.mission.altitude),
        imu_from_lidar_{Rot3(), cfg.mission.lidar_offset},
        tracker_(cfg.mission.follower_lag, cfg.planner.cost.v_max),
        feed_(cfg.pose_noise, Rng::derive(cfg.seed, 1).next()),
        imu_rng_(Rng::derive(cfg.seed, 2)) {
    state_.weights = cfg.explore.weights;
    result_.grid = OccupancyGrid2D(cfg.boundary_min, cfg.boundary_max, cfg.explore.resolution, cfg.explore.slice);
    result_.cloud = explore::GlobalCloudMap(cfg.explore.cloud_resolution);
    result_.local_map = grid::LocalGridMap(cfg.grid, start_);
    reachable_ = reachable_cells(scene_, result_.grid, cfg.mission.start, cfg.mission.altitude);
    knot_dt_ = cfg.planner.control_spacing / cfg.planner.cruise_speed;
    spline_ = hover_spline(start_, knot_dt_);
    cur_ = TrackState{start_, Vec3::Zero()};
    seg_from_ = start_;
  }

  EpisodeResult run() {
    const auto wall0 = std::chrono::steady_clock::now();
    auto& m = result_.metrics;
    const auto max_ticks = static_cast<std::int64_t>(std::ceil(cfg_.mission.max_time / dt_ - 1e-9));
    const double dt_track = track_div_ * dt_;

    odom::ImuSample still{0.0, Vec3::Zero(), Vec3(0.0, 0.0, cfg_.imu.gravity) + cfg_.imu.bias_accel};
    prop_.initialize(Pose{Rot3(), start_}, still, cfg_.imu.gravity);
    last_imu_ = still;

    bool done = false;
    for (std::int64_t k = 0; k <= max_ticks && !done; ++k) {
      t_ = static_cast<double>(k) * dt_;
      if (k % track_div_ == 0) {
        // Close the previous track segment and command the next one.
        seg_from_ = cur_.pos;
        const Vec3 prev_vel = seg_vel_;
        const TrackState next = tracker_.step(spline_, t_ + dt_track - spline_t0_, cur_, dt_track);
        seg_t0_ = t_;
        seg_vel_ = next.vel;
        seg_acc_ = k == 0 ? Vec3::Zero() : Vec3((seg_vel_ - prev_vel) / dt_track);
        next_ = next;
        result_.trajectory.push_back({t_, cur_.pos, seg_vel_});
        if (scene_.contains(cur_.pos)) ++m.collision_ticks;
      }
      const Vec3 truth = seg_from_ + (t_ - seg_t0_) * seg_vel_;
      truth_hist_.push_back({t_, Pose{Rot3(), truth}});
      if (truth_hist_.size() > static_cast<std::size_t>(3 * lidar_div_)) truth_hist_.pop_front();

      if (k > 0) {
        KinematicSample ks{Pose{Rot3(), truth}, seg_vel_, seg_acc_, Vec3::Zero()};
        last_imu_ = odom::to_sample(imu_measure(ks, t_, cfg_.imu, imu_rng_));
        prop_.propagate(last_imu_);
      }

      if (k > 0 && k % lidar_div_ == 0) done = on_lidar(k, truth);
      if (!done && k % watch_div_ == 0 && !hovering_) {
        const auto w = collision_watch(spline_, result_.local_map, t_ - spline_t0_);
        if (!w.clear) {
          ++m.watch_triggers;
          plan();
          if (consecutive_failures_ >= cfg_.mission.max_failures) {
            m.termination = Termination::Failure;
            done = true;
          }
        }
      }

      m.ticks.push_back({t_, truth, seg_vel_, goal_id_, result_.grid.known_fraction()});
      if (k % track_div_ == track_div_ - 1 || track_div_ == 1) {
        if ((k + 1) % track_div_ == 0) {
          m.path_length += (next_.pos - cur_.pos).norm();
          if (phase_ == Phase::Explore) m.explore_path_length += (next_.pos - cur_.pos).norm();
          cur_ = next_;
        }
      }
      if (k == max_ticks && !done) {
        m.termination = Termination::BudgetExceeded;
      }
    }

    m.sim_time = t_;
    m.known_fraction = result_.grid.known_fraction();
    m.reachable_coverage = coverage_of(result_.grid, reachable_);
    m.coverage_over_time.push_back({t_, m.reachable_coverage});
    m.heading_change = heading_change(cfg_.mission.start, m.goals);
    for (const auto& g : m.goals) m.explore_goals += !g.is_return;
    result_.snapshots.push_back(result_.grid);
    m.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
    return std::move(result_);
  }

 private:
  /// Sensing, mapping and decisions at sweep end. True when the episode ends.
  bool on_lidar(std::int64_t k, const Vec3& truth) {
    auto& m = result_.metrics;
    const double sweep_start = static_cast<double>(k - lidar_div_) * dt_;
    std::vector<odom::StampedPose> hist(truth_hist_.begin(), truth_hist_.end());
    const Pose extr = imu_from_lidar_;
    const SweepPoseFn pose_at = [&](double off) {
      return pose_compose(odom::interpolate_track(hist, sweep_start + off), extr);
    };
    const auto frame = lidar_scan(scene_, pose_at, cfg_.lidar, Rng::derive(cfg_.seed, 1000 + k).next(), sweep_start);
    const auto und = odom::undistort_frame(frame, prop_.history(), imu_from_lidar_);

    const Pose est = feed_.sample(Pose{Rot3(), truth}, t_);
    est_ = est.trans;
    explore::accumulate_global(result_.cloud, und, est, imu_from_lidar_);
    const Pose world_from_lidar = pose_compose(est, imu_from_lidar_);
    std::vector<Vec3> world;
    world.reserve(und.points.size());
    for (const auto& p : und.points) world.push_back(pose_apply(world_from_lidar, p.p));
    result_.grid.update(world, est_);

    PointCloudFrame kept;
    kept.timestamp = und.timestamp;
    kept.period = und.period;
    for (const auto& p : world)
      if (p.z() > cfg_.mission.ground_filter) kept.points.push_back({p, 0.0});
    ring_.push_back(std::move(kept));
    while (static_cast<int>(ring_.size()) > cfg_.grid.fusion_frames) ring_.pop_front();
    std::vector<PointCloudFrame> local(ring_.begin(), ring_.end());
    for (auto& f : local)
      for (auto& p : f.points) p.p -= est_;
    result_.local_map = grid::rebuild_from_frames(local, cfg_.grid, est_);

    prop_.reset(est, seg_vel_, last_imu_);
    ++lidar_count_;
    if (lidar_count_ % 10 == 0) m.coverage_over_time.push_back({t_, coverage_of(result_.grid, reachable_)});
    return decide();
  }

  bool decide() {
    auto& m = result_.metrics;
    const double tol = cfg_.mission.goal_tolerance;
    bool need_plan = false;
    if (phase_ == Phase::Explore) {
      bool need_goal = !goal_;
      if (goal_ && (est_ - *goal_).head<2>().norm() < tol) need_goal = true;
      if (goal_ && lidar_count_ % 10 == 0 &&
          explore::info_gain(result_.grid, goal_->head<2>(), state_.weights.info_radius) < state_.weights.stop_threshold)
        need_goal = true;
      if (need_goal) {
        if (!select()) {
          if (!cfg_.mission.return_to_start) {
            phase_ = Phase::Done;
            return true;
          }
          phase_ = Phase::Return;
          goal_ = start_;
          goal_final_ = true;
          push_goal_record(start_, 0.0, {}, 0, true);
        }
        need_plan = true;
      }
    }
    if (phase_ == Phase::Return && (est_ - start_).head<2>().norm() < tol) {
      m.returned_home = true;
      phase_ = Phase::Done;
      return true;
    }
    const double t_curve = t_ - spline_t0_;
    if (!need_plan && goal_) {
      if (hovering_) need_plan = true;
      else if (!segment_final_ && t_curve > spline_.duration() - cfg_.planner.replan_lead) need_plan = true;
      else if (segment_final_ && t_curve > spline_.duration() + 1.0) need_plan = true;
    }
    if (need_plan && goal_) plan();
    if (consecutive_failures_ >= cfg_.mission.max_failures) {
      m.termination = Termination::Failure;
      return true;
    }
    return false;
  }

  /// Picks the next frontier goal; false when a stop criterion fires.
  bool select() {
    auto& m = result_.metrics;
    explore::RrtParams rp = cfg_.explore.rrt;
    rp.seed = Rng::derive(cfg_.seed, 5000 + m.selections.size()).next();
    rp.altitude = cfg_.mission.altitude;
    auto cands = explore::rrt_detect_frontiers(result_.grid, est_, rp);
    std::erase_if(cands, [&](const explore::FrontierCandidate& c) {
      return std::any_of(blacklist_.begin(), blacklist_.end(),
                         [&](const Vec3& b) { return (b - c.position).head<2>().norm() < 1.0; });
    });
    explore::compute_info_gain(result_.grid, cands, state_.weights.info_radius);
    explore::score_candidates(cands, est_, state_);
    const auto reason = explore::stop_reason(cands, state_.weights.stop_threshold);
    if (reason != explore::StopReason::None) {
      m.termination = reason == explore::StopReason::NoFrontier ? Termination::NoFrontier : Termination::BelowThreshold;
      return false;
    }
    SelectionRecord rec{cands, state_, cfg_.explore.mode, 0};
    rec.chosen = *explore::best_candidate(cands, state_, cfg_.explore.mode);
    const auto before = state_;
    const auto chosen = explore::select_goal(cands, state_, cfg_.explore.mode);
    push_goal_record(chosen.position, explore::revenue(chosen, before, cfg_.explore.mode), chosen,
                     static_cast<int>(cands.size()), false);
    m.selections.push_back(std::move(rec));
    goal_ = chosen.position;
    goal_final_ = false;
    goal_failures_ = 0;
    if (cfg_.mission.write_snapshots) result_.snapshots.push_back(result_.grid);
    return true;
  }

  void push_goal_record(const Vec3& p, double r, const explore::FrontierCandidate& c, int n, bool is_return) {
    auto& goals = result_.metrics.goals;
    goal_id_ = static_cast<int>(goals.size());
    goals.push_back({goal_id_, t_, p, r, c.f_info, c.f_dist, c.angle, n, is_return});
  }

  void fail_plan() {
    auto& m = result_.metrics;
    ++m.planning_failures;
    ++consecutive_failures_;
    ++goal_failures_;
    spline_ = hover_spline(cur_.pos, knot_dt_);
    spline_t0_ = t_;
    hovering_ = true;
    if (phase_ == Phase::Explore && goal_failures_ >= 2 && goal_) {
      blacklist_.push_back(*goal_);
      goal_.reset();
    }
  }

  void plan() {
    auto& m = result_.metrics;
    if (!goal_) return;
    ++m.replans;
    const auto& pc = cfg_.planner;
    const Vec2 from = est_.head<2>();
    auto route = route_2d(result_.grid, from, goal_->head<2>(), pc.route_clearance);
    if (route.empty()) return fail_plan();
    bool reaches = false;
    const auto clipped = clip_route(route, pc.horizon, reaches);

    const double z = cfg_.mission.altitude;
    const Vec3 q0 = cur_.pos;
    const Vec3 v0 = seg_vel_;
    std::vector<Vec3> q{q0, q0 + v0 * knot_dt_};
    const double skip = (v0 * knot_dt_).norm();
    double arc = 0.0;
    Vec2 prev = clipped.front();
    for (const auto& p : resample(clipped, pc.control_spacing)) {
      arc += (p - prev).norm();
      prev = p;
      if (arc <= skip + 0.5 * pc.control_spacing && &p != &clipped.back()) continue;
      q.push_back(Vec3(p.x(), p.y(), z));
    }
    const Vec3 end(clipped.back().x(), clipped.back().y(), z);
    if ((q.back() - end).norm() > 1e-9) q.push_back(end);
    if (reaches) {
      q.push_back(end);
      q.push_back(end);
    }
    while (q.size() < 4) q.push_back(end);

    std::vector<Vec3> guide;
    guide.push_back(q0);
    for (const auto& p : clipped) guide.push_back(Vec3(p.x(), p.y(), z));

    traj::OptimizeOptions opt;
    opt.max_iters = pc.max_iters;
    opt.tol = pc.tol;
    opt.use_lbfgs = pc.use_lbfgs;
    opt.multi_anchor = pc.multi_anchor;
    opt.max_rounds = pc.max_rounds;
    opt.freeze_start_velocity = true;
    opt.planar = true;
    opt.guide_path = guide;
    traj::OptimizeResult res;
    try {
      res = traj::optimize(UniformBspline(q, knot_dt_), result_.local_map, pc.cost, opt);
    } catch (const traj::PlanningError&) {
      return fail_plan();
    }
    if (!collision_watch(res.spline, result_.local_map, 0.0).clear) return fail_plan();
    spline_ = res.spline;
    spline_t0_ = t_;
    segment_final_ = reaches;
    hovering_ = false;
    consecutive_failures_ = 0;
  }

  const ScenarioConfig& cfg_;
  Scene scene_;
  double dt_;
  int track_div_, watch_div_, lidar_div_;
  Vec3 start_;
  Pose imu_from_lidar_;
  Tracker tracker_;
  PoseFeed feed_;
  Rng imu_rng_;
  odom::HfPropagator prop_;
  odom::ImuSample last_imu_{};

  EpisodeResult result_;
  std::vector<std::size_t> reachable_;
  explore::ExploreState state_;
  std::deque<odom::StampedPose> truth_hist_;
  std::deque<PointCloudFrame> ring_;

  double t_ = 0.0;
  double knot_dt_ = 0.5;
  UniformBspline spline_;
  double spline_t0_ = 0.0;
  bool segment_final_ = false;
  bool hovering_ = true;
  TrackState cur_, next_;
  Vec3 seg_from_ = Vec3::Zero(), seg_vel_ = Vec3::Zero(), seg_acc_ = Vec3::Zero();
  double seg_t0_ = 0.0;
  Vec3 est_ = Vec3::Zero();

  Phase phase_ = Phase::Explore;
  std::optional<Vec3> goal_;
  bool goal_final_ = false;
  int goal_id_ = -1;
  int goal_failures_ = 0;
  int consecutive_failures_ = 0;
  int lidar_count_ = 0;
  std::vector<Vec3> blacklist_;
};

using json = nlohmann::ordered_json;

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + p.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + p.string());
}

json summary_json(const EpisodeResult& r, const ScenarioConfig& cfg) {
  const auto& m = r.metrics;
  const auto s = summarize(r, cfg);
  json cov = json::array();
  for (const auto& [t, c] : m.coverage_over_time) cov.push_back({t, c});
  return json{{"seed", s.seed},
              {"mode", s.mode},
              {"termination", s.termination},
              {"returned_home", m.returned_home},
              {"goals", s.goals},
              {"sim_time", s.sim_time},
              {"ticks", m.ticks.size()},
              {"path_length", s.path_length},
              {"explore_path_length", m.explore_path_length},
              {"heading_change", s.heading_change},
              {"known_fraction", s.known_fraction},
              {"reachable_coverage", s.reachable_coverage},
              {"planning_failures", m.planning_failures},
              {"replans", m.replans},
              {"watch_triggers", m.watch_triggers},
              {"collision_ticks", m.collision_ticks},
              {"map_points", r.cloud.size()},
              {"coverage_over_time", cov},
              {"wall_clock_s", m.wall_clock}};
}

}  // namespace

EpisodeResult run_episode(const ScenarioConfig& config) {
  config.validate();
  Episode e(config);
  return e.run();
}

EpisodeSummary summarize(const EpisodeResult& r, const ScenarioConfig& cfg) {
  const auto& m = r.metrics;
  return EpisodeSummary{cfg.seed,           explore::to_string(cfg.explore.mode),
                        to_string(m.termination), m.explore_goals,
                        m.path_length,       m.heading_change,
                        m.known_fraction,    m.reachable_coverage,
                        m.sim_time};
}

void export_artifacts(const EpisodeResult& r, const ScenarioConfig& cfg, const std::string& out_dir) {
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + out_dir + ": " + ec.message());

  char buf[256];
  {
    std::string s = "t,x,y,z,vx,vy,vz,goal_id,known_fraction\n";
    s.reserve(r.metrics.ticks.size() * 80);
    for (const auto& k : r.metrics.ticks) {
      std::snprintf(buf, sizeof buf, "%.3f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%d,%.6f\n", k.t, k.pos.x(), k.pos.y(),
                    k.pos.z(), k.vel.x(), k.vel.y(), k.vel.z(), k.goal_id, k.known_fraction);
      s += buf;
    }
    write_text(dir / "metrics.csv", s);
  }
  {
    std::string s = "id,t,x,y,z,revenue,f_info,f_dist,angle,candidates,kind\n";
    for (const auto& g : r.metrics.goals) {
      std::snprintf(buf, sizeof buf, "%d,%.3f,%.4f,%.4f,%.4f,%.6f,%lld,%.6f,%.6f,%d,%s\n", g.id, g.t, g.pos.x(),
                    g.pos.y(), g.pos.z(), g.revenue, static_cast<long long>(g.f_info), g.f_dist, g.angle,
                    g.candidates, g.is_return ? "return" : "explore");
      s += buf;
    }
    write_text(dir / "goals.csv", s);
  }
  {
    // Resampled to the track rate (identical when track runs at 100 Hz).
    std::string s = "t,x,y,z,vx,vy,vz\n";
    for (const auto& p : r.trajectory) {
      std::snprintf(buf, sizeof buf, "%.3f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f\n", p.t, p.pos.x(), p.pos.y(), p.pos.z(),
                    p.vel.x(), p.vel.y(), p.vel.z());
      s += buf;
    }
    write_text(dir / "trajectory.csv", s);
  }
  r.cloud.write_ply((dir / "map.ply").string());
  for (std::size_t i = 0; i < r.snapshots.size(); ++i) {
    std::snprintf(buf, sizeof buf, "occupancy_%04zu.pgm", i);
    r.snapshots[i].write_pgm((dir / buf).string());
  }
  if (r.local_map.size() > 0) {
    const auto& gc = r.local_map.config();
    grid::write_slice_pgm(r.local_map, gc.num_h() / 2, (dir / "local_slice.pgm").string());
  }
  write_text(dir / "config-echo.json", dump_config(cfg));
  write_text(dir / "summary.json", summary_json(r, cfg).dump(2) + "\n");
}

EpisodeSummary read_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  const json j = json::parse(in);
  EpisodeSummary s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.mode = j.at("mode").get<std::string>();
  s.termination = j.at("termination").get<std::string>();
  s.goals = j.at("goals").get<int>();
  s.path_length = j.at("path_length").get<double>();
  s.heading_change = j.at("heading_change").get<double>();
  s.known_fraction = j.at("known_fraction").get<double>();
  s.reachable_coverage = j.at("reachable_coverage").get<double>();
  s.sim_time = j.at("sim_time").get<double>();
  return s;
}

std::string compare_runs(const std::string& out_dir) {
  std::map<std::uint64_t, std::map<std::string, EpisodeSummary>> runs;
  for (const char* mode : {"baseline", "direction"}) {
    const fs::path d = fs::path(out_dir) / mode;
    if (!fs::is_directory(d)) continue;
    for (const auto& e : fs::directory_iterator(d)) {
      const fs::path f = e.path() / "summary.json";
      if (!fs::exists(f)) continue;
      const auto s = read_summary(f.string());
      runs[s.seed][s.mode] = s;
    }
  }
  std::ostringstream out;
  out << "seed,baseline_heading_change,direction_heading_change,baseline_coverage,direction_coverage,"
         "baseline_path_length,direction_path_length,baseline_goals,direction_goals\n";
  double sums[6] = {0, 0, 0, 0, 0, 0};
  int n = 0;
  char buf[512];
  for (const auto& [seed, modes] : runs) {
    if (!modes.count("baseline") || !modes.count("direction")) continue;
    const auto& b = modes.at("baseline");
    const auto& d = modes.at("direction");
    std::snprintf(buf, sizeof buf, "%llu,%.6f,%.6f,%.6f,%.6f,%.3f,%.3f,%d,%d\n", static_cast<unsigned long long>(seed),
                  b.heading_change, d.heading_change, b.reachable_coverage, d.reachable_coverage, b.path_length,
                  d.path_length, b.goals, d.goals);
    out << buf;
    const double v[6] = {b.heading_change, d.heading_change, b.reachable_coverage, d.reachable_coverage,
                         b.path_length, d.path_length};
    for (int i = 0; i < 6; ++i) sums[i] += v[i];
    ++n;
  }
  if (n == 0) throw std::runtime_error("no paired baseline/direction runs under " + out_dir);
  std::snprintf(buf, sizeof buf, "mean,%.6f,%.6f,%.6f,%.6f,%.3f,%.3f,,\n", sums[0] / n, sums[1] / n, sums[2] / n,
                sums[3] / n, sums[4] / n, sums[5] / n);
  out << buf;
  write_text(fs::path(out_dir) / "compare.csv", out.str());
  return out.str();
}

}  // namespace explo::mission
