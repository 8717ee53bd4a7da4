#include "explo/frontier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_set>

#include "explo/rng.hpp"

namespace explo::explore {

namespace {

/// Outcome of walking the cells crossed by a segment.
struct Walk {
  enum Kind { Clear, Blocked, Frontier } kind = Clear;
  Cell2 last_idle;
};

/// 4-connected cell walk from a to b (the start cell is not tested).
Walk walk_segment(const OccupancyGrid2D& grid, const Vec2& a, const Vec2& b) {
  const double r = grid.resolution();
  const Vec2 ua = (a - grid.min()) / r, ub = (b - grid.min()) / r;
  Cell2 c{static_cast<int>(std::floor(ua.x())), static_cast<int>(std::floor(ua.y()))};
  const Cell2 end{static_cast<int>(std::floor(ub.x())), static_cast<int>(std::floor(ub.y()))};
  const Vec2 d = ub - ua;
  int step[2];
  double t_next[2], t_delta[2];
  const int cell[2] = {c.x, c.y};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(d[k]) < 1e-12) {
      step[k] = 0;
      t_next[k] = std::numeric_limits<double>::infinity();
      t_delta[k] = t_next[k];
      continue;
    }
    step[k] = d[k] > 0 ? 1 : -1;
    const double boundary = d[k] > 0 ? cell[k] + 1.0 : static_cast<double>(cell[k]);
    t_next[k] = (boundary - ua[k]) / d[k];
    t_delta[k] = 1.0 / std::abs(d[k]);
  }
  Walk w{Walk::Clear, c};
  const int max_steps = std::abs(end.x - c.x) + std::abs(end.y - c.y);
  for (int i = 0; i < max_steps; ++i) {
    if (t_next[0] <= t_next[1]) {
      c.x += step[0];
      t_next[0] += t_delta[0];
    } else {
      c.y += step[1];
      t_next[1] += t_delta[1];
    }
    if (!grid.in_bounds(c)) return {Walk::Blocked, w.last_idle};
    const auto v = grid.at(c);
    if (v == kOccupied) return {Walk::Blocked, w.last_idle};
    if (v == kUnknown) return {Walk::Frontier, w.last_idle};
    w.last_idle = c;
  }
  return w;
}

bool near_occupied(const OccupancyGrid2D& grid, Cell2 c, double radius) {
  const int k = static_cast<int>(std::ceil(radius / grid.resolution()));
  const double r2 = (radius / grid.resolution()) * (radius / grid.resolution());
  for (int dy = -k; dy <= k; ++dy)
    for (int dx = -k; dx <= k; ++dx) {
      if (dx * dx + dy * dy > r2) continue;
      const Cell2 n{c.x + dx, c.y + dy};
      if (grid.in_bounds(n) && grid.at(n) == kOccupied) return true;
    }
  return false;
}

/// Known fraction of the in-bounds cells of a square window.
double window_known(const OccupancyGrid2D& grid, Cell2 c, double half) {
  const int k = static_cast<int>(std::round(half / grid.resolution()));
  std::int64_t known = 0, total = 0;
  for (int dy = -k; dy <= k; ++dy)
    for (int dx = -k; dx <= k; ++dx) {
      const Cell2 n{c.x + dx, c.y + dy};
      if (!grid.in_bounds(n)) continue;
      ++total;
      known += grid.at(n) != kUnknown;
    }
  return total ? static_cast<double>(known) / total : 1.0;
}

}  // namespace

std::vector<FrontierCandidate> rrt_detect_frontiers(const OccupancyGrid2D& grid, const Vec3& robot,
                                                    const RrtParams& params) {
  if (!(params.step > 0.0) || params.iterations < 0) throw std::invalid_argument("bad RRT parameters");
  std::vector<FrontierCandidate> out;
  const Vec2 root = robot.head<2>();
  if (!grid.cell_in_bounds(root)) return out;
  Rng rng(params.seed);
  std::vector<Vec2> nodes{root};
  std::unordered_set<std::size_t> seen;
  const Vec2 lo = grid.min(), hi = grid.max();
  for (int it = 0; it < params.iterations; ++it) {
    const Vec2 sample(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()));
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double d = (nodes[i] - sample).squaredNorm();
      if (d < best) best = d, nearest = i;
    }
    const Vec2 from = nodes[nearest];
    const Vec2 delta = sample - from;
    const double len = delta.norm();
    if (len < 1e-9) continue;
    const Vec2 to = len > params.step ? Vec2(from + delta * (params.step / len)) : sample;
    const Walk w = walk_segment(grid, from, to);
    if (w.kind == Walk::Clear) {
      nodes.push_back(to);
      continue;
    }
    if (w.kind != Walk::Frontier) continue;
    const Cell2 c = w.last_idle;
    if (grid.at(c) != kIdle) continue;
    if (!seen.insert(grid.index(c)).second) continue;
    if (near_occupied(grid, c, params.clearance)) continue;
    if (window_known(grid, c, params.window) >= params.known_limit) continue;
    const Vec2 p = grid.cell_center(c);
    out.push_back(FrontierCandidate{Vec3(p.x(), p.y(), params.altitude)});
  }
  return out;
}

std::int64_t info_gain(const OccupancyGrid2D& grid, const Vec2& p, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("info gain radius must be positive");
  const double r = grid.resolution();
  const Cell2 c = grid.cell_of(p);
  const int k = static_cast<int>(std::ceil(radius / r)) + 1;
  const double r2 = radius * radius;
  std::int64_t n = 0;
  for (int y = std::max(0, c.y - k); y <= std::min(grid.ny() - 1, c.y + k); ++y)
    for (int x = std::max(0, c.x - k); x <= std::min(grid.nx() - 1, c.x + k); ++x) {
      if (grid.at({x, y}) != kUnknown) continue;
      if ((grid.cell_center({x, y}) - p).squaredNorm() <= r2) ++n;
    }
  return n;
}

void compute_info_gain(const OccupancyGrid2D& grid, std::span<FrontierCandidate> candidates, double radius) {
  const auto n = static_cast<std::int64_t>(candidates.size());
#pragma omp parallel for schedule(dynamic, 4)
  for (std::int64_t i = 0; i < n; ++i) candidates[i].f_info = info_gain(grid, candidates[i].position.head<2>(), radius);
}

void compute_info_gain_serial(const OccupancyGrid2D& grid, std::span<FrontierCandidate> candidates,
                              double radius) {
  const double r2 = radius * radius;
  for (auto& cand : candidates) {
    std::int64_t n = 0;
    for (int y = 0; y < grid.ny(); ++y)
      for (int x = 0; x < grid.nx(); ++x)
        if (grid.at({x, y}) == kUnknown && (grid.cell_center({x, y}) - cand.position.head<2>()).squaredNorm() <= r2)
          ++n;
    cand.f_info = n;
  }
}

RevenueMode parse_mode(const std::string& s) {
  if (s == "baseline") return RevenueMode::Baseline;
  if (s == "direction") return RevenueMode::Direction;
  throw std::invalid_argument("unknown mode '" + s + "' (expected baseline or direction)");
}

std::string to_string(RevenueMode m) { return m == RevenueMode::Baseline ? "baseline" : "direction"; }

double direction_angle(const ExploreState& state, const Vec3& p) {
  if (!state.prev || !state.prev_prev) return 0.0;
  const Vec2 a = (*state.prev - *state.prev_prev).head<2>();
  const Vec2 b = (p - *state.prev).head<2>();
  if (a.norm() < 1e-9 || b.norm() < 1e-9) return 0.0;
  const double cross = a.x() * b.y() - a.y() * b.x();
  return std::abs(std::atan2(cross, a.dot(b)));
}

double revenue(const FrontierCandidate& c, const ExploreState& state, RevenueMode mode) {
  const auto& w = state.weights;
  const double base = w.lambda_info * static_cast<double>(c.f_info) - w.lambda_dist * c.f_dist;
  if (mode == RevenueMode::Baseline) return base;
  return base - std::exp(w.lambda_dir * c.angle);
}

void score_candidates(std::span<FrontierCandidate> candidates, const Vec3& robot, const ExploreState& state) {
  for (auto& c : candidates) {
    c.f_dist = (c.position - robot).norm();
    c.angle = direction_angle(state, c.position);
  }
}

std::optional<std::size_t> best_candidate(std::span<const FrontierCandidate> candidates,
                                          const ExploreState& state, RevenueMode mode) {
  std::optional<std::size_t> best;
  double best_r = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const auto& c = candidates[i];
    const double r = revenue(c, state, mode);
    if (!best) {
      best = i, best_r = r;
      continue;
    }
    const auto& b = candidates[*best];
    bool better = r > best_r;
    if (r == best_r) {
      if (c.f_dist != b.f_dist) {
        better = c.f_dist < b.f_dist;
      } else {
        better = std::lexicographical_compare(c.position.data(), c.position.data() + 3, b.position.data(),
                                              b.position.data() + 3);
      }
    }
    if (better) best = i, best_r = r;
  }
  return best;
}

FrontierCandidate select_goal(std::span<const FrontierCandidate> candidates, ExploreState& state,
                              RevenueMode mode) {
  const auto i = best_candidate(candidates, state, mode);
  if (!i) throw std::invalid_argument("no frontier candidates");
  state.push_goal(candidates[*i].position);
  return candidates[*i];
}

StopReason stop_reason(std::span<const FrontierCandidate> candidates, std::int64_t threshold) {
  if (candidates.empty()) return StopReason::NoFrontier;
  std::int64_t best = 0;
  for (const auto& c : candidates) best = std::max(best, c.f_info);
  return best < threshold ? StopReason::BelowThreshold : StopReason::None;
}

}  // namespace explo::explore
