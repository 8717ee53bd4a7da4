#include "explo/trajopt.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <unordered_map>
#include <unordered_set>

namespace explo::traj {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using grid::CellState;
using grid::LocalGridMap;

bool blocked(const LocalGridMap& map, const Vec3& p) { return map.query_world(p) == CellState::Occupied; }

/// Continuous index-space coordinate of a world point (cell k spans [k, k+1)).
Vec3 index_coords(const LocalGridMap& map, const Vec3& p_world) {
  const auto& c = map.config();
  const Vec3 local = (p_world - map.center()) / c.size;
  return local + Vec3(c.num_w() / 2, c.num_l() / 2, c.num_h() / 2);
}

/// Distance along unit `dir` from `origin` (in an occupied cell) at which the
/// ray enters the first non-occupied cell.
std::optional<double> first_free_crossing(const LocalGridMap& map, const Vec3& origin, const Vec3& dir,
                                          double max_t) {
  const auto& cfg = map.config();
  const double s = cfg.size;
  const int dims[3] = {cfg.num_w(), cfg.num_l(), cfg.num_h()};
  const Vec3 u = index_coords(map, origin);
  int cell[3], step[3];
  double t_next[3], t_delta[3];
  for (int k = 0; k < 3; ++k) {
    cell[k] = static_cast<int>(std::floor(u[k]));
    if (std::abs(dir[k]) < 1e-12) {
      step[k] = 0;
      t_next[k] = kInf;
      t_delta[k] = kInf;
      continue;
    }
    step[k] = dir[k] > 0 ? 1 : -1;
    const double boundary = dir[k] > 0 ? cell[k] + 1.0 : static_cast<double>(cell[k]);
    t_next[k] = (boundary - u[k]) * s / dir[k];
    t_delta[k] = s / std::abs(dir[k]);
  }
  while (true) {
    int axis = 0;
    if (t_next[1] < t_next[axis]) axis = 1;
    if (t_next[2] < t_next[axis]) axis = 2;
    const double t = t_next[axis];
    if (t > max_t) return std::nullopt;
    cell[axis] += step[axis];
    t_next[axis] += t_delta[axis];
    bool inside = true;
    for (int k = 0; k < 3; ++k) inside &= cell[k] >= 0 && cell[k] < dims[k];
    if (!inside) return t;
    const std::int64_t id = grid::indices_to_id({cell[0], cell[1], cell[2]}, cfg);
    if (!map.occupied(id)) return t;
  }
}

/// Nearest non-occupied cell centre by breadth-first search through occupied cells.
std::optional<Vec3> nearest_free_cell(const LocalGridMap& map, const Vec3& q, double radius, bool planar) {
  const auto& cfg = map.config();
  const auto start = map.world_to_indices(q);
  if (!start) return std::nullopt;
  const int dims[3] = {cfg.num_w(), cfg.num_l(), cfg.num_h()};
  const int reach = static_cast<int>(std::ceil(radius / cfg.size));
  std::unordered_set<std::int64_t> seen;
  std::vector<grid::CellIndex> frontier{*start}, next;
  seen.insert(grid::indices_to_id(*start, cfg));
  for (int depth = 1; depth <= reach && !frontier.empty(); ++depth) {
    next.clear();
    std::optional<Vec3> best;
    double best_d = kInf;
    for (const auto& c : frontier) {
      for (int dh = planar ? 0 : -1; dh <= (planar ? 0 : 1); ++dh)
        for (int dw = -1; dw <= 1; ++dw)
          for (int dl = -1; dl <= 1; ++dl) {
            if (!dh && !dw && !dl) continue;
            const grid::CellIndex n{c.w + dw, c.l + dl, c.h + dh};
            const bool inside = n.w >= 0 && n.w < dims[0] && n.l >= 0 && n.l < dims[1] && n.h >= 0 && n.h < dims[2];
            if (!inside) {
              // Off-map counts as free for the planner.
              const Vec3 centre = map.cell_center_world(n);
              const double d = (centre - q).norm();
              if (d < best_d) best_d = d, best = centre;
              continue;
            }
            const std::int64_t id = grid::indices_to_id(n, cfg);
            if (!seen.insert(id).second) continue;
            if (!map.occupied(id)) {
              const Vec3 centre = map.cell_center_world(n);
              const double d = (centre - q).norm();
              if (d < best_d) best_d = d, best = centre;
            } else {
              next.push_back(n);
            }
          }
    }
    if (best) return best;
    frontier.swap(next);
  }
  return std::nullopt;
}

/// Point on `path` crossing the plane through q normal to `tangent`, nearest to q.
Vec3 guide_point(const std::vector<Vec3>& path, const Vec3& q, const Vec3& tangent) {
  Vec3 best = path.front();
  double best_d = kInf;
  if (tangent.norm() > 1e-12) {
    const Vec3 n = tangent.normalized();
    for (std::size_t k = 0; k + 1 < path.size(); ++k) {
      const double a = (path[k] - q).dot(n), b = (path[k + 1] - q).dot(n);
      if ((a > 0 && b > 0) || (a < 0 && b < 0)) continue;
      const double s = std::abs(a - b) < 1e-15 ? 0.0 : a / (a - b);
      const Vec3 x = path[k] + s * (path[k + 1] - path[k]);
      const double d = (x - q).norm();
      if (d < best_d) best_d = d, best = x;
    }
  }
  if (best_d < kInf) return best;
  for (const auto& p : path) {
    const double d = (p - q).norm();
    if (d < best_d) best_d = d, best = p;
  }
  return best;
}

void add_difference(std::vector<Vec3>& grad, int i, const Vec3& g, std::span<const double> coef, double scale) {
  for (std::size_t k = 0; k < coef.size(); ++k) grad[i + k] += coef[k] * scale * g;
}

constexpr double kAccCoef[3] = {1.0, -2.0, 1.0};
constexpr double kJerkCoef[4] = {-1.0, 3.0, -3.0, 1.0};

}  // namespace

void CostWeights::validate() const {
  for (double w : {lambda_smooth, lambda_collision, lambda_feasibility, w_vel, w_acc, w_jerk})
    if (!(w >= 0.0)) throw std::invalid_argument("cost weights must be >= 0");
  if (!(safe_distance > 0.0)) throw std::invalid_argument("safe distance must be positive");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("epsilon must be in (0, 1)");
  if (!(limit_ratio > 0.0 && limit_ratio < 1.0 - epsilon)) throw std::invalid_argument("limit ratio must be in (0, 1 - eps)");
  if (!(junction_ratio > 1.0)) throw std::invalid_argument("junction must lie beyond the dead zone");
  for (double m : {v_max, a_max, j_max})
    if (!(m > 0.0)) throw std::invalid_argument("derivative limits must be positive");
}

FeasibilityPenalty::FeasibilityPenalty(double limit, double ratio, double junction)
    : threshold_(ratio * limit), junction_(junction) {
  if (!(threshold_ > 0.0) || !(junction_ > threshold_))
    throw std::invalid_argument("feasibility penalty needs c_j > lambda * c_m > 0");
  const double e = junction_ - threshold_;
  a_ = 3.0 * e;                              // q'' = g'' = 6 e
  b_ = 3.0 * e * e - 2.0 * a_ * junction_;   // q' = g' = 3 e^2
  c_ = e * e * e - a_ * junction_ * junction_ - b_ * junction_;  // q = g = e^3
}

double FeasibilityPenalty::value(double c) const {
  if (c <= -junction_) return a_ * c * c - b_ * c + c_;
  if (c < -threshold_) {
    const double e = -threshold_ - c;
    return e * e * e;
  }
  if (c <= threshold_) return 0.0;
  if (c < junction_) {
    const double e = c - threshold_;
    return e * e * e;
  }
  return a_ * c * c + b_ * c + c_;
}

double FeasibilityPenalty::derivative(double c) const {
  if (c <= -junction_) return 2.0 * a_ * c - b_;
  if (c < -threshold_) {
    const double e = -threshold_ - c;
    return -3.0 * e * e;
  }
  if (c <= threshold_) return 0.0;
  if (c < junction_) {
    const double e = c - threshold_;
    return 3.0 * e * e;
  }
  return 2.0 * a_ * c + b_;
}

double collision_penalty(double c, double sf) {
  if (c <= 0.0) return 0.0;
  if (c <= sf) return c * c * c;
  return 3.0 * sf * c * c - 3.0 * sf * sf * c + sf * sf * sf;
}

double collision_penalty_derivative(double c, double sf) {
  if (c <= 0.0) return 0.0;
  if (c <= sf) return 3.0 * c * c;
  return 6.0 * sf * c - 3.0 * sf * sf;
}

std::optional<AnchorPair> find_anchor(const Vec3& q, const LocalGridMap& map, const Vec3& guide, int index,
                                      double search_radius, bool planar) {
  if (!blocked(map, q)) return std::nullopt;
  Vec3 to_guide = guide - q;
  if (planar) to_guide.z() = 0.0;
  if (to_guide.norm() > 1e-9) {
    const Vec3 v = to_guide.normalized();
    const double reach = std::max(search_radius, to_guide.norm());
    if (const auto t = first_free_crossing(map, q, v, reach)) {
      return AnchorPair{index, q + *t * v, v};
    }
  }
  auto free_cell = nearest_free_cell(map, q, search_radius, planar);
  if (free_cell && planar) free_cell->z() = q.z();
  if (!free_cell || (*free_cell - q).norm() < 1e-12)
    throw PlanningError("no free cell within " + std::to_string(search_radius) + " m of control point " +
                        std::to_string(index));
  const Vec3 v = (*free_cell - q).normalized();
  const double t = first_free_crossing(map, q, v, (*free_cell - q).norm() + map.config().size)
                       .value_or((*free_cell - q).norm());
  return AnchorPair{index, q + t * v, v};
}

CostTerm smoothness_cost(const UniformBspline& spline) {
  const auto d = spline_derivatives(spline);
  const double dt = spline.knot_interval();
  CostTerm out;
  out.gradient.assign(spline.size(), Vec3::Zero());
  for (std::size_t i = 0; i < d.acc.size(); ++i) {
    out.value += d.acc[i].squaredNorm();
    add_difference(out.gradient, static_cast<int>(i), 2.0 * d.acc[i], kAccCoef, 1.0 / (dt * dt));
  }
  for (std::size_t i = 0; i < d.jerk.size(); ++i) {
    out.value += d.jerk[i].squaredNorm();
    add_difference(out.gradient, static_cast<int>(i), 2.0 * d.jerk[i], kJerkCoef, 1.0 / (dt * dt * dt));
  }
  return out;
}

CostTerm collision_cost(const UniformBspline& spline, std::span<const AnchorPair> anchors,
                        const CostWeights& weights) {
  const auto& q = spline.control_points();
  CostTerm out;
  out.gradient.assign(q.size(), Vec3::Zero());
  for (const auto& a : anchors) {
    const double c = weights.safe_distance - a.distance(q.at(a.index));
    out.value += collision_penalty(c, weights.safe_distance);
    out.gradient[a.index] -= collision_penalty_derivative(c, weights.safe_distance) * a.direction;
  }
  return out;
}

CostTerm feasibility_cost(const UniformBspline& spline, const CostWeights& weights) {
  const auto d = spline_derivatives(spline);
  const double dt = spline.knot_interval();
  const double r = weights.limit_ratio, jr = weights.junction_ratio;
  const FeasibilityPenalty fv(weights.v_max, r, jr * r * weights.v_max);
  const FeasibilityPenalty fa(weights.a_max, r, jr * r * weights.a_max);
  const FeasibilityPenalty fj(weights.j_max, r, jr * r * weights.j_max);
  CostTerm out;
  out.gradient.assign(spline.size(), Vec3::Zero());
  auto accumulate = [&](const std::vector<Vec3>& ders, const FeasibilityPenalty& f, double w,
                        std::span<const double> coef, double scale) {
    for (std::size_t i = 0; i < ders.size(); ++i) {
      Vec3 g;
      for (int k = 0; k < 3; ++k) {
        out.value += w * f.value(ders[i][k]);
        g[k] = w * f.derivative(ders[i][k]);
      }
      add_difference(out.gradient, static_cast<int>(i), g, coef, scale);
    }
  };
  constexpr double kVelCoef[2] = {-1.0, 1.0};
  accumulate(d.vel, fv, weights.w_vel, kVelCoef, 1.0 / dt);
  accumulate(d.acc, fa, weights.w_acc, kAccCoef, 1.0 / (dt * dt));
  accumulate(d.jerk, fj, weights.w_jerk, kJerkCoef, 1.0 / (dt * dt * dt));
  return out;
}

CostTerm total_cost(const UniformBspline& spline, std::span<const AnchorPair> anchors,
                    const CostWeights& weights) {
  CostTerm out;
  out.gradient.assign(spline.size(), Vec3::Zero());
  auto add = [&](const CostTerm& t, double w) {
    if (w == 0.0) return;
    out.value += w * t.value;
    for (std::size_t i = 0; i < t.gradient.size(); ++i) out.gradient[i] += w * t.gradient[i];
  };
  add(smoothness_cost(spline), weights.lambda_smooth);
  add(collision_cost(spline, anchors, weights), weights.lambda_collision);
  add(feasibility_cost(spline, weights), weights.lambda_feasibility);
  return out;
}

std::vector<Vec3> astar_path(const LocalGridMap& map, const Vec3& from, const Vec3& to, int max_expansions) {
  const auto& cfg = map.config();
  const auto s = map.world_to_indices(from);
  const auto g = map.world_to_indices(to);
  if (!s || !g) return {};
  const std::int64_t start = grid::indices_to_id(*s, cfg), goal = grid::indices_to_id(*g, cfg);
  const int dims[3] = {cfg.num_w(), cfg.num_l(), cfg.num_h()};
  auto heuristic = [&](const grid::CellIndex& c) {
    return std::sqrt(double((c.w - g->w) * (c.w - g->w) + (c.l - g->l) * (c.l - g->l) + (c.h - g->h) * (c.h - g->h)));
  };
  struct Node {
    double f;
    std::int64_t id;
    bool operator>(const Node& o) const { return f > o.f || (f == o.f && id > o.id); }
  };
  std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
  std::unordered_map<std::int64_t, double> cost{{start, 0.0}};
  std::unordered_map<std::int64_t, std::int64_t> parent;
  std::unordered_set<std::int64_t> closed;
  open.push({heuristic(*s), start});
  int expansions = 0;
  bool found = false;
  while (!open.empty() && expansions < max_expansions) {
    const Node cur = open.top();
    open.pop();
    if (!closed.insert(cur.id).second) continue;
    if (cur.id == goal) {
      found = true;
      break;
    }
    ++expansions;
    const auto c = grid::id_to_indices(cur.id, cfg);
    const double base = cost[cur.id];
    for (int dh = -1; dh <= 1; ++dh)
      for (int dw = -1; dw <= 1; ++dw)
        for (int dl = -1; dl <= 1; ++dl) {
          if (!dh && !dw && !dl) continue;
          const grid::CellIndex n{c.w + dw, c.l + dl, c.h + dh};
          if (n.w < 0 || n.w >= dims[0] || n.l < 0 || n.l >= dims[1] || n.h < 0 || n.h >= dims[2]) continue;
          const std::int64_t id = grid::indices_to_id(n, cfg);
          if (id != goal && map.occupied(id)) continue;
          if (closed.count(id)) continue;
          const double nc = base + std::sqrt(double(dw * dw + dl * dl + dh * dh));
          auto it = cost.find(id);
          if (it != cost.end() && it->second <= nc) continue;
          cost[id] = nc;
          parent[id] = cur.id;
          open.push({nc + heuristic(n), id});
        }
  }
  if (!found) return {};
  std::vector<Vec3> path;
  for (std::int64_t id = goal; id != start; id = parent.at(id))
    path.push_back(map.cell_center_world(grid::id_to_indices(id, cfg)));
  path.push_back(from);
  std::reverse(path.begin(), path.end());
  path.back() = to;
  return path;
}

namespace {

/// Optimisation state over the free control points.
class Problem {
 public:
  Problem(const UniformBspline& init, const LocalGridMap& map, const CostWeights& weights,
          const OptimizeOptions& opt)
      : spline_(init), map_(map), weights_(weights), opt_(opt) {
    const int n = spline_.size();
    first_ = opt.freeze_start_velocity ? 2 : 1;
    last_ = n - 2;
    anchored_.assign(n, false);
  }

  int num_vars() const { return std::max(0, 3 * (last_ - first_ + 1)); }
  const UniformBspline& spline() const { return spline_; }
  const std::vector<AnchorPair>& anchors() const { return anchors_; }

  Eigen::VectorXd get() const {
    Eigen::VectorXd x(num_vars());
    for (int i = first_; i <= last_; ++i) x.segment<3>(3 * (i - first_)) = spline_.control_points()[i];
    return x;
  }
  void set(const Eigen::VectorXd& x) {
    auto& q = spline_.mutable_control_points();
    for (int i = first_; i <= last_; ++i) q[i] = x.segment<3>(3 * (i - first_));
  }

  double evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& grad, double lambda_c) {
    set(x);
    CostWeights w = weights_;
    w.lambda_collision = lambda_c;
    const CostTerm t = total_cost(spline_, anchors_, w);
    grad.resize(num_vars());
    for (int i = first_; i <= last_; ++i) {
      grad.segment<3>(3 * (i - first_)) = t.gradient[i];
      if (opt_.planar) grad[3 * (i - first_) + 2] = 0.0;
    }
    return t.value;
  }

  /// Anchors every newly colliding free control point; true if the set changed.
  bool resolve_collisions() {
    const auto& q = spline_.control_points();
    bool changed = false;
    int i = first_;
    while (i <= last_) {
      if (!needs_anchor(i)) {
        ++i;
        continue;
      }
      int j = i;
      while (j + 1 <= last_ && needs_anchor(j + 1)) ++j;
      std::vector<Vec3> path = opt_.guide_path;
      if (path.empty()) path = astar_path(map_, q[i - 1], q[j + 1]);
      for (int k = i; k <= j; ++k) {
        const Vec3 tangent = q[k + 1] - q[k - 1];
        const Vec3 guide = path.size() >= 2 ? guide_point(path, q[k], tangent) : q[k];
        if (auto a = find_anchor(q[k], map_, guide, k, opt_.anchor_search_radius, opt_.planar)) {
          anchors_.push_back(*a);
          anchored_[k] = true;
          changed = true;
        }
      }
      i = j + 1;
    }
    return changed;
  }

  bool any_free_point_blocked() const {
    for (int i = first_; i <= last_; ++i)
      if (blocked(map_, spline_.control_points()[i])) return true;
    return false;
  }

  double min_clearance() const {
    double m = kInf;
    for (const auto& a : anchors_) m = std::min(m, a.distance(spline_.control_points()[a.index]));
    return m;
  }

 private:
  bool needs_anchor(int i) const {
    const Vec3& qi = spline_.control_points()[i];
    if (!blocked(map_, qi)) return false;
    if (!anchored_[i]) return true;
    if (!opt_.multi_anchor) return false;
    // A second obstacle: every existing pair already reports this point outside.
    return std::all_of(anchors_.begin(), anchors_.end(),
                       [&](const AnchorPair& a) { return a.index != i || a.distance(qi) > 0.0; });
  }

  UniformBspline spline_;
  const LocalGridMap& map_;
  CostWeights weights_;
  const OptimizeOptions& opt_;
  int first_ = 1, last_ = 0;
  std::vector<bool> anchored_;
  std::vector<AnchorPair> anchors_;
};

}  // namespace

OptimizeResult optimize(const UniformBspline& spline, const LocalGridMap& map, const CostWeights& weights,
                        const OptimizeOptions& options) {
  weights.validate();
  Problem prob(spline, map, weights, options);
  OptimizeResult res;
  res.spline = spline;
  if (prob.num_vars() == 0) {
    res.converged = true;
    res.min_clearance = kInf;
    return res;
  }

  int phase = 0;
  prob.resolve_collisions();
  double lambda_c = weights.lambda_collision;
  Eigen::VectorXd x = prob.get(), g, g_new, x_new;

  for (int round = 0; round < options.max_rounds; ++round) {
    res.rounds = round + 1;
    std::deque<Eigen::VectorXd> s_hist, y_hist;
    double f = prob.evaluate(x, g, lambda_c);
    res.history.push_back({round, phase, f});
    double alpha_gd = 1.0 / std::max(1.0, g.lpNorm<Eigen::Infinity>());

    for (int it = 0; it < options.max_iters; ++it) {
      if (g.lpNorm<Eigen::Infinity>() < options.tol) break;
      // Two-loop recursion.
      Eigen::VectorXd d = -g;
      if (options.use_lbfgs && !s_hist.empty()) {
        const int m = static_cast<int>(s_hist.size());
        std::vector<double> a(m), rho(m);
        Eigen::VectorXd qv = g;
        for (int k = m - 1; k >= 0; --k) {
          rho[k] = 1.0 / y_hist[k].dot(s_hist[k]);
          a[k] = rho[k] * s_hist[k].dot(qv);
          qv -= a[k] * y_hist[k];
        }
        qv *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
        for (int k = 0; k < m; ++k) {
          const double b = rho[k] * y_hist[k].dot(qv);
          qv += s_hist[k] * (a[k] - b);
        }
        d = -qv;
      }
      double slope = g.dot(d);
      if (!(slope < 0.0)) {
        d = -g;
        slope = -g.squaredNorm();
        s_hist.clear();
        y_hist.clear();
      }
      double alpha = (options.use_lbfgs && !s_hist.empty()) ? 1.0 : alpha_gd;
      double f_new = kInf;
      bool accepted = false;
      for (int ls = 0; ls < 60; ++ls) {
        x_new = x + alpha * d;
        f_new = prob.evaluate(x_new, g_new, lambda_c);
        if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * slope) {
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!accepted) {
        prob.set(x);
        break;
      }
      if (!options.use_lbfgs || s_hist.empty()) alpha_gd = std::min(alpha * 2.0, 1e3);
      const Eigen::VectorXd s = x_new - x, y = g_new - g;
      const double step = s.lpNorm<Eigen::Infinity>();
      const double decrease = f - f_new;
      x = x_new;
      f = f_new;
      g = g_new;
      ++res.iterations;
      if (y.dot(s) > 1e-12 * y.squaredNorm()) {
        s_hist.push_back(s);
        y_hist.push_back(y);
        if (static_cast<int>(s_hist.size()) > options.memory) {
          s_hist.pop_front();
          y_hist.pop_front();
        }
      }
      res.history.push_back({round, phase, f});
      prob.set(x);
      if (prob.resolve_collisions()) {
        ++phase;
        s_hist.clear();
        y_hist.clear();
        f = prob.evaluate(x, g, lambda_c);
        res.history.push_back({round, phase, f});
        continue;
      }
      if (step < 1e-10 || decrease <= 1e-14 * std::max(1.0, std::abs(f))) break;
    }
    prob.set(x);
    const double clearance = prob.min_clearance();
    const bool clear = clearance >= weights.safe_distance - options.clearance_tol;
    if (!prob.any_free_point_blocked() && (prob.anchors().empty() || clear)) {
      res.converged = true;
      break;
    }
    lambda_c *= options.collision_growth;
  }

  res.spline = prob.spline();
  res.anchors = prob.anchors();
  res.min_clearance = prob.min_clearance();
  CostWeights w = weights;
  w.lambda_collision = lambda_c;
  res.final_cost = total_cost(res.spline, res.anchors, w).value;
  return res;
}

}  // namespace explo::traj
