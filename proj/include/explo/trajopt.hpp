#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "explo/bspline.hpp"
#include "explo/local_grid.hpp"

namespace explo::traj {

class PlanningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CostWeights {
  double lambda_smooth = 1.0;
  double lambda_collision = 10.0;
  double lambda_feasibility = 1.0;
  double safe_distance = 0.3;  // s_f, m
  double w_vel = 1.0;
  double w_acc = 1.0;
  double w_jerk = 1.0;
  double v_max = 2.0;
  double a_max = 3.0;
  double j_max = 4.0;
  double limit_ratio = 0.95;    // lambda in the dead zone [-lambda c_m, lambda c_m]
  double junction_ratio = 1.2;  // c_j = junction_ratio * lambda * c_m
  double epsilon = 1e-3;        // limit_ratio must stay below 1 - epsilon

  /// Throws std::invalid_argument on negative weights or a bad limit ordering.
  void validate() const;
};

/// Per-axis feasibility penalty f(c): zero on the dead zone, cubic out to
/// +-c_j, quadratic beyond with coefficients that match value, slope and
/// curvature at +-c_j.
class FeasibilityPenalty {
 public:
  FeasibilityPenalty(double limit, double ratio, double junction);

  double value(double c) const;
  double derivative(double c) const;

  double threshold() const { return threshold_; }
  double junction() const { return junction_; }
  double a1() const { return a_; }
  double b1() const { return -b_; }
  double c1() const { return c_; }
  double a2() const { return a_; }
  double b2() const { return b_; }
  double c2() const { return c_; }

 private:
  double threshold_;  // lambda * c_m
  double junction_;   // c_j
  double a_, b_, c_;  // right tail; the left tail mirrors it
};

/// Safe-distance penalty on c = s_f - d: 0, c^3, then 3 s_f c^2 - 3 s_f^2 c + s_f^3.
double collision_penalty(double c, double safe_distance);
double collision_penalty_derivative(double c, double safe_distance);

struct AnchorPair {
  int index = 0;
  Vec3 surface = Vec3::Zero();    // p: obstacle-surface point
  Vec3 direction = Vec3::UnitX(); // v: unit, from inside toward free space

  double distance(const Vec3& q) const { return (q - surface).dot(direction); }
};

/// nullopt when q is free. Otherwise walks from q toward `guide` to the first
/// free cell (falling back to a 26-neighbourhood BFS for the nearest free
/// cell) and returns the crossing point and escape direction. Throws
/// PlanningError if no free cell lies within `search_radius`. With `planar`
/// the search stays in the horizontal layer of q.
std::optional<AnchorPair> find_anchor(const Vec3& q, const grid::LocalGridMap& map, const Vec3& guide,
                                      int index = 0, double search_radius = 3.0, bool planar = false);

struct CostTerm {
  double value = 0.0;
  std::vector<Vec3> gradient;
};

CostTerm smoothness_cost(const UniformBspline& spline);
CostTerm collision_cost(const UniformBspline& spline, std::span<const AnchorPair> anchors,
                        const CostWeights& weights);
CostTerm feasibility_cost(const UniformBspline& spline, const CostWeights& weights);
/// lambda_s J_s + lambda_c J_c + lambda_d J_d.
CostTerm total_cost(const UniformBspline& spline, std::span<const AnchorPair> anchors,
                    const CostWeights& weights);

/// Grid A* (26-connected, in-bounds cells only) between two world points.
/// Start/goal cells may be occupied. Empty on failure.
std::vector<Vec3> astar_path(const grid::LocalGridMap& map, const Vec3& from, const Vec3& to,
                             int max_expansions = 60000);

struct OptimizeOptions {
  int max_iters = 200;
  double tol = 1e-6;
  bool use_lbfgs = true;  // plain gradient descent otherwise
  int memory = 8;
  bool freeze_start_velocity = false;
  bool multi_anchor = false;
  /// Penalty continuation: lambda_collision is multiplied by `collision_growth`
  /// after any round that leaves an anchored d_i below s_f - clearance_tol.
  int max_rounds = 8;
  double collision_growth = 10.0;
  double clearance_tol = 1e-3;
  double anchor_search_radius = 3.0;
  /// Hold every control point at its initial height.
  bool planar = false;
  /// Optional collision-free reference path for anchor directions; A* on the
  /// map is used when empty.
  std::vector<Vec3> guide_path;
};

struct IterationRecord {
  int round = 0;
  int phase = 0;  // bumps whenever the anchor set changes
  double cost = 0.0;
};

struct OptimizeResult {
  UniformBspline spline;
  std::vector<AnchorPair> anchors;
  std::vector<IterationRecord> history;
  int iterations = 0;
  int rounds = 0;
  double final_cost = 0.0;
  double min_clearance = 0.0;  // min over anchors of d_i (inf when no anchors)
  bool converged = false;
};

/// Minimises the weighted cost over the interior control points; endpoints
/// (and Q_1 when freeze_start_velocity) stay fixed. Throws PlanningError when
/// an anchor cannot be resolved.
OptimizeResult optimize(const UniformBspline& spline, const grid::LocalGridMap& map,
                        const CostWeights& weights, const OptimizeOptions& options = {});

}  // namespace explo::traj
