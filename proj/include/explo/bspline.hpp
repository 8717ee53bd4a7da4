#pragma once

#include <stdexcept>
#include <vector>

#include "explo/geom.hpp"

namespace explo::traj {

/// Uniform cubic B-spline over control points Q_0..Q_{n-1} with knot
/// interval dt.
///
/// The ends are closed with reflected phantom points Q_{-1} = 2Q_0 - Q_1 and
/// Q_n = 2Q_{n-1} - Q_{n-2}, so the curve starts exactly at Q_0, ends exactly
/// at Q_{n-1}, runs for (n - 1) * dt, and every sample stays in the convex
/// hull of the real control points.
class UniformBspline {
 public:
  static constexpr int kDegree = 3;

  UniformBspline() = default;
  UniformBspline(std::vector<Vec3> control_points, double dt);

  const std::vector<Vec3>& control_points() const { return ctrl_; }
  std::vector<Vec3>& mutable_control_points() { return ctrl_; }
  double knot_interval() const { return dt_; }
  int size() const { return static_cast<int>(ctrl_.size()); }
  double duration() const { return dt_ * (size() - 1); }

  Vec3 position(double t) const;
  Vec3 velocity(double t) const;
  Vec3 acceleration(double t) const;

  /// `count` samples evenly spaced over [0, duration] (ends included).
  std::vector<Vec3> sample(int count) const;
  /// Arc length by dense sampling.
  double length(int samples = 400) const;

 private:
  Vec3 padded(int i) const;
  template <int Order>
  Vec3 eval(double t) const;

  std::vector<Vec3> ctrl_;
  double dt_ = 1.0;
};

/// Collision-unaware initial path: n_points evenly spaced on start -> goal.
/// start == goal gives a degenerate (hover) spline of identical points.
UniformBspline init_spline(const Vec3& start, const Vec3& goal, int n_points, double dt);

/// Control-point derivatives: V_i = (Q_{i+1} - Q_i)/dt, A_i = (V_{i+1} - V_i)/dt,
/// J_i = (A_{i+1} - A_i)/dt.
struct ControlDerivatives {
  std::vector<Vec3> vel;
  std::vector<Vec3> acc;
  std::vector<Vec3> jerk;
};
ControlDerivatives spline_derivatives(const UniformBspline& spline);

}  // namespace explo::traj
