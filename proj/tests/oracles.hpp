// Test-only reference computations, written without the library's own helpers.
#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include "explo/frontier.hpp"
#include "explo/geom.hpp"
#include "explo/odom.hpp"

namespace oracle {

using explo::Mat3;
using explo::Vec3;
using explo::odom::NominalState;

inline Mat3 rodrigues(const Vec3& w) {
  const double t = w.norm();
  if (t == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(t, w / t).toRotationMatrix();
}

inline Vec3 log_map(const Mat3& r) {
  const Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

/// x [+] d with right-multiplicative attitude error.
inline NominalState boxplus(const NominalState& x, const Eigen::Matrix<double, 18, 1>& d) {
  NominalState y = x;
  y.rot = explo::Rot3(x.rot.matrix() * rodrigues(d.segment<3>(0)));
  y.pos += d.segment<3>(3);
  y.vel += d.segment<3>(6);
  y.bias_gyro += d.segment<3>(9);
  y.bias_accel += d.segment<3>(12);
  y.gravity += d.segment<3>(15);
  return y;
}

inline Eigen::Matrix<double, 18, 1> boxminus(const NominalState& a, const NominalState& b) {
  Eigen::Matrix<double, 18, 1> d;
  d.segment<3>(0) = log_map(b.rot.matrix().transpose() * a.rot.matrix());
  d.segment<3>(3) = a.pos - b.pos;
  d.segment<3>(6) = a.vel - b.vel;
  d.segment<3>(9) = a.bias_gyro - b.bias_gyro;
  d.segment<3>(12) = a.bias_accel - b.bias_accel;
  d.segment<3>(15) = a.gravity - b.gravity;
  return d;
}

/// One Euler step of the discrete nominal model, written out independently.
inline NominalState euler_step(const NominalState& x, const Vec3& omega, const Vec3& accel, double dt) {
  NominalState n = x;
  n.rot = explo::Rot3(x.rot.matrix() * rodrigues((omega - x.bias_gyro) * dt));
  n.pos = x.pos + x.vel * dt;
  n.vel = x.vel + (x.rot.matrix() * (accel - x.bias_accel) + x.gravity) * dt;
  return n;
}

/// Central-difference Jacobian of the step over the 18 error directions.
inline Eigen::Matrix<double, 18, 18> fd_transition(const NominalState& x, const Vec3& omega, const Vec3& accel,
                                                  double dt, double h = 1e-6) {
  const NominalState base = euler_step(x, omega, accel, dt);
  Eigen::Matrix<double, 18, 18> j;
  for (int k = 0; k < 18; ++k) {
    Eigen::Matrix<double, 18, 1> e = Eigen::Matrix<double, 18, 1>::Zero();
    e[k] = h;
    const auto plus = boxminus(euler_step(boxplus(x, e), omega, accel, dt), base);
    const auto minus = boxminus(euler_step(boxplus(x, -e), omega, accel, dt), base);
    j.col(k) = (plus - minus) / (2.0 * h);
  }
  return j;
}

/// Offset-lattice cells of one point, P - r + size * (a, b, c) for a, b, c in
/// [0, ceil(r / size)], binned directly. Cells outside the grid are dropped.
inline std::set<std::tuple<int, int, int>> lattice_cells(const Vec3& p, double r, double size, int nw, int nl,
                                                         int nh) {
  const int n = static_cast<int>(std::ceil(r / size - 1e-12));
  std::set<std::tuple<int, int, int>> out;
  for (int a = 0; a <= n; ++a)
    for (int b = 0; b <= n; ++b)
      for (int c = 0; c <= n; ++c) {
        const int w = static_cast<int>(std::floor((p.x() - r + size * a) / size)) + nw / 2;
        const int l = static_cast<int>(std::floor((p.y() - r + size * b) / size)) + nl / 2;
        const int h = static_cast<int>(std::floor((p.z() - r + size * c) / size)) + nh / 2;
        if (w >= 0 && w < nw && l >= 0 && l < nl && h >= 0 && h < nh) out.insert({w, l, h});
      }
  return out;
}

/// Utility of one candidate straight from the formulas: info minus distance,
/// minus exp(lambda_dir * A) in direction mode. A is recomputed from the goal
/// history with acos rather than read from the candidate.
inline double utility(const explo::explore::FrontierCandidate& c, const explo::explore::ExploreState& s,
                      bool direction) {
  const auto& w = s.weights;
  double r = w.lambda_info * static_cast<double>(c.f_info) - w.lambda_dist * c.f_dist;
  if (!direction) return r;
  double a = 0.0;
  if (s.prev && s.prev_prev) {
    const Eigen::Vector2d u = (*s.prev - *s.prev_prev).head<2>();
    const Eigen::Vector2d v = (c.position - *s.prev).head<2>();
    if (u.norm() >= 1e-9 && v.norm() >= 1e-9) a = std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
  }
  return r - std::exp(w.lambda_dir * a);
}

/// Exhaustive argmax. Scores within tol count as ties, broken by f_dist and
/// then by position.
inline std::optional<std::size_t> argmax(const std::vector<explo::explore::FrontierCandidate>& cands,
                                         const explo::explore::ExploreState& s, bool direction, double tol = 1e-9) {
  double best = -1e300;
  for (const auto& c : cands) best = std::max(best, utility(c, s, direction));
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (utility(cands[i], s, direction) < best - tol) continue;
    if (!pick) {
      pick = i;
      continue;
    }
    const auto& a = cands[i];
    const auto& b = cands[*pick];
    const auto ka = std::make_tuple(a.f_dist, a.position.x(), a.position.y(), a.position.z());
    const auto kb = std::make_tuple(b.f_dist, b.position.x(), b.position.y(), b.position.z());
    if (ka < kb) pick = i;
  }
  return pick;
}

}  // namespace oracle
