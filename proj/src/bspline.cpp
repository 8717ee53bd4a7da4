#include "explo/bspline.hpp"

#include <algorithm>
#include <cmath>

namespace explo::traj {

UniformBspline::UniformBspline(std::vector<Vec3> control_points, double dt)
    : ctrl_(std::move(control_points)), dt_(dt) {
  if (ctrl_.size() < 4) throw std::invalid_argument("a cubic B-spline needs at least 4 control points");
  if (!(dt_ > 0.0) || !std::isfinite(dt_)) throw std::invalid_argument("knot interval must be positive");
}

Vec3 UniformBspline::padded(int i) const {
  const int n = size();
  if (i < 0) return 2.0 * ctrl_[0] - ctrl_[1];
  if (i >= n) return 2.0 * ctrl_[n - 1] - ctrl_[n - 2];
  return ctrl_[i];
}

template <int Order>
Vec3 UniformBspline::eval(double t) const {
  const int segments = size() - 1;
  const double x = std::clamp(t / dt_, 0.0, static_cast<double>(segments));
  const int s = std::min(static_cast<int>(std::floor(x)), segments - 1);
  const double u = x - s;
  double b[4];
  if constexpr (Order == 0) {
    const double u2 = u * u, u3 = u2 * u, m = 1.0 - u;
    b[0] = m * m * m / 6.0;
    b[1] = (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0;
    b[2] = (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0;
    b[3] = u3 / 6.0;
  } else if constexpr (Order == 1) {
    const double u2 = u * u, m = 1.0 - u;
    b[0] = -0.5 * m * m / dt_;
    b[1] = (1.5 * u2 - 2.0 * u) / dt_;
    b[2] = (-1.5 * u2 + u + 0.5) / dt_;
    b[3] = 0.5 * u2 / dt_;
  } else {
    const double inv = 1.0 / (dt_ * dt_);
    b[0] = (1.0 - u) * inv;
    b[1] = (3.0 * u - 2.0) * inv;
    b[2] = (-3.0 * u + 1.0) * inv;
    b[3] = u * inv;
  }
  return b[0] * padded(s - 1) + b[1] * padded(s) + b[2] * padded(s + 1) + b[3] * padded(s + 2);
}

Vec3 UniformBspline::position(double t) const { return eval<0>(t); }
Vec3 UniformBspline::velocity(double t) const { return eval<1>(t); }
Vec3 UniformBspline::acceleration(double t) const { return eval<2>(t); }

std::vector<Vec3> UniformBspline::sample(int count) const {
  std::vector<Vec3> out;
  if (count <= 0) return out;
  out.reserve(count);
  if (count == 1) {
    out.push_back(position(0.0));
    return out;
  }
  for (int i = 0; i < count; ++i) out.push_back(position(duration() * i / (count - 1)));
  return out;
}

double UniformBspline::length(int samples) const {
  const auto pts = sample(samples);
  double len = 0.0;
  for (std::size_t i = 1; i < pts.size(); ++i) len += (pts[i] - pts[i - 1]).norm();
  return len;
}

UniformBspline init_spline(const Vec3& start, const Vec3& goal, int n_points, double dt) {
  if (n_points < 4) throw std::invalid_argument("init_spline needs n_points >= 4");
  std::vector<Vec3> q(n_points);
  for (int i = 0; i < n_points; ++i) {
    const double s = static_cast<double>(i) / (n_points - 1);
    q[i] = start + s * (goal - start);
  }
  q.front() = start;
  q.back() = goal;
  return UniformBspline(std::move(q), dt);
}

ControlDerivatives spline_derivatives(const UniformBspline& spline) {
  const auto& q = spline.control_points();
  const double dt = spline.knot_interval();
  ControlDerivatives d;
  for (std::size_t i = 0; i + 1 < q.size(); ++i) d.vel.push_back((q[i + 1] - q[i]) / dt);
  for (std::size_t i = 0; i + 1 < d.vel.size(); ++i) d.acc.push_back((d.vel[i + 1] - d.vel[i]) / dt);
  for (std::size_t i = 0; i + 1 < d.acc.size(); ++i) d.jerk.push_back((d.acc[i + 1] - d.acc[i]) / dt);
  return d;
}

}  // namespace explo::traj
