#include "explo/geom.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace explo {

Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return Vec3(m(2, 1), m(0, 2), m(1, 0)); }

Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) u.col(2) = -u.col(2);
  return u * v.transpose();
}

namespace {

double residual(const Mat3& m) {
  return (m.transpose() * m - Mat3::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace

Rot3::Rot3(const Mat3& m) : m_(m) {
  if (residual(m_) > kOrthoTolerance) m_ = orthonormalize(m_);
}

Rot3 Rot3::about_z(double yaw) {
  Mat3 m;
  const double c = std::cos(yaw), s = std::sin(yaw);
  m << c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0;
  return Rot3(m, NoCheck{});
}

Rot3 Rot3::inverse() const { return Rot3(m_.transpose(), NoCheck{}); }

Rot3 Rot3::operator*(const Rot3& rhs) const { return Rot3(Mat3(m_ * rhs.m_)); }

double Rot3::orthonormality_error() const { return residual(m_); }

double Rot3::yaw() const { return std::atan2(m_(1, 0), m_(0, 0)); }

Rot3 so3_exp(const Vec3& omega_dt) {
  const double theta = omega_dt.norm();
  const Mat3 k = hat(omega_dt);
  if (theta < kSmallAngle) {
    return Rot3(Mat3(Mat3::Identity() + k + 0.5 * k * k));
  }
  const double a = std::sin(theta) / theta;
  const double b = (1.0 - std::cos(theta)) / (theta * theta);
  return Rot3(Mat3(Mat3::Identity() + a * k + b * k * k));
}

Vec3 so3_log(const Rot3& r) {
  const Mat3& m = r.matrix();
  const Vec3 axial(m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1));
  const double theta = std::atan2(0.5 * axial.norm(), 0.5 * (m.trace() - 1.0));
  if (theta < kSmallAngle) return 0.5 * axial;
  if (M_PI - theta < 1e-6) {
    // Near pi the antisymmetric part vanishes; recover the axis from R + I.
    const Mat3 b = 0.5 * (m + Mat3::Identity());
    int col = 0;
    b.diagonal().maxCoeff(&col);
    Vec3 axis = b.col(col) / std::sqrt(std::max(b(col, col), 1e-300));
    axis.normalize();
    return theta * axis;
  }
  return theta / (2.0 * std::sin(theta)) * axial;
}

Mat3 so3_right_jacobian(const Vec3& u) {
  const double theta = u.norm();
  const Mat3 k = hat(u);
  if (theta < kSmallAngle) {
    return Mat3::Identity() - 0.5 * k + (1.0 / 6.0) * k * k;
  }
  const double t2 = theta * theta;
  return Mat3::Identity() - ((1.0 - std::cos(theta)) / t2) * k +
         ((theta - std::sin(theta)) / (t2 * theta)) * k * k;
}

Pose pose_compose(const Pose& a, const Pose& b) {
  return Pose{a.rot * b.rot, a.rot * b.trans + a.trans};
}

Pose pose_inverse(const Pose& a) {
  const Rot3 rinv = a.rot.inverse();
  return Pose{rinv, -(rinv * a.trans)};
}

Vec3 pose_apply(const Pose& a, const Vec3& p) { return a.rot * p + a.trans; }

Pose pose_interpolate(const Pose& a, const Pose& b, double s) {
  const Vec3 delta = so3_log(a.rot.inverse() * b.rot);
  return Pose{a.rot * so3_exp(s * delta), (1.0 - s) * a.trans + s * b.trans};
}

}  // namespace explo
