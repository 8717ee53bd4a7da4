#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace explo {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Mat3 = Eigen::Matrix3d;

/// Rotation-angle threshold below which exp / Jacobians switch to their series form.
inline constexpr double kSmallAngle = 1e-6;
/// Allowed drift of R^T R from identity before a rotation is re-orthonormalized.
inline constexpr double kOrthoTolerance = 1e-9;

Mat3 hat(const Vec3& v);
Vec3 vee(const Mat3& m);

/// Proper rotation stored as an orthonormal matrix.
///
/// Every constructor and composition checks the orthonormality residual and
/// projects back onto SO(3) (polar decomposition) once it exceeds
/// kOrthoTolerance, so long chains of products stay valid.
class Rot3 {
 public:
  Rot3() : m_(Mat3::Identity()) {}
  explicit Rot3(const Mat3& m);

  static Rot3 identity() { return Rot3(); }
  static Rot3 about_z(double yaw);

  const Mat3& matrix() const { return m_; }
  Rot3 inverse() const;
  Rot3 operator*(const Rot3& rhs) const;
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// max |R^T R - I| elementwise.
  double orthonormality_error() const;
  double yaw() const;

 private:
  struct NoCheck {};
  Rot3(const Mat3& m, NoCheck) : m_(m) {}
  Mat3 m_;
};

Mat3 orthonormalize(const Mat3& m);

/// Rodrigues exponential of an axis-angle vector.
Rot3 so3_exp(const Vec3& omega_dt);
/// Inverse of so3_exp, angle in [0, pi].
Vec3 so3_log(const Rot3& r);

/// Right Jacobian of SO(3):
///   A(u) = I - (1 - cos t)/t^2 [u]x + (t - sin t)/t^3 [u]x^2,  t = |u|.
/// Satisfies Exp(u + d) ~= Exp(u) Exp(A(u) d).
Mat3 so3_right_jacobian(const Vec3& u);

/// Rigid transform p -> rot * p + trans.
struct Pose {
  Rot3 rot;
  Vec3 trans = Vec3::Zero();

  static Pose identity() { return Pose{}; }
};

Pose pose_compose(const Pose& a, const Pose& b);
Pose pose_inverse(const Pose& a);
Vec3 pose_apply(const Pose& a, const Vec3& p);

/// Linear in translation, geodesic in rotation; s in [0, 1].
Pose pose_interpolate(const Pose& a, const Pose& b, double s);

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace explo
