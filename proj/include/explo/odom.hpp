#pragma once

#include <Eigen/Core>
#include <span>
#include <stdexcept>
#include <vector>

#include "explo/geom.hpp"
#include "explo/sensors.hpp"

namespace explo::odom {

/// Error-state layout: six 3-blocks [dtheta, dp, dv, db_gyro, db_accel, dg].
/// Attitude error is right-multiplicative: R_true = R * Exp(dtheta).
inline constexpr int kStateDim = 18;
inline constexpr int kNoiseDim = 12;
enum StateBlock : int { kRot = 0, kPos = 3, kVel = 6, kBiasGyro = 9, kBiasAccel = 12, kGravity = 15 };
/// Noise layout: [n_gyro, n_accel, n_bias_gyro, n_bias_accel].
enum NoiseBlock : int { kNoiseGyro = 0, kNoiseAccel = 3, kNoiseBiasGyro = 6, kNoiseBiasAccel = 9 };

using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using NoiseMatrix = Eigen::Matrix<double, kStateDim, kNoiseDim>;
using NoiseCov = Eigen::Matrix<double, kNoiseDim, kNoiseDim>;

class OdomError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NominalState {
  Rot3 rot;                                // world <- IMU
  Vec3 pos = Vec3::Zero();
  Vec3 vel = Vec3::Zero();
  Vec3 bias_gyro = Vec3::Zero();
  Vec3 bias_accel = Vec3::Zero();
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);    // gravitational acceleration, world frame

  /// Throws OdomError on non-finite fields or |gravity| outside [9.0, 10.5].
  void validate(bool allow_any_gravity = false) const;
  Pose pose() const { return Pose{rot, pos}; }
};

struct ImuSample {
  double t = 0.0;
  Vec3 omega = Vec3::Zero();  // measured body rate
  Vec3 accel = Vec3::Zero();  // measured specific force
};

inline ImuSample to_sample(const ImuMeasurement& m) { return ImuSample{m.t, m.gyro, m.accel}; }

struct Transition {
  StateMatrix fx;
  NoiseMatrix fw;
};

/// Discrete nominal model that the transition matrices linearize:
///   R+ = R Exp((w - bg) dt),  p+ = p + v dt,  v+ = v + (R (a - ba) + g) dt.
NominalState propagate_nominal(const NominalState& x, const ImuSample& imu, double dt);

/// Full error-state transition. Rotation row: Exp(-w dt) on dtheta and
/// -A(w dt) dt on db_gyro, with A the right Jacobian (so3_right_jacobian).
Transition transition_exact(const NominalState& x, const ImuSample& imu, double dt);
/// Same matrices with Exp(.) and A(.) replaced by identity.
Transition transition_approx(const NominalState& x, const ImuSample& imu, double dt);

/// P <- Fx P Fx^T + Fw Q Fw^T.
StateMatrix propagate_covariance(const StateMatrix& p, const Transition& t, const NoiseCov& q);

/// Gravity seed from a static sample: -a_m / |a_m| * G_m, expressed in the body frame.
Vec3 gravity_from_static(const Vec3& accel_measured, double gravity_magnitude);

/// One high-rate step using midpoint gyro and midpoint world acceleration.
NominalState hf_propagate(const NominalState& prev, const ImuSample& imu_prev, const ImuSample& imu_curr);

struct StampedPose {
  double t = 0.0;
  Pose pose;  // world <- IMU
};

/// 200 Hz odometry between estimator updates. Re-anchored on every
/// optimized pose; IMU samples arriving afterwards are integrated from it.
class HfPropagator {
 public:
  /// Seeds attitude/gravity from a static sample (gravity = R * gravity_from_static).
  void initialize(const Pose& pose, const ImuSample& static_sample, double gravity_magnitude);
  /// Restart from a recorded optimized pose; keeps biases/gravity unless overwritten.
  void reset(const Pose& pose, const Vec3& velocity, const ImuSample& last_imu);
  void reset(const NominalState& anchor, const ImuSample& last_imu);

  const NominalState& propagate(const ImuSample& imu);

  bool initialized() const { return initialized_; }
  const NominalState& state() const { return state_; }
  /// Poses since the last reset, oldest first (the anchor included).
  const std::vector<StampedPose>& history() const { return history_; }

 private:
  NominalState state_;
  ImuSample last_{};
  bool initialized_ = false;
  std::vector<StampedPose> history_;
};

/// Pose at time t from a time-ordered track; throws OdomError outside its span.
Pose interpolate_track(std::span<const StampedPose> track, double t);

/// Maps each point by  T_IL^-1 * T_kj * T_IL  where T_kj (IMU at capture time
/// expressed in the IMU frame at sweep end) is given per point.
PointCloudFrame undistort_frame(const PointCloudFrame& frame, std::span<const Pose> relative_per_point,
                                const Pose& imu_from_lidar);
/// Convenience form: relative poses come from an IMU-pose track covering the sweep.
PointCloudFrame undistort_frame(const PointCloudFrame& frame, std::span<const StampedPose> imu_track,
                                const Pose& imu_from_lidar);

}  // namespace explo::odom
