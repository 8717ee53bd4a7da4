#include "explo/odom.hpp"

#include <algorithm>
#include <cmath>

namespace explo::odom {

namespace {

void check_inputs(const NominalState& x, const ImuSample& imu, double dt) {
  if (!std::isfinite(dt) || dt < 0.0) throw OdomError("dt must be finite and non-negative");
  if (!imu.omega.allFinite() || !imu.accel.allFinite()) throw OdomError("non-finite IMU sample");
  x.validate(true);
}

Transition common_blocks(const NominalState& x, const ImuSample& imu, double dt) {
  Transition t;
  t.fx.setIdentity();
  t.fw.setZero();
  const Mat3 r = x.rot.matrix();
  const Mat3 eye = Mat3::Identity();
  t.fx.block<3, 3>(kPos, kVel) = eye * dt;
  t.fx.block<3, 3>(kVel, kRot) = -r * hat(imu.accel - x.bias_accel) * dt;
  t.fx.block<3, 3>(kVel, kBiasAccel) = -r * dt;
  t.fx.block<3, 3>(kVel, kGravity) = eye * dt;
  t.fw.block<3, 3>(kVel, kNoiseAccel) = -r * dt;
  t.fw.block<3, 3>(kBiasGyro, kNoiseBiasGyro) = eye * dt;
  t.fw.block<3, 3>(kBiasAccel, kNoiseBiasAccel) = eye * dt;
  return t;
}

}  // namespace

void NominalState::validate(bool allow_any_gravity) const {
  if (!pos.allFinite() || !vel.allFinite() || !bias_gyro.allFinite() || !bias_accel.allFinite() ||
      !gravity.allFinite() || !rot.matrix().allFinite())
    throw OdomError("non-finite nominal state");
  const double g = gravity.norm();
  if (!allow_any_gravity && (g < 9.0 || g > 10.5)) throw OdomError("gravity magnitude outside [9.0, 10.5]");
}

NominalState propagate_nominal(const NominalState& x, const ImuSample& imu, double dt) {
  NominalState n = x;
  n.rot = x.rot * so3_exp((imu.omega - x.bias_gyro) * dt);
  n.pos = x.pos + x.vel * dt;
  n.vel = x.vel + (x.rot * (imu.accel - x.bias_accel) + x.gravity) * dt;
  return n;
}

Transition transition_exact(const NominalState& x, const ImuSample& imu, double dt) {
  check_inputs(x, imu, dt);
  Transition t = common_blocks(x, imu, dt);
  const Vec3 w = (imu.omega - x.bias_gyro) * dt;
  const Mat3 a = so3_right_jacobian(w);
  t.fx.block<3, 3>(kRot, kRot) = so3_exp(-w).matrix();
  t.fx.block<3, 3>(kRot, kBiasGyro) = -a * dt;
  t.fw.block<3, 3>(kRot, kNoiseGyro) = -a * dt;
  return t;
}

Transition transition_approx(const NominalState& x, const ImuSample& imu, double dt) {
  check_inputs(x, imu, dt);
  Transition t = common_blocks(x, imu, dt);
  t.fx.block<3, 3>(kRot, kRot).setIdentity();
  t.fx.block<3, 3>(kRot, kBiasGyro) = -Mat3::Identity() * dt;
  t.fw.block<3, 3>(kRot, kNoiseGyro) = -Mat3::Identity() * dt;
  return t;
}

StateMatrix propagate_covariance(const StateMatrix& p, const Transition& t, const NoiseCov& q) {
  return t.fx * p * t.fx.transpose() + t.fw * q * t.fw.transpose();
}

Vec3 gravity_from_static(const Vec3& accel_measured, double gravity_magnitude) {
  const double n = accel_measured.norm();
  if (n < 1e-6) throw OdomError("degenerate IMU sample: |a_m| < 1e-6");
  return -accel_measured / n * gravity_magnitude;
}

NominalState hf_propagate(const NominalState& prev, const ImuSample& imu_prev, const ImuSample& imu_curr) {
  const double dt = imu_curr.t - imu_prev.t;
  if (!(dt > 0.0)) throw OdomError("IMU timestamps must be strictly increasing");
  if (imu_prev.accel.norm() < 1e-6 || imu_curr.accel.norm() < 1e-6)
    throw OdomError("degenerate IMU sample: |a_m| < 1e-6");

  NominalState next = prev;
  const Vec3 a0 = prev.rot * (imu_prev.accel - prev.bias_accel) + prev.gravity;
  const Vec3 omega = 0.5 * (imu_prev.omega + imu_curr.omega) - prev.bias_gyro;
  next.rot = prev.rot * so3_exp(omega * dt);
  const Vec3 a1 = next.rot * (imu_curr.accel - prev.bias_accel) + prev.gravity;
  const Vec3 a = 0.5 * (a0 + a1);
  next.pos = prev.pos + prev.vel * dt + 0.5 * a * dt * dt;
  next.vel = prev.vel + a * dt;
  return next;
}

void HfPropagator::initialize(const Pose& pose, const ImuSample& static_sample, double gravity_magnitude) {
  state_ = NominalState{};
  state_.rot = pose.rot;
  state_.pos = pose.trans;
  state_.gravity = pose.rot * gravity_from_static(static_sample.accel, gravity_magnitude);
  last_ = static_sample;
  initialized_ = true;
  history_.assign(1, StampedPose{static_sample.t, state_.pose()});
}

void HfPropagator::reset(const Pose& pose, const Vec3& velocity, const ImuSample& last_imu) {
  NominalState anchor = state_;
  anchor.rot = pose.rot;
  anchor.pos = pose.trans;
  anchor.vel = velocity;
  reset(anchor, last_imu);
}

void HfPropagator::reset(const NominalState& anchor, const ImuSample& last_imu) {
  state_ = anchor;
  last_ = last_imu;
  initialized_ = true;
  history_.assign(1, StampedPose{last_imu.t, state_.pose()});
}

const NominalState& HfPropagator::propagate(const ImuSample& imu) {
  if (!initialized_) throw OdomError("propagator used before initialization");
  state_ = hf_propagate(state_, last_, imu);
  last_ = imu;
  history_.push_back(StampedPose{imu.t, state_.pose()});
  return state_;
}

Pose interpolate_track(std::span<const StampedPose> track, double t) {
  constexpr double kSlack = 1e-9;
  if (track.empty() || t < track.front().t - kSlack || t > track.back().t + kSlack)
    throw OdomError("no pose available for time " + std::to_string(t));
  if (track.size() == 1) return track.front().pose;
  auto it = std::lower_bound(track.begin(), track.end(), t,
                             [](const StampedPose& s, double v) { return s.t < v; });
  if (it == track.begin()) return it->pose;
  if (it == track.end()) return track.back().pose;
  const auto& a = *(it - 1);
  const auto& b = *it;
  const double s = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
  return pose_interpolate(a.pose, b.pose, s);
}

PointCloudFrame undistort_frame(const PointCloudFrame& frame, std::span<const Pose> relative_per_point,
                                const Pose& imu_from_lidar) {
  if (relative_per_point.size() != frame.points.size())
    throw OdomError("missing per-point pose: got " + std::to_string(relative_per_point.size()) +
                    " for " + std::to_string(frame.points.size()) + " points");
  const Pose lidar_from_imu = pose_inverse(imu_from_lidar);
  PointCloudFrame out = frame;
  for (std::size_t j = 0; j < frame.points.size(); ++j) {
    const Pose t = pose_compose(lidar_from_imu, pose_compose(relative_per_point[j], imu_from_lidar));
    out.points[j].p = pose_apply(t, frame.points[j].p);
  }
  return out;
}

PointCloudFrame undistort_frame(const PointCloudFrame& frame, std::span<const StampedPose> imu_track,
                                const Pose& imu_from_lidar) {
  const Pose end_inv = pose_inverse(interpolate_track(imu_track, frame.end_time()));
  std::vector<Pose> rel;
  rel.reserve(frame.points.size());
  double cached_offset = -1.0;
  Pose cached;
  for (const auto& pt : frame.points) {
    // Points of one azimuth column share an offset.
    if (pt.offset != cached_offset) {
      cached = pose_compose(end_inv, interpolate_track(imu_track, frame.timestamp + pt.offset));
      cached_offset = pt.offset;
    }
    rel.push_back(cached);
  }
  return undistort_frame(frame, rel, imu_from_lidar);
}

}  // namespace explo::odom
