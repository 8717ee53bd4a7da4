#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "explo/geom.hpp"
#include "explo/rng.hpp"
#include "explo/scene.hpp"

namespace explo {

/// Rotating 360-degree LiDAR (MID-360-like defaults).
struct LidarSpec {
  double h_fov_deg = 360.0;
  double v_fov_deg = 59.0;
  int n_azimuth = 360;
  int n_elevation = 16;
  double max_range = 30.0;
  double rate_hz = 10.0;
  double noise_sigma = 0.02;  // range noise, Gaussian truncated at 3 sigma

  void validate() const;
  double period() const { return 1.0 / rate_hz; }
  double elevation(int ring) const;
  double azimuth(int column) const;
};

struct LidarPoint {
  Vec3 p = Vec3::Zero();  // sensor frame at capture time
  double offset = 0.0;    // seconds since sweep start, in [0, period)
};

struct PointCloudFrame {
  double timestamp = 0.0;  // sweep start
  double period = 0.1;
  std::vector<LidarPoint> points;

  double end_time() const { return timestamp + period; }
};

/// Sensor pose in the world as a function of the offset within the sweep.
using SweepPoseFn = std::function<Pose(double offset)>;

/// Static scan: the sensor holds `pose` for the whole sweep. OpenMP-parallel
/// over azimuth columns; bit-identical to lidar_scan_serial.
PointCloudFrame lidar_scan(const Scene& scene, const Pose& pose, const LidarSpec& spec,
                           std::uint64_t seed, double timestamp = 0.0);
/// Scan with in-sweep motion; column k is fired at offset k / (n_azimuth * rate).
PointCloudFrame lidar_scan(const Scene& scene, const SweepPoseFn& pose_at, const LidarSpec& spec,
                           std::uint64_t seed, double timestamp = 0.0);
/// Reference kernel: single thread, every ray against every primitive.
PointCloudFrame lidar_scan_serial(const Scene& scene, const SweepPoseFn& pose_at,
                                  const LidarSpec& spec, std::uint64_t seed,
                                  double timestamp = 0.0);

struct ImuSpec {
  double rate_hz = 200.0;
  double gyro_noise_density = 0.0;   // rad/s/sqrt(Hz)
  double accel_noise_density = 0.0;  // m/s^2/sqrt(Hz)
  Vec3 bias_gyro = Vec3::Zero();
  Vec3 bias_accel = Vec3::Zero();
  double gravity = 9.81;

  void validate() const;
};

/// Ground-truth body motion at an instant.
struct KinematicSample {
  Pose pose;                         // body in world
  Vec3 vel = Vec3::Zero();           // world frame
  Vec3 acc = Vec3::Zero();           // world frame
  Vec3 omega_body = Vec3::Zero();    // body frame
};
using TrajectoryFn = std::function<KinematicSample(double t)>;

struct ImuMeasurement {
  double t = 0.0;
  Vec3 gyro = Vec3::Zero();
  Vec3 accel = Vec3::Zero();
};

/// Specific force and body rate, with bias and white noise.
ImuMeasurement imu_measure(const KinematicSample& truth, double t, const ImuSpec& spec, Rng& rng);
/// Samples [t0, t1] at spec.rate_hz.
std::vector<ImuMeasurement> imu_stream(const TrajectoryFn& truth, double t0, double t1,
                                       const ImuSpec& spec, std::uint64_t seed);

struct PoseNoiseModel {
  double sigma_pos = 0.0;   // m, per axis
  double sigma_rot = 0.0;   // rad, per axis
  double drift_rate = 0.0;  // m/s along a fixed seeded direction

  bool is_zero() const { return sigma_pos == 0.0 && sigma_rot == 0.0 && drift_rate == 0.0; }
};

/// Stand-in for the LiDAR-inertial estimator output: truth plus white noise
/// plus a linear drift.
class PoseFeed {
 public:
  PoseFeed(const PoseNoiseModel& model, std::uint64_t seed);

  Pose sample(const Pose& truth, double t);
  const Vec3& drift_direction() const { return drift_dir_; }

 private:
  PoseNoiseModel model_;
  Rng rng_;
  Vec3 drift_dir_;
};

}  // namespace explo
