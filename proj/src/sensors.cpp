#include "explo/sensors.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

namespace explo {

namespace {

constexpr double kDeg = M_PI / 180.0;

struct RaySlot {
  bool valid = false;
  LidarPoint point;
};

Vec3 ray_dir(const LidarSpec& spec, int column, int ring) {
  const double az = spec.azimuth(column), el = spec.elevation(ring);
  return Vec3(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
}

/// Fires one azimuth column. `hit` returns the nearest world-frame range.
template <typename HitFn>
void fire_column(const LidarSpec& spec, const SweepPoseFn& pose_at, std::uint64_t seed, int column,
                 HitFn&& hit, RaySlot* out) {
  const double offset = column * spec.period() / spec.n_azimuth;
  const Pose pose = pose_at(offset);
  Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(column));
  for (int ring = 0; ring < spec.n_elevation; ++ring) {
    const Vec3 d_sensor = ray_dir(spec, column, ring);
    const Vec3 d_world = pose.rot * d_sensor;
    // Drawn per ray whether or not it hits, so streams never shift.
    double noise = rng.normal(spec.noise_sigma);
    while (std::abs(noise) > 3.0 * spec.noise_sigma) noise = rng.normal(spec.noise_sigma);
    out[ring].valid = false;
    const std::optional<double> range = hit(pose.trans, d_world, d_sensor);
    if (!range) continue;
    const double r = *range + noise;
    if (r <= 0.0 || r > spec.max_range) continue;
    out[ring].valid = true;
    out[ring].point = LidarPoint{r * d_sensor, offset};
  }
}

PointCloudFrame compact(const std::vector<RaySlot>& slots, const LidarSpec& spec, double timestamp) {
  PointCloudFrame frame;
  frame.timestamp = timestamp;
  frame.period = spec.period();
  for (const auto& s : slots)
    if (s.valid) frame.points.push_back(s.point);
  return frame;
}

}  // namespace

void LidarSpec::validate() const {
  if (!(v_fov_deg > 0.0 && v_fov_deg <= 180.0)) throw std::invalid_argument("lidar v_fov must be in (0, 180]");
  if (n_azimuth < 1 || n_elevation < 1) throw std::invalid_argument("lidar ray counts must be >= 1");
  if (!(max_range > 0.0)) throw std::invalid_argument("lidar max_range must be positive");
  if (!(rate_hz > 0.0)) throw std::invalid_argument("lidar rate must be positive");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("lidar noise sigma must be >= 0");
}

double LidarSpec::elevation(int ring) const {
  if (n_elevation == 1) return 0.0;
  const double half = 0.5 * v_fov_deg * kDeg;
  return -half + 2.0 * half * ring / (n_elevation - 1);
}

double LidarSpec::azimuth(int column) const { return h_fov_deg * kDeg * column / n_azimuth; }

PointCloudFrame lidar_scan(const Scene& scene, const Pose& pose, const LidarSpec& spec,
                           std::uint64_t seed, double timestamp) {
  return lidar_scan(scene, [&pose](double) { return pose; }, spec, seed, timestamp);
}

PointCloudFrame lidar_scan(const Scene& scene, const SweepPoseFn& pose_at, const LidarSpec& spec,
                           std::uint64_t seed, double timestamp) {
  spec.validate();
  std::vector<RaySlot> slots(static_cast<std::size_t>(spec.n_azimuth) * spec.n_elevation);
#pragma omp parallel
  {
    std::vector<int> cands;
#pragma omp for schedule(static)
    for (int col = 0; col < spec.n_azimuth; ++col) {
      bool gathered = false;
      auto hit = [&](const Vec3& o, const Vec3& d, const Vec3&) {
        if (!gathered) {
          // All rings of a column share the horizontal direction.
          scene.collect_candidates(o, d.head<2>(), spec.max_range + 1.0, cands);
          gathered = true;
        }
        return scene.raycast_candidates(cands, o, d, spec.max_range + 1.0);
      };
      fire_column(spec, pose_at, seed, col, hit, &slots[static_cast<std::size_t>(col) * spec.n_elevation]);
    }
  }
  return compact(slots, spec, timestamp);
}

PointCloudFrame lidar_scan_serial(const Scene& scene, const SweepPoseFn& pose_at,
                                  const LidarSpec& spec, std::uint64_t seed, double timestamp) {
  spec.validate();
  std::vector<RaySlot> slots(static_cast<std::size_t>(spec.n_azimuth) * spec.n_elevation);
  const double reach = spec.max_range + 1.0;
  auto brute = [&](const Vec3& o, const Vec3& d, const Vec3&) -> std::optional<double> {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : scene.cylinders())
      if (auto t = intersect(c, o, d); t && *t < best) best = *t;
    for (const auto& b : scene.boxes())
      if (auto t = intersect(b, o, d); t && *t < best) best = *t;
    for (const auto& h : scene.halfspaces())
      if (auto t = intersect(h, o, d); t && *t < best) best = *t;
    if (best > reach) return std::nullopt;
    return best;
  };
  for (int col = 0; col < spec.n_azimuth; ++col) {
    fire_column(spec, pose_at, seed, col, brute, &slots[static_cast<std::size_t>(col) * spec.n_elevation]);
  }
  return compact(slots, spec, timestamp);
}

void ImuSpec::validate() const {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("imu rate must be positive");
  if (!(gravity > 0.0)) throw std::invalid_argument("gravity magnitude must be positive");
}

ImuMeasurement imu_measure(const KinematicSample& truth, double t, const ImuSpec& spec, Rng& rng) {
  const double gyro_sigma = spec.gyro_noise_density * std::sqrt(spec.rate_hz);
  const double accel_sigma = spec.accel_noise_density * std::sqrt(spec.rate_hz);
  ImuMeasurement m;
  m.t = t;
  const Vec3 specific_force = truth.acc + Vec3(0.0, 0.0, spec.gravity);
  m.accel = truth.pose.rot.inverse() * specific_force + spec.bias_accel;
  m.gyro = truth.omega_body + spec.bias_gyro;
  for (int k = 0; k < 3; ++k) m.gyro[k] += rng.normal(gyro_sigma);
  for (int k = 0; k < 3; ++k) m.accel[k] += rng.normal(accel_sigma);
  return m;
}

std::vector<ImuMeasurement> imu_stream(const TrajectoryFn& truth, double t0, double t1,
                                       const ImuSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  std::vector<ImuMeasurement> out;
  const double dt = 1.0 / spec.rate_hz;
  const auto n = static_cast<long>(std::floor((t1 - t0) / dt + 1e-9));
  out.reserve(n + 1);
  for (long i = 0; i <= n; ++i) {
    const double t = t0 + i * dt;
    out.push_back(imu_measure(truth(t), t, spec, rng));
  }
  return out;
}

PoseFeed::PoseFeed(const PoseNoiseModel& model, std::uint64_t seed) : model_(model), rng_(seed) {
  Rng dir_rng = Rng::derive(seed, 0xd21f7);
  Vec3 d(dir_rng.normal(), dir_rng.normal(), dir_rng.normal());
  drift_dir_ = d.norm() > 0.0 ? Vec3(d.normalized()) : Vec3::UnitX();
}

Pose PoseFeed::sample(const Pose& truth, double t) {
  if (model_.is_zero()) return truth;
  Pose out = truth;
  const Vec3 pos_noise(rng_.normal(model_.sigma_pos), rng_.normal(model_.sigma_pos),
                       rng_.normal(model_.sigma_pos));
  const Vec3 rot_noise(rng_.normal(model_.sigma_rot), rng_.normal(model_.sigma_rot),
                       rng_.normal(model_.sigma_rot));
  out.trans += pos_noise + model_.drift_rate * t * drift_dir_;
  out.rot = truth.rot * so3_exp(rot_noise);
  return out;
}

}  // namespace explo
