#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "explo/geom.hpp"
#include "explo/sensors.hpp"

namespace explo::explore {

/// World-frame point cloud with distance-based deduplication: a point is
/// dropped when a retained point lies within `resolution` of it.
class GlobalCloudMap {
 public:
  explicit GlobalCloudMap(double resolution = 0.1);

  double resolution() const { return res_; }
  std::size_t size() const { return points_.size(); }
  const std::vector<Vec3>& points() const { return points_; }

  /// True if the point was retained.
  bool insert(const Vec3& p);

  void write_ply(const std::string& path) const;

 private:
  struct KeyHash {
    std::size_t operator()(const std::array<int, 3>& k) const;
  };
  std::array<int, 3> key(const Vec3& p) const;

  double res_;
  std::vector<Vec3> points_;
  std::unordered_map<std::array<int, 3>, std::vector<std::uint32_t>, KeyHash> voxels_;
};

/// Appends T_world_imu * T_imu_lidar * p for every point of an undistorted frame.
/// Returns the number of points retained.
std::size_t accumulate_global(GlobalCloudMap& map, const PointCloudFrame& frame, const Pose& world_from_imu,
                              const Pose& imu_from_lidar);

/// Header vertex count of an ASCII PLY file; throws on malformed headers.
std::size_t read_ply_vertex_count(const std::string& path);

}  // namespace explo::explore
