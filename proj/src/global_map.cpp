#include "explo/global_map.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace explo::explore {

GlobalCloudMap::GlobalCloudMap(double resolution) : res_(resolution) {
  if (!(resolution > 0.0)) throw std::invalid_argument("map resolution must be positive");
}

std::size_t GlobalCloudMap::KeyHash::operator()(const std::array<int, 3>& k) const {
  std::uint64_t h = static_cast<std::uint32_t>(k[0]);
  h = h * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint32_t>(k[1]);
  h = h * 0x9e3779b97f4a7c15ULL ^ static_cast<std::uint32_t>(k[2]);
  return static_cast<std::size_t>(h ^ (h >> 29));
}

std::array<int, 3> GlobalCloudMap::key(const Vec3& p) const {
  return {static_cast<int>(std::floor(p.x() / res_)), static_cast<int>(std::floor(p.y() / res_)),
          static_cast<int>(std::floor(p.z() / res_))};
}

bool GlobalCloudMap::insert(const Vec3& p) {
  if (!p.allFinite()) return false;
  const auto k = key(p);
  const double r2 = res_ * res_;
  for (int dx = -1; dx <= 1; ++dx)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dz = -1; dz <= 1; ++dz) {
        const auto it = voxels_.find({k[0] + dx, k[1] + dy, k[2] + dz});
        if (it == voxels_.end()) continue;
        for (auto i : it->second)
          if ((points_[i] - p).squaredNorm() < r2) return false;
      }
  voxels_[k].push_back(static_cast<std::uint32_t>(points_.size()));
  points_.push_back(p);
  return true;
}

void GlobalCloudMap::write_ply(const std::string& path) const {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path);
  std::fprintf(f, "ply\nformat ascii 1.0\nelement vertex %zu\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
               points_.size());
  for (const auto& p : points_) std::fprintf(f, "%.4f %.4f %.4f\n", p.x(), p.y(), p.z());
  if (std::fclose(f) != 0) throw std::runtime_error("write failed: " + path);
}

std::size_t accumulate_global(GlobalCloudMap& map, const PointCloudFrame& frame, const Pose& world_from_imu,
                              const Pose& imu_from_lidar) {
  const Pose world_from_lidar = pose_compose(world_from_imu, imu_from_lidar);
  std::size_t kept = 0;
  for (const auto& pt : frame.points) kept += map.insert(pose_apply(world_from_lidar, pt.p));
  return kept;
}

std::size_t read_ply_vertex_count(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line != "ply") throw std::runtime_error(path + ": not a PLY file");
  while (std::getline(in, line)) {
    if (line == "end_header") break;
    std::istringstream ss(line);
    std::string a, b;
    std::size_t n = 0;
    if (ss >> a >> b >> n && a == "element" && b == "vertex") return n;
  }
  throw std::runtime_error(path + ": no vertex element");
}

}  // namespace explo::explore
