#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "explo/geom.hpp"

namespace explo {

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 extent() const { return max - min; }
};

/// Vertical cylinder (tree trunk).
struct Cylinder {
  Vec2 center = Vec2::Zero();
  double radius = 0.0;
  double z_min = 0.0;
  double z_max = 0.0;
};

struct Box {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();
};

/// Solid region {x : normal . x <= offset}; normal is unit and points out of the solid.
struct HalfSpace {
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;
};

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Immutable set of analytic obstacles. Cylinders and boxes are bucketed in a
/// coarse 2D grid so a LiDAR column only tests primitives near its ray.
class Scene {
 public:
  Scene() = default;
  /// Validates primitives against `bounds` and builds the bucket grid.
  Scene(Aabb bounds, std::vector<Cylinder> cylinders, std::vector<Box> boxes,
        std::vector<HalfSpace> halfspaces);

  const Aabb& bounds() const { return bounds_; }
  const std::vector<Cylinder>& cylinders() const { return cylinders_; }
  const std::vector<Box>& boxes() const { return boxes_; }
  const std::vector<HalfSpace>& halfspaces() const { return halfspaces_; }
  bool empty() const { return cylinders_.empty() && boxes_.empty() && halfspaces_.empty(); }

  /// Nearest hit distance along unit `dir` in (0, max_range], if any.
  std::optional<double> raycast(const Vec3& origin, const Vec3& dir, double max_range) const;

  /// Indices (cylinders first, then boxes offset by cylinder count) of the
  /// solids registered in buckets crossed by the horizontal ray. Sorted, unique.
  void collect_candidates(const Vec3& origin, const Vec2& dir2d, double range,
                          std::vector<int>& out) const;
  std::optional<double> raycast_candidates(const std::vector<int>& candidates, const Vec3& origin,
                                           const Vec3& dir, double max_range) const;

  bool contains(const Vec3& p) const;
  /// Smallest |distance| from p to any primitive surface.
  double distance_to_surface(const Vec3& p) const;
  bool operator==(const Scene& other) const;

 private:
  void build_buckets();
  int bucket_index(int ix, int iy) const { return iy * bucket_nx_ + ix; }

  Aabb bounds_;
  std::vector<Cylinder> cylinders_;
  std::vector<Box> boxes_;
  std::vector<HalfSpace> halfspaces_;

  double bucket_size_ = 2.0;
  Vec2 bucket_origin_ = Vec2::Zero();
  int bucket_nx_ = 0;
  int bucket_ny_ = 0;
  std::vector<std::vector<int>> buckets_;
};

std::optional<double> intersect(const Cylinder& c, const Vec3& o, const Vec3& d);
std::optional<double> intersect(const Box& b, const Vec3& o, const Vec3& d);
std::optional<double> intersect(const HalfSpace& h, const Vec3& o, const Vec3& d);

struct ForestParams {
  std::uint64_t seed = 1;
  Vec2 min = Vec2(-25.0, -20.0);
  Vec2 max = Vec2(25.0, 20.0);
  double height = 8.0;
  double density = 0.02;  // trees per m^2
  double radius_min = 0.15;
  double radius_max = 0.4;
  double min_gap = 1.6;          // free space between neighbouring trunk surfaces, m
  double start_clearance = 2.5;  // no trunk closer than this to the origin, m
  int max_attempts = 20000;
};

struct GarageParams {
  std::uint64_t seed = 1;
  Vec2 min = Vec2(-20.0, -10.0);
  Vec2 max = Vec2(20.0, 10.0);
  double height = 3.0;
  double pillar_pitch = 8.0;
  double pillar_size = 0.6;
  double wall_thickness = 0.3;
  int parked_cars = 4;
  double start_clearance = 3.0;
  int max_attempts = 2000;
};

Scene generate_forest(const ForestParams& p);
Scene generate_garage(const GarageParams& p);
/// Ground plane only, inside the given footprint.
Scene generate_open(const Vec2& min, const Vec2& max, double height);

}  // namespace explo
