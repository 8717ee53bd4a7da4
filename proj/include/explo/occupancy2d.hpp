#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "explo/geom.hpp"
#include "explo/sensors.hpp"

namespace explo::explore {

enum : std::int8_t { kUnknown = -1, kIdle = 0, kOccupied = 1 };

struct Cell2 {
  int x = 0;
  int y = 0;
  bool operator==(const Cell2&) const = default;
};

/// Cells from a to b inclusive (8-connected Bresenham line).
std::vector<Cell2> bresenham(Cell2 a, Cell2 b);

struct SliceConfig {
  double z_lo = 0.0;
  double z_hi = 2.0;
  /// Returns below the slice (ground hits) still clear the cells their ray
  /// crossed, including their own; they never mark a cell occupied.
  bool carve_below = true;
};

/// Tri-valued exploration map over a rectangular boundary.
class OccupancyGrid2D {
 public:
  OccupancyGrid2D() = default;
  OccupancyGrid2D(Vec2 min, Vec2 max, double resolution, SliceConfig slice = {});

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double resolution() const { return res_; }
  const Vec2& min() const { return min_; }
  Vec2 max() const { return min_ + Vec2(nx_ * res_, ny_ * res_); }
  const SliceConfig& slice() const { return slice_; }
  const std::vector<std::int8_t>& cells() const { return cells_; }

  bool in_bounds(Cell2 c) const { return c.x >= 0 && c.x < nx_ && c.y >= 0 && c.y < ny_; }
  std::int8_t at(Cell2 c) const { return cells_[index(c)]; }
  void set(Cell2 c, std::int8_t v);
  /// Cell containing p, even when outside the boundary.
  Cell2 cell_of(const Vec2& p) const;
  std::optional<Cell2> cell_in_bounds(const Vec2& p) const;
  Vec2 cell_center(Cell2 c) const;
  std::size_t index(Cell2 c) const { return static_cast<std::size_t>(c.y) * nx_ + c.x; }

  std::int64_t unknown_count() const { return unknown_; }
  std::int64_t cell_count() const { return static_cast<std::int64_t>(cells_.size()); }
  double known_fraction() const;

  /// Ray-carves idle space from the robot cell towards every return, then
  /// marks in-slice returns occupied. Occupied cells are never cleared.
  void update(std::span<const Vec3> world_points, const Vec3& robot);
  void update(const PointCloudFrame& world_frame, const Vec3& robot);

  /// P5: unknown 128, idle 255, occupied 0, +y up.
  void write_pgm(const std::string& path) const;

 private:
  Vec2 min_ = Vec2::Zero();
  double res_ = 0.1;
  int nx_ = 0, ny_ = 0;
  SliceConfig slice_;
  std::vector<std::int8_t> cells_;
  std::int64_t unknown_ = 0;
};

}  // namespace explo::explore
