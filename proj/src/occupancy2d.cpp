#include "explo/occupancy2d.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <tuple>

namespace explo::explore {

std::vector<Cell2> bresenham(Cell2 a, Cell2 b) {
  std::vector<Cell2> out;
  const int dx = std::abs(b.x - a.x), dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1, sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  Cell2 c = a;
  out.reserve(std::max(dx, -dy) + 1);
  while (true) {
    out.push_back(c);
    if (c == b) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      c.x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      c.y += sy;
    }
  }
  return out;
}

OccupancyGrid2D::OccupancyGrid2D(Vec2 min, Vec2 max, double resolution, SliceConfig slice)
    : min_(min), res_(resolution), slice_(slice) {
  if (!(resolution > 0.0)) throw std::invalid_argument("grid resolution must be positive");
  if (!((max - min).array() > 0.0).all()) throw std::invalid_argument("grid bounds are empty");
  if (!(slice.z_hi > slice.z_lo)) throw std::invalid_argument("height slice is empty");
  nx_ = static_cast<int>(std::ceil((max.x() - min.x()) / res_ - 1e-9));
  ny_ = static_cast<int>(std::ceil((max.y() - min.y()) / res_ - 1e-9));
  cells_.assign(static_cast<std::size_t>(nx_) * ny_, kUnknown);
  unknown_ = static_cast<std::int64_t>(cells_.size());
}

void OccupancyGrid2D::set(Cell2 c, std::int8_t v) {
  auto& cell = cells_[index(c)];
  if (cell == kUnknown && v != kUnknown) --unknown_;
  if (cell != kUnknown && v == kUnknown) ++unknown_;
  cell = v;
}

Cell2 OccupancyGrid2D::cell_of(const Vec2& p) const {
  return Cell2{static_cast<int>(std::floor((p.x() - min_.x()) / res_)),
               static_cast<int>(std::floor((p.y() - min_.y()) / res_))};
}

std::optional<Cell2> OccupancyGrid2D::cell_in_bounds(const Vec2& p) const {
  const Cell2 c = cell_of(p);
  if (!in_bounds(c)) return std::nullopt;
  return c;
}

Vec2 OccupancyGrid2D::cell_center(Cell2 c) const {
  return min_ + Vec2((c.x + 0.5) * res_, (c.y + 0.5) * res_);
}

double OccupancyGrid2D::known_fraction() const {
  if (cells_.empty()) return 1.0;
  return 1.0 - static_cast<double>(unknown_) / static_cast<double>(cells_.size());
}

void OccupancyGrid2D::update(std::span<const Vec3> world_points, const Vec3& robot) {
  const Cell2 origin = cell_of(robot.head<2>());
  std::vector<Cell2> hits;
  std::vector<std::pair<Cell2, bool>> ends;  // end cell, end cell itself is free
  ends.reserve(world_points.size());
  for (const auto& p : world_points) {
    if (p.z() > slice_.z_hi) continue;
    const bool below = p.z() < slice_.z_lo;
    if (below && !slice_.carve_below) continue;
    const Cell2 c = cell_of(p.head<2>());
    ends.push_back({c, below});
    if (!below && in_bounds(c)) hits.push_back(c);
  }
  // Many returns share an end cell; carve each ray once.
  auto key = [&](const std::pair<Cell2, bool>& e) {
    return std::tuple(e.first.y, e.first.x, e.second);
  };
  std::sort(ends.begin(), ends.end(), [&](const auto& a, const auto& b) { return key(a) < key(b); });
  ends.erase(std::unique(ends.begin(), ends.end()), ends.end());

  for (const auto& [end, end_free] : ends) {
    const auto ray = bresenham(origin, end);
    const std::size_t n = end_free ? ray.size() : ray.size() - 1;
    bool entered = false;
    for (std::size_t i = 0; i < n; ++i) {
      const Cell2 c = ray[i];
      if (!in_bounds(c)) {
        if (entered) break;
        continue;
      }
      entered = true;
      if (at(c) == kUnknown) set(c, kIdle);
    }
  }
  for (const auto& c : hits) set(c, kOccupied);
}

void OccupancyGrid2D::update(const PointCloudFrame& world_frame, const Vec3& robot) {
  std::vector<Vec3> pts;
  pts.reserve(world_frame.points.size());
  for (const auto& p : world_frame.points) pts.push_back(p.p);
  update(pts, robot);
}

void OccupancyGrid2D::write_pgm(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P5\n" << nx_ << " " << ny_ << "\n255\n";
  std::vector<std::uint8_t> row(nx_);
  for (int y = ny_ - 1; y >= 0; --y) {
    for (int x = 0; x < nx_; ++x) {
      const auto v = at({x, y});
      row[x] = v == kUnknown ? 128 : (v == kIdle ? 255 : 0);
    }
    out.write(reinterpret_cast<const char*>(row.data()), nx_);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace explo::explore
