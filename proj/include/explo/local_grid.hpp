#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "explo/geom.hpp"
#include "explo/sensors.hpp"

namespace explo::grid {

class GridError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Robot-centred occupancy block. Index axes follow the map's layout:
/// w along x (num_w = width / size), l along y (num_l = length / size),
/// h along z (num_h = height / size).
struct GridConfig {
  double length = 30.0;  // y extent, m
  double width = 30.0;   // x extent, m
  double height = 3.0;   // z extent, m
  double size = 0.1;     // cell edge, m
  double inflation = 0.5;
  /// false: offset lattice [P - inflation, P - inflation + n_step * size];
  /// true: +-n_step cells around the point's own cell.
  bool symmetric_inflation = false;
  int fusion_frames = 5;

  /// Throws GridError unless all extents are positive multiples of `size`.
  void validate() const;
  int num_w() const;
  int num_l() const;
  int num_h() const;
  int n_step() const;
};

struct CellIndex {
  int w = 0;
  int l = 0;
  int h = 0;
  bool operator==(const CellIndex&) const = default;
};

/// L * W * H / size^3.
std::int64_t array_size(const GridConfig& config);
/// Floor binning around the centre; nullopt when outside the block.
std::optional<CellIndex> point_to_indices(const Vec3& p, const GridConfig& config);
/// h * num_w * num_l + w * num_l + l.
std::int64_t indices_to_id(const CellIndex& idx, const GridConfig& config);
CellIndex id_to_indices(std::int64_t id, const GridConfig& config);

enum class CellState : std::uint8_t { Free, Occupied, OutOfBounds };

/// Flat-array occupancy block (0 free, 1 occupied). Immutable once built;
/// the planner holds a snapshot between rebuilds.
class LocalGridMap {
 public:
  LocalGridMap() = default;
  LocalGridMap(GridConfig config, Vec3 center);

  const GridConfig& config() const { return config_; }
  const Vec3& center() const { return center_; }
  const std::vector<std::uint8_t>& cells() const { return cells_; }
  std::vector<std::uint8_t>& mutable_cells() { return cells_; }
  std::int64_t size() const { return static_cast<std::int64_t>(cells_.size()); }

  bool occupied(std::int64_t id) const { return cells_.at(static_cast<std::size_t>(id)) != 0; }
  /// Point in the robot-centred map frame.
  CellState query(const Vec3& p_local) const;
  CellState query_world(const Vec3& p_world) const { return query(p_world - center_); }
  /// Planner view: out-of-map counts as free.
  bool is_occupied(const Vec3& p_world) const { return query_world(p_world) == CellState::Occupied; }
  bool is_occupied(std::int64_t id) const { return occupied(id); }

  Vec3 cell_center_world(const CellIndex& idx) const;
  std::optional<CellIndex> world_to_indices(const Vec3& p_world) const {
    return point_to_indices(p_world - center_, config_);
  }
  std::int64_t occupied_count() const;

 private:
  GridConfig config_;
  Vec3 center_ = Vec3::Zero();
  int nw_ = 0, nl_ = 0, nh_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Zero the block, then mark every in-bounds point of every frame plus its
/// inflation lattice. Frames must already be expressed in the map frame
/// (centre at `center`, world-aligned axes). Parallel over z layers.
LocalGridMap rebuild_from_frames(std::span<const PointCloudFrame> frames, const GridConfig& config,
                                 const Vec3& center = Vec3::Zero());
/// Reference kernel: enumerate every lattice point of every input point.
LocalGridMap rebuild_from_frames_serial(std::span<const PointCloudFrame> frames, const GridConfig& config,
                                        const Vec3& center = Vec3::Zero());

/// Binary PGM (P5) of layer h: white free, black occupied, +y up.
void write_slice_pgm(const LocalGridMap& map, int h, const std::string& path);

}  // namespace explo::grid
