#include "explo/local_grid.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>

namespace explo::grid {

namespace {

int cells_along(double extent, double size, const char* name) {
  if (!(extent > 0.0) || !(size > 0.0)) throw GridError(std::string(name) + " and cell size must be positive");
  const double n = extent / size;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-9 * std::max(1.0, r))
    throw GridError(std::string(name) + " is not a multiple of the cell size");
  return static_cast<int>(r);
}

/// Index along one axis exactly as the binning formula computes it.
inline int axis_index(double coord, double size, int num) { return static_cast<int>(std::floor(coord / size)) + num / 2; }

constexpr int kMaxLattice = 64;

/// Per-axis cell runs covered by one point's inflation lattice.
struct AxisRuns {
  std::array<int, kMaxLattice> idx[3];
  int count = 0;
  bool contiguous = true;
};

AxisRuns lattice_runs(const Vec3& p, const GridConfig& c, int nw, int nl, int nh, int n_step) {
  AxisRuns r;
  const int nums[3] = {nw, nl, nh};
  if (c.symmetric_inflation) {
    r.count = 2 * n_step + 1;
    for (int k = 0; k < 3; ++k) {
      const int base = axis_index(p[k], c.size, nums[k]);
      for (int a = 0; a < r.count; ++a) r.idx[k][a] = base - n_step + a;
    }
    return r;
  }
  r.count = n_step + 1;
  for (int k = 0; k < 3; ++k) {
    const double start = p[k] - c.inflation;
    for (int a = 0; a < r.count; ++a) {
      r.idx[k][a] = axis_index(start + c.size * a, c.size, nums[k]);
      if (a > 0 && r.idx[k][a] != r.idx[k][0] + a) r.contiguous = false;
    }
  }
  return r;
}

struct CellBox {
  int lo[3];
  int hi[3];  // inclusive
};

}  // namespace

void GridConfig::validate() const {
  cells_along(width, size, "width");
  cells_along(length, size, "length");
  cells_along(height, size, "height");
  if (!(inflation >= 0.0)) throw GridError("inflation must be >= 0");
  if (n_step() + 1 > kMaxLattice / 2) throw GridError("inflation too large for the cell size");
  if (fusion_frames < 1) throw GridError("fusion depth must be >= 1");
}

int GridConfig::num_w() const { return cells_along(width, size, "width"); }
int GridConfig::num_l() const { return cells_along(length, size, "length"); }
int GridConfig::num_h() const { return cells_along(height, size, "height"); }
int GridConfig::n_step() const { return static_cast<int>(std::ceil(inflation / size - 1e-12)); }

std::int64_t array_size(const GridConfig& config) {
  return static_cast<std::int64_t>(config.num_w()) * config.num_l() * config.num_h();
}

std::optional<CellIndex> point_to_indices(const Vec3& p, const GridConfig& config) {
  const int nw = config.num_w(), nl = config.num_l(), nh = config.num_h();
  const CellIndex idx{axis_index(p.x(), config.size, nw), axis_index(p.y(), config.size, nl),
                      axis_index(p.z(), config.size, nh)};
  if (idx.w < 0 || idx.w >= nw || idx.l < 0 || idx.l >= nl || idx.h < 0 || idx.h >= nh) return std::nullopt;
  return idx;
}

std::int64_t indices_to_id(const CellIndex& idx, const GridConfig& config) {
  const std::int64_t nw = config.num_w(), nl = config.num_l(), nh = config.num_h();
  if (idx.w < 0 || idx.w >= nw || idx.l < 0 || idx.l >= nl || idx.h < 0 || idx.h >= nh)
    throw GridError("cell index out of range");
  return idx.h * nw * nl + idx.w * nl + idx.l;
}

CellIndex id_to_indices(std::int64_t id, const GridConfig& config) {
  const std::int64_t nw = config.num_w(), nl = config.num_l();
  if (id < 0 || id >= array_size(config)) throw GridError("cell id out of range");
  const std::int64_t layer = nw * nl;
  const auto h = static_cast<int>(id / layer);
  const std::int64_t rem = id % layer;
  return CellIndex{static_cast<int>(rem / nl), static_cast<int>(rem % nl), h};
}

LocalGridMap::LocalGridMap(GridConfig config, Vec3 center) : config_(config), center_(center) {
  config_.validate();
  nw_ = config_.num_w();
  nl_ = config_.num_l();
  nh_ = config_.num_h();
  cells_.assign(static_cast<std::size_t>(array_size(config_)), 0);
}

CellState LocalGridMap::query(const Vec3& p_local) const {
  const double s = config_.size;
  const int w = axis_index(p_local.x(), s, nw_), l = axis_index(p_local.y(), s, nl_),
            h = axis_index(p_local.z(), s, nh_);
  if (w < 0 || w >= nw_ || l < 0 || l >= nl_ || h < 0 || h >= nh_) return CellState::OutOfBounds;
  const std::int64_t id = (static_cast<std::int64_t>(h) * nw_ + w) * nl_ + l;
  return cells_[static_cast<std::size_t>(id)] ? CellState::Occupied : CellState::Free;
}

Vec3 LocalGridMap::cell_center_world(const CellIndex& idx) const {
  const double s = config_.size;
  return center_ + Vec3((idx.w - config_.num_w() / 2 + 0.5) * s, (idx.l - config_.num_l() / 2 + 0.5) * s,
                        (idx.h - config_.num_h() / 2 + 0.5) * s);
}

std::int64_t LocalGridMap::occupied_count() const {
  return std::count_if(cells_.begin(), cells_.end(), [](std::uint8_t v) { return v != 0; });
}

LocalGridMap rebuild_from_frames(std::span<const PointCloudFrame> frames, const GridConfig& config,
                                 const Vec3& center) {
  LocalGridMap map(config, center);
  const int nw = config.num_w(), nl = config.num_l(), nh = config.num_h();
  const int n_step = config.n_step();
  const int dims[3] = {nw, nl, nh};

  // Dedupe points whose lattices cover the same contiguous box; this is what
  // keeps multi-frame fusion cheap when thousands of returns share cells.
  std::vector<std::uint64_t> keys;
  std::vector<AxisRuns> irregular;
  for (const auto& f : frames) {
    for (const auto& pt : f.points) {
      if (!point_to_indices(pt.p, config)) continue;  // points outside the block are discarded
      const AxisRuns r = lattice_runs(pt.p, config, nw, nl, nh, n_step);
      if (!r.contiguous) {
        irregular.push_back(r);
        continue;
      }
      constexpr int kBias = 1 << 20;
      const auto pack = [](int v) { return static_cast<std::uint64_t>(v + kBias) & 0x1fffffULL; };
      keys.push_back(pack(r.idx[2][0]) << 42 | pack(r.idx[0][0]) << 21 | pack(r.idx[1][0]));
    }
  }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  const int run = config.symmetric_inflation ? 2 * n_step + 1 : n_step + 1;
  std::vector<CellBox> boxes;
  boxes.reserve(keys.size());
  for (std::uint64_t k : keys) {
    constexpr int kBias = 1 << 20;
    const int lo[3] = {static_cast<int>((k >> 21) & 0x1fffff) - kBias, static_cast<int>(k & 0x1fffff) - kBias,
                       static_cast<int>((k >> 42) & 0x1fffff) - kBias};
    CellBox b{};
    bool empty = false;
    for (int a = 0; a < 3; ++a) {
      b.lo[a] = std::max(lo[a], 0);
      b.hi[a] = std::min(lo[a] + run - 1, dims[a] - 1);
      empty |= b.lo[a] > b.hi[a];
    }
    if (!empty) boxes.push_back(b);
  }

  std::uint8_t* cells = map.mutable_cells().data();
  const std::int64_t layer = static_cast<std::int64_t>(nw) * nl;
#pragma omp parallel for schedule(static)
  for (int h = 0; h < nh; ++h) {
    std::uint8_t* slab = cells + h * layer;
    for (const auto& b : boxes) {
      if (h < b.lo[2] || h > b.hi[2]) continue;
      for (int w = b.lo[0]; w <= b.hi[0]; ++w) {
        std::memset(slab + static_cast<std::int64_t>(w) * nl + b.lo[1], 1, b.hi[1] - b.lo[1] + 1);
      }
    }
    for (const auto& r : irregular) {
      for (int c = 0; c < r.count; ++c) {
        if (r.idx[2][c] != h) continue;
        for (int a = 0; a < r.count; ++a) {
          const int w = r.idx[0][a];
          if (w < 0 || w >= nw) continue;
          for (int b = 0; b < r.count; ++b) {
            const int l = r.idx[1][b];
            if (l >= 0 && l < nl) slab[static_cast<std::int64_t>(w) * nl + l] = 1;
          }
        }
      }
    }
  }
  return map;
}

LocalGridMap rebuild_from_frames_serial(std::span<const PointCloudFrame> frames, const GridConfig& config,
                                        const Vec3& center) {
  LocalGridMap map(config, center);
  auto& cells = map.mutable_cells();
  const int n_step = config.n_step();
  const double s = config.size;
  auto mark = [&](const Vec3& q) {
    if (const auto idx = point_to_indices(q, config)) cells[static_cast<std::size_t>(indices_to_id(*idx, config))] = 1;
  };
  for (const auto& f : frames) {
    for (const auto& pt : f.points) {
      const Vec3& p = pt.p;
      if (!point_to_indices(p, config)) continue;
      if (config.symmetric_inflation) {
        const Vec3 cell_lo(std::floor(p.x() / s) * s, std::floor(p.y() / s) * s, std::floor(p.z() / s) * s);
        for (int a = -n_step; a <= n_step; ++a)
          for (int b = -n_step; b <= n_step; ++b)
            for (int c = -n_step; c <= n_step; ++c)
              mark(cell_lo + Vec3((a + 0.5) * s, (b + 0.5) * s, (c + 0.5) * s));
        continue;
      }
      for (int a = 0; a <= n_step; ++a)
        for (int b = 0; b <= n_step; ++b)
          for (int c = 0; c <= n_step; ++c)
            mark(Vec3((p.x() - config.inflation) + s * a, (p.y() - config.inflation) + s * b,
                      (p.z() - config.inflation) + s * c));
    }
  }
  return map;
}

void write_slice_pgm(const LocalGridMap& map, int h, const std::string& path) {
  const auto& c = map.config();
  const int nw = c.num_w(), nl = c.num_l();
  if (h < 0 || h >= c.num_h()) throw GridError("slice layer out of range");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << "P5\n" << nw << " " << nl << "\n255\n";
  std::vector<std::uint8_t> row(nw);
  for (int l = nl - 1; l >= 0; --l) {
    for (int w = 0; w < nw; ++w) row[w] = map.occupied(indices_to_id({w, l, h}, c)) ? 0 : 255;
    out.write(reinterpret_cast<const char*>(row.data()), nw);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace explo::grid
