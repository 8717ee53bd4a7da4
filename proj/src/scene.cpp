#include "explo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "explo/rng.hpp"

namespace explo {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRayEps = 1e-9;

bool box_overlaps(const Aabb& a, const Vec3& mn, const Vec3& mx) {
  return (mn.array() <= a.max.array()).all() && (mx.array() >= a.min.array()).all();
}

void footprint(const Cylinder& c, Vec2& mn, Vec2& mx) {
  mn = c.center.array() - c.radius;
  mx = c.center.array() + c.radius;
}

}  // namespace

std::optional<double> intersect(const Cylinder& c, const Vec3& o, const Vec3& d) {
  double best = kInf;
  const double ox = o.x() - c.center.x(), oy = o.y() - c.center.y();
  const double a = d.x() * d.x() + d.y() * d.y();
  const double r2 = c.radius * c.radius;
  if (a > 1e-18) {
    const double b = ox * d.x() + oy * d.y();
    const double cc = ox * ox + oy * oy - r2;
    const double disc = b * b - a * cc;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / a, (-b + sq) / a}) {
        if (t <= kRayEps) continue;
        const double z = o.z() + t * d.z();
        if (z >= c.z_min && z <= c.z_max) {
          best = std::min(best, t);
          break;
        }
      }
    }
  }
  if (std::abs(d.z()) > 1e-18) {
    for (double zc : {c.z_min, c.z_max}) {
      const double t = (zc - o.z()) / d.z();
      if (t <= kRayEps || t >= best) continue;
      const double x = ox + t * d.x(), y = oy + t * d.y();
      if (x * x + y * y <= r2) best = t;
    }
  }
  if (best == kInf) return std::nullopt;
  return best;
}

std::optional<double> intersect(const Box& b, const Vec3& o, const Vec3& d) {
  double t0 = -kInf, t1 = kInf;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-18) {
      if (o[k] < b.min[k] || o[k] > b.max[k]) return std::nullopt;
      continue;
    }
    double ta = (b.min[k] - o[k]) / d[k];
    double tb = (b.max[k] - o[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::nullopt;
  }
  if (t0 > kRayEps) return t0;
  if (t1 > kRayEps) return t1;  // origin inside the box
  return std::nullopt;
}

std::optional<double> intersect(const HalfSpace& h, const Vec3& o, const Vec3& d) {
  const double denom = h.normal.dot(d);
  const double s = h.normal.dot(o) - h.offset;
  if (s <= 0.0) return kRayEps;  // inside the solid
  if (denom >= -1e-18) return std::nullopt;
  const double t = -s / denom;
  if (t <= kRayEps) return std::nullopt;
  return t;
}

Scene::Scene(Aabb bounds, std::vector<Cylinder> cylinders, std::vector<Box> boxes,
             std::vector<HalfSpace> halfspaces)
    : bounds_(std::move(bounds)),
      cylinders_(std::move(cylinders)),
      boxes_(std::move(boxes)),
      halfspaces_(std::move(halfspaces)) {
  if (!((bounds_.max.array() > bounds_.min.array()).all())) {
    throw SceneError("scene bounds must have positive extent");
  }
  for (const auto& c : cylinders_) {
    if (!(c.radius > 0.0) || !(c.z_max > c.z_min)) throw SceneError("invalid cylinder");
    Vec2 mn, mx;
    footprint(c, mn, mx);
    if (!box_overlaps(bounds_, Vec3(mn.x(), mn.y(), c.z_min), Vec3(mx.x(), mx.y(), c.z_max))) {
      throw SceneError("cylinder does not intersect scene bounds");
    }
  }
  for (const auto& b : boxes_) {
    if (!((b.max.array() > b.min.array()).all())) throw SceneError("box min must be < max");
    if (!box_overlaps(bounds_, b.min, b.max)) throw SceneError("box does not intersect scene bounds");
  }
  for (auto& h : halfspaces_) {
    const double n = h.normal.norm();
    if (!(n > 0.0)) throw SceneError("half-space normal must be non-zero");
    h.normal /= n;
    h.offset /= n;
    // The support corner minimises normal . x over the bounds.
    Vec3 corner;
    for (int k = 0; k < 3; ++k) corner[k] = h.normal[k] >= 0.0 ? bounds_.min[k] : bounds_.max[k];
    if (h.normal.dot(corner) > h.offset + 1e-12) {
      throw SceneError("half-space does not intersect scene bounds");
    }
  }
  build_buckets();
}

void Scene::build_buckets() {
  Vec2 mn = bounds_.min.head<2>(), mx = bounds_.max.head<2>();
  for (const auto& c : cylinders_) {
    Vec2 a, b;
    footprint(c, a, b);
    mn = mn.cwiseMin(a);
    mx = mx.cwiseMax(b);
  }
  for (const auto& b : boxes_) {
    mn = mn.cwiseMin(b.min.head<2>());
    mx = mx.cwiseMax(b.max.head<2>());
  }
  bucket_origin_ = mn;
  bucket_nx_ = std::max(1, static_cast<int>(std::ceil((mx.x() - mn.x()) / bucket_size_)));
  bucket_ny_ = std::max(1, static_cast<int>(std::ceil((mx.y() - mn.y()) / bucket_size_)));
  buckets_.assign(static_cast<std::size_t>(bucket_nx_) * bucket_ny_, {});

  auto add = [&](int id, const Vec2& a, const Vec2& b) {
    const int x0 = std::clamp(static_cast<int>(std::floor((a.x() - mn.x()) / bucket_size_)), 0, bucket_nx_ - 1);
    const int x1 = std::clamp(static_cast<int>(std::floor((b.x() - mn.x()) / bucket_size_)), 0, bucket_nx_ - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor((a.y() - mn.y()) / bucket_size_)), 0, bucket_ny_ - 1);
    const int y1 = std::clamp(static_cast<int>(std::floor((b.y() - mn.y()) / bucket_size_)), 0, bucket_ny_ - 1);
    for (int iy = y0; iy <= y1; ++iy)
      for (int ix = x0; ix <= x1; ++ix) buckets_[bucket_index(ix, iy)].push_back(id);
  };
  const int nc = static_cast<int>(cylinders_.size());
  for (int i = 0; i < nc; ++i) {
    Vec2 a, b;
    footprint(cylinders_[i], a, b);
    add(i, a, b);
  }
  for (int i = 0; i < static_cast<int>(boxes_.size()); ++i) {
    add(nc + i, boxes_[i].min.head<2>(), boxes_[i].max.head<2>());
  }
}

void Scene::collect_candidates(const Vec3& origin, const Vec2& dir2d, double range,
                               std::vector<int>& out) const {
  out.clear();
  if (buckets_.empty()) return;
  const Vec2 o = (origin.head<2>() - bucket_origin_) / bucket_size_;
  const double len = dir2d.norm();
  if (len < 1e-12) {
    const int ix = static_cast<int>(std::floor(o.x())), iy = static_cast<int>(std::floor(o.y()));
    if (ix >= 0 && iy >= 0 && ix < bucket_nx_ && iy < bucket_ny_) {
      const auto& b = buckets_[bucket_index(ix, iy)];
      out.assign(b.begin(), b.end());
    }
    return;
  }
  const Vec2 d = dir2d / len;
  const double t_end = range / bucket_size_;

  // Clip the ray to the bucket grid [0, nx] x [0, ny].
  double t0 = 0.0, t1 = t_end;
  const double hi[2] = {static_cast<double>(bucket_nx_), static_cast<double>(bucket_ny_)};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < 0.0 || o[k] > hi[k]) return;
      continue;
    }
    double ta = (0.0 - o[k]) / d[k], tb = (hi[k] - o[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1) return;

  const Vec2 p = o + t0 * d;
  int ix = std::clamp(static_cast<int>(std::floor(p.x())), 0, bucket_nx_ - 1);
  int iy = std::clamp(static_cast<int>(std::floor(p.y())), 0, bucket_ny_ - 1);
  const int sx = d.x() > 0 ? 1 : -1, sy = d.y() > 0 ? 1 : -1;
  const double dtx = std::abs(d.x()) < 1e-15 ? kInf : 1.0 / std::abs(d.x());
  const double dty = std::abs(d.y()) < 1e-15 ? kInf : 1.0 / std::abs(d.y());
  double tx = std::abs(d.x()) < 1e-15 ? kInf : ((sx > 0 ? ix + 1 - p.x() : p.x() - ix) * dtx + t0);
  double ty = std::abs(d.y()) < 1e-15 ? kInf : ((sy > 0 ? iy + 1 - p.y() : p.y() - iy) * dty + t0);

  while (true) {
    const auto& b = buckets_[bucket_index(ix, iy)];
    out.insert(out.end(), b.begin(), b.end());
    if (tx < ty) {
      if (tx > t1) break;
      ix += sx;
      tx += dtx;
    } else {
      if (ty > t1) break;
      iy += sy;
      ty += dty;
    }
    if (ix < 0 || iy < 0 || ix >= bucket_nx_ || iy >= bucket_ny_) break;
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

std::optional<double> Scene::raycast_candidates(const std::vector<int>& candidates,
                                                const Vec3& origin, const Vec3& dir,
                                                double max_range) const {
  double best = kInf;
  const int nc = static_cast<int>(cylinders_.size());
  for (int id : candidates) {
    const auto t = id < nc ? intersect(cylinders_[id], origin, dir)
                           : intersect(boxes_[id - nc], origin, dir);
    if (t && *t < best) best = *t;
  }
  for (const auto& h : halfspaces_) {
    const auto t = intersect(h, origin, dir);
    if (t && *t < best) best = *t;
  }
  if (best > max_range) return std::nullopt;
  return best;
}

std::optional<double> Scene::raycast(const Vec3& origin, const Vec3& dir, double max_range) const {
  std::vector<int> cands;
  collect_candidates(origin, dir.head<2>(), max_range, cands);
  return raycast_candidates(cands, origin, dir, max_range);
}

bool Scene::contains(const Vec3& p) const {
  for (const auto& c : cylinders_) {
    if (p.z() >= c.z_min && p.z() <= c.z_max && (p.head<2>() - c.center).squaredNorm() <= c.radius * c.radius)
      return true;
  }
  for (const auto& b : boxes_) {
    if ((p.array() >= b.min.array()).all() && (p.array() <= b.max.array()).all()) return true;
  }
  for (const auto& h : halfspaces_) {
    if (h.normal.dot(p) <= h.offset) return true;
  }
  return false;
}

double Scene::distance_to_surface(const Vec3& p) const {
  double best = kInf;
  for (const auto& c : cylinders_) {
    const double radial = (p.head<2>() - c.center).norm() - c.radius;
    const double vertical = std::max(c.z_min - p.z(), p.z() - c.z_max);
    double sd;
    if (radial > 0.0 && vertical > 0.0) sd = std::hypot(radial, vertical);
    else sd = std::max(radial, vertical);
    best = std::min(best, std::abs(sd));
  }
  for (const auto& b : boxes_) {
    const Vec3 q = (p - 0.5 * (b.min + b.max)).cwiseAbs() - 0.5 * (b.max - b.min);
    const double outside = q.cwiseMax(0.0).norm();
    const double inside = std::min(q.maxCoeff(), 0.0);
    best = std::min(best, std::abs(outside + inside));
  }
  for (const auto& h : halfspaces_) best = std::min(best, std::abs(h.normal.dot(p) - h.offset));
  return best;
}

bool Scene::operator==(const Scene& o) const {
  auto eq_cyl = [](const Cylinder& a, const Cylinder& b) {
    return a.center == b.center && a.radius == b.radius && a.z_min == b.z_min && a.z_max == b.z_max;
  };
  auto eq_box = [](const Box& a, const Box& b) { return a.min == b.min && a.max == b.max; };
  auto eq_hs = [](const HalfSpace& a, const HalfSpace& b) {
    return a.normal == b.normal && a.offset == b.offset;
  };
  return bounds_.min == o.bounds_.min && bounds_.max == o.bounds_.max &&
         std::equal(cylinders_.begin(), cylinders_.end(), o.cylinders_.begin(), o.cylinders_.end(), eq_cyl) &&
         std::equal(boxes_.begin(), boxes_.end(), o.boxes_.begin(), o.boxes_.end(), eq_box) &&
         std::equal(halfspaces_.begin(), halfspaces_.end(), o.halfspaces_.begin(), o.halfspaces_.end(), eq_hs);
}

Scene generate_forest(const ForestParams& p) {
  if (!(p.density > 0.0)) throw SceneError("forest density must be positive");
  if (!(p.radius_min > 0.0) || p.radius_max < p.radius_min) throw SceneError("invalid radius range");
  if (!((p.max.array() > p.min.array()).all())) throw SceneError("invalid forest footprint");

  const double area = (p.max.x() - p.min.x()) * (p.max.y() - p.min.y());
  const int target = static_cast<int>(std::lround(p.density * area));
  Rng rng(p.seed);
  std::vector<Cylinder> trees;
  trees.reserve(target);
  int attempts = 0;
  while (static_cast<int>(trees.size()) < target) {
    if (++attempts > p.max_attempts) {
      throw SceneError("forest density infeasible: placed " + std::to_string(trees.size()) + " of " +
                       std::to_string(target) + " trees");
    }
    Cylinder c;
    c.radius = rng.uniform(p.radius_min, p.radius_max);
    c.center = Vec2(rng.uniform(p.min.x() + c.radius, p.max.x() - c.radius),
                    rng.uniform(p.min.y() + c.radius, p.max.y() - c.radius));
    c.z_min = 0.0;
    c.z_max = p.height;
    if (c.center.norm() < p.start_clearance + c.radius) continue;
    const bool clash = std::any_of(trees.begin(), trees.end(), [&](const Cylinder& t) {
      return (t.center - c.center).norm() <= t.radius + c.radius + p.min_gap;
    });
    if (!clash) trees.push_back(c);
  }
  Aabb bounds{Vec3(p.min.x(), p.min.y(), 0.0), Vec3(p.max.x(), p.max.y(), p.height)};
  return Scene(bounds, std::move(trees), {}, {HalfSpace{Vec3::UnitZ(), 0.0}});
}

Scene generate_garage(const GarageParams& p) {
  if (!(p.pillar_pitch > 0.0) || !(p.wall_thickness > 0.0) || !(p.pillar_size > 0.0))
    throw SceneError("invalid garage parameters");
  if (!((p.max.array() > p.min.array()).all())) throw SceneError("invalid garage footprint");
  const double t = p.wall_thickness, h = p.height;
  const Vec2 &mn = p.min, &mx = p.max;
  std::vector<Box> boxes;
  boxes.push_back({Vec3(mn.x(), mn.y(), 0.0), Vec3(mx.x(), mn.y() + t, h)});
  boxes.push_back({Vec3(mn.x(), mx.y() - t, 0.0), Vec3(mx.x(), mx.y(), h)});
  boxes.push_back({Vec3(mn.x(), mn.y(), 0.0), Vec3(mn.x() + t, mx.y(), h)});
  boxes.push_back({Vec3(mx.x() - t, mn.y(), 0.0), Vec3(mx.x(), mx.y(), h)});

  // Interior lattice lines at min + k * pitch strictly inside the footprint.
  std::vector<Box> pillars;
  const double half = 0.5 * p.pillar_size;
  for (int i = 1; mn.x() + i * p.pillar_pitch < mx.x(); ++i) {
    for (int j = 1; mn.y() + j * p.pillar_pitch < mx.y(); ++j) {
      const Vec2 c(mn.x() + i * p.pillar_pitch, mn.y() + j * p.pillar_pitch);
      if (c.x() - half < mn.x() + t || c.x() + half > mx.x() - t || c.y() - half < mn.y() + t ||
          c.y() + half > mx.y() - t)
        continue;
      pillars.push_back({Vec3(c.x() - half, c.y() - half, 0.0), Vec3(c.x() + half, c.y() + half, h)});
    }
  }
  boxes.insert(boxes.end(), pillars.begin(), pillars.end());

  Rng rng(p.seed);
  const Vec2 car(4.5, 1.8);
  int placed = 0, attempts = 0;
  while (placed < p.parked_cars) {
    if (++attempts > p.max_attempts) throw SceneError("could not place parked cars");
    const bool along_x = rng.uniform() < 0.5;
    const Vec2 size = along_x ? car : Vec2(car.y(), car.x());
    const Vec2 c(rng.uniform(mn.x() + t + 1.0 + size.x() / 2, mx.x() - t - 1.0 - size.x() / 2),
                 rng.uniform(mn.y() + t + 1.0 + size.y() / 2, mx.y() - t - 1.0 - size.y() / 2));
    const Box b{Vec3(c.x() - size.x() / 2, c.y() - size.y() / 2, 0.0),
                Vec3(c.x() + size.x() / 2, c.y() + size.y() / 2, 1.5)};
    // Keep the start area and a 1.5 m corridor around every existing obstacle free.
    const Vec2 nearest = Vec2::Zero().cwiseMax(b.min.head<2>()).cwiseMin(b.max.head<2>());
    if (nearest.norm() < p.start_clearance) continue;
    const bool clash = std::any_of(boxes.begin() + 4, boxes.end(), [&](const Box& o) {
      return (b.min.head<2>().array() - 1.5 < o.max.head<2>().array()).all() &&
             (b.max.head<2>().array() + 1.5 > o.min.head<2>().array()).all();
    });
    if (clash) continue;
    boxes.push_back(b);
    ++placed;
  }

  Aabb bounds{Vec3(mn.x(), mn.y(), 0.0), Vec3(mx.x(), mx.y(), h)};
  return Scene(bounds, {}, std::move(boxes),
               {HalfSpace{Vec3::UnitZ(), 0.0}, HalfSpace{-Vec3::UnitZ(), -h}});
}

Scene generate_open(const Vec2& min, const Vec2& max, double height) {
  Aabb bounds{Vec3(min.x(), min.y(), 0.0), Vec3(max.x(), max.y(), height)};
  return Scene(bounds, {}, {}, {HalfSpace{Vec3::UnitZ(), 0.0}});
}

}  // namespace explo
