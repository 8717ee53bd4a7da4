#include <cmath>
#include <functional>

#include "doctest.h"
#include "explo/bspline.hpp"
#include "explo/local_grid.hpp"
#include "explo/rng.hpp"
#include "explo/scene.hpp"
#include "explo/trajopt.hpp"

using namespace explo;
using namespace explo::traj;

namespace {

Vec3 rvec(Rng& rng, double s) { return Vec3(rng.uniform(-s, s), rng.uniform(-s, s), rng.uniform(-s, s)); }

UniformBspline random_spline(Rng& rng, int n, double dt) {
  std::vector<Vec3> q;
  Vec3 p = rvec(rng, 1.0);
  for (int i = 0; i < n; ++i) {
    q.push_back(p);
    p += Vec3(0.8, 0, 0) + rvec(rng, 0.6);
  }
  return UniformBspline(q, dt);
}

/// Central differences of f over every control-point coordinate.
std::vector<Vec3> fd_gradient(const UniformBspline& s, const std::function<double(const UniformBspline&)>& f,
                              double h = 1e-6) {
  std::vector<Vec3> g(s.size(), Vec3::Zero());
  for (int i = 0; i < s.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      UniformBspline a = s, b = s;
      a.mutable_control_points()[i][k] += h;
      b.mutable_control_points()[i][k] -= h;
      g[i][k] = (f(a) - f(b)) / (2 * h);
    }
  return g;
}

double rel_error(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]).squaredNorm();
    den += b[i].squaredNorm();
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-6);
}

/// Occupancy map of a scene: every cell centre inside a solid becomes a point.
grid::LocalGridMap rasterize(const Scene& scene, const grid::GridConfig& cfg, const Vec3& center) {
  PointCloudFrame f;
  const grid::LocalGridMap blank(cfg, center);
  for (int h = 0; h < cfg.num_h(); ++h)
    for (int w = 0; w < cfg.num_w(); ++w)
      for (int l = 0; l < cfg.num_l(); ++l) {
        const Vec3 c = blank.cell_center_world({w, l, h});
        if (scene.contains(c)) f.points.push_back({c - center, 0.0});
      }
  const std::vector<PointCloudFrame> frames{f};
  return grid::rebuild_from_frames(frames, cfg, center);
}

}  // namespace

TEST_CASE("init_spline spacing and clamped ends") {
  const auto s = init_spline(Vec3::Zero(), Vec3(3, 0, 0), 4, 1.0);
  REQUIRE(s.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK((s.control_points()[i] - Vec3(i, 0, 0)).norm() < 1e-15);
  CHECK((s.position(0.0) - Vec3::Zero()).norm() < 1e-9);
  CHECK((s.position(s.duration()) - Vec3(3, 0, 0)).norm() < 1e-9);
  const auto d = spline_derivatives(init_spline(Vec3(1, 2, 3), Vec3(4, -2, 5), 9, 0.3));
  for (const auto& a : d.acc) CHECK(a.norm() < 1e-12);
  for (const auto& j : d.jerk) CHECK(j.norm() < 1e-9);
  const auto hover = init_spline(Vec3(1, 1, 1), Vec3(1, 1, 1), 5, 0.5);
  for (const auto& q : hover.control_points()) CHECK(q == Vec3(1, 1, 1));
  CHECK_THROWS(init_spline(Vec3::Zero(), Vec3::UnitX(), 3, 1.0));
  CHECK_THROWS(UniformBspline(std::vector<Vec3>(4, Vec3::Zero()), 0.0));
}

TEST_CASE("control-point derivatives") {
  const UniformBspline two({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0), Vec3(3, 0, 0)}, 0.5);
  CHECK((spline_derivatives(two).vel[0] - Vec3(2, 0, 0)).norm() < 1e-15);
  std::vector<Vec3> q;
  for (int i = 0; i < 7; ++i) q.push_back(Vec3(i * i, 0, 0));
  const auto d = spline_derivatives(UniformBspline(q, 1.0));
  CHECK(d.vel.size() == 6);
  CHECK(d.acc.size() == 5);
  CHECK(d.jerk.size() == 4);
  for (const auto& a : d.acc) CHECK((a - Vec3(2, 0, 0)).norm() < 1e-12);
}

TEST_CASE("curve samples stay in the control-point hull") {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_spline(rng, 8, 0.4);
    // Per segment: each sample is a convex combination of four consecutive
    // (padded) control points, so it lies in their bounding box.
    Eigen::Vector3d lo = s.control_points()[0], hi = lo;
    for (const auto& q : s.control_points()) {
      lo = lo.cwiseMin(q);
      hi = hi.cwiseMax(q);
    }
    for (const auto& p : s.sample(200)) {
      CHECK((p.array() >= lo.array() - 1e-9).all());
      CHECK((p.array() <= hi.array() + 1e-9).all());
    }
  }
}

TEST_CASE("velocity at the start is set by the first two control points") {
  const UniformBspline s({Vec3(0, 0, 0), Vec3(0.5, 0.2, 0), Vec3(1.5, 0, 0), Vec3(2, 1, 0), Vec3(3, 1, 0)}, 0.25);
  CHECK((s.velocity(0.0) - Vec3(0.5, 0.2, 0) / 0.25).norm() < 1e-12);
  const double h = 1e-6;
  const Vec3 fd = (s.position(0.5 + h) - s.position(0.5 - h)) / (2 * h);
  CHECK((s.velocity(0.5) - fd).norm() < 1e-6);
  const Vec3 fda = (s.velocity(0.6 + h) - s.velocity(0.6 - h)) / (2 * h);
  CHECK((s.acceleration(0.6) - fda).norm() < 1e-5);
}

TEST_CASE("smoothness cost: straight line and single kink") {
  CHECK(smoothness_cost(init_spline(Vec3::Zero(), Vec3(4, 0, 0), 5, 1.0)).value == 0.0);
  const UniformBspline kink({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0.1, 0), Vec3(3, 0, 0), Vec3(4, 0, 0)}, 1.0);
  // A = (0,.1), (0,-.2), (0,.1); J = (0,-.3), (0,.3).
  CHECK(smoothness_cost(kink).value == doctest::Approx(0.01 + 0.04 + 0.01 + 0.09 + 0.09).epsilon(1e-12));
}

TEST_CASE("collision penalty values and junctions") {
  CHECK(collision_penalty(-0.2, 0.5) == 0.0);
  CHECK(collision_penalty(0.5, 0.5) == doctest::Approx(0.125));
  CHECK(collision_penalty(0.8, 0.5) == doctest::Approx(0.485).epsilon(1e-12));
  for (double sf : {0.2, 0.3, 0.5}) {
    for (double c : {0.0, sf}) {
      const double e = 1e-9;
      CHECK(std::abs(collision_penalty(c + e, sf) - collision_penalty(c - e, sf)) < 1e-8);
      const double h = 1e-5;
      const double left = (collision_penalty(c, sf) - collision_penalty(c - h, sf)) / h;
      const double right = (collision_penalty(c + h, sf) - collision_penalty(c, sf)) / h;
      CHECK(std::abs(left - right) < 1e-4);
      CHECK(std::abs(collision_penalty_derivative(c - 1e-12, sf) - collision_penalty_derivative(c + 1e-12, sf)) < 1e-8);
    }
  }
}

TEST_CASE("feasibility penalty values and junctions") {
  const FeasibilityPenalty f(2.0, 0.9, 2.5);
  CHECK(f.value(2.0) == doctest::Approx(0.008).epsilon(1e-12));
  CHECK(f.value(-2.0) == doctest::Approx(0.008).epsilon(1e-12));
  CHECK(f.value(1.8) == 0.0);
  CHECK(f.value(0.0) == 0.0);
  CHECK(f.value(-1.7) == 0.0);
  // Tails: value, slope and curvature of the cubic at +-c_j.
  const double e = 2.5 - 1.8;
  CHECK(f.a2() * 2.5 * 2.5 + f.b2() * 2.5 + f.c2() == doctest::Approx(e * e * e).epsilon(1e-12));
  CHECK(2 * f.a2() * 2.5 + f.b2() == doctest::Approx(3 * e * e).epsilon(1e-12));
  CHECK(2 * f.a2() == doctest::Approx(6 * e).epsilon(1e-12));
  CHECK(f.a1() * 2.5 * 2.5 - f.b1() * 2.5 + f.c1() == doctest::Approx(e * e * e).epsilon(1e-12));
  for (double c : {-2.5, -1.8, 1.8, 2.5}) {
    CHECK(std::abs(f.value(c + 1e-10) - f.value(c - 1e-10)) < 1e-8);
    CHECK(std::abs(f.derivative(c + 1e-12) - f.derivative(c - 1e-12)) < 1e-8);
  }
  CHECK(f.value(4.0) > f.value(3.0));
  CHECK(f.value(-4.0) == doctest::Approx(f.value(4.0)));
  CHECK_THROWS_AS(FeasibilityPenalty(2.0, 0.9, 1.5), std::invalid_argument);
  CostWeights w;
  w.limit_ratio = 0.9995;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}

TEST_CASE("feasibility cost vanishes inside the dead zone") {
  CostWeights w;
  CHECK(feasibility_cost(init_spline(Vec3::Zero(), Vec3(3, 0, 0), 8, 1.0), w).value == 0.0);
  CHECK(feasibility_cost(init_spline(Vec3::Zero(), Vec3(30, 0, 0), 8, 1.0), w).value > 0.0);
}

TEST_CASE("analytic gradients match central differences") {
  Rng rng(42);
  CostWeights w;
  w.v_max = 1.0;
  w.a_max = 1.0;
  w.j_max = 1.5;
  for (int trial = 0; trial < 100; ++trial) {
    const auto s = random_spline(rng, 8, rng.uniform(0.3, 0.8));
    std::vector<AnchorPair> anchors;
    for (int i = 1; i < s.size() - 1; i += 2) {
      const Vec3 v = rvec(rng, 1.0).normalized();
      anchors.push_back({i, s.control_points()[i] - v * rng.uniform(-0.6, 0.4), v});
    }
    auto check = [&](const CostTerm& t, const std::function<double(const UniformBspline&)>& f) {
      CHECK(rel_error(t.gradient, fd_gradient(s, f)) <= 1e-4);
    };
    check(smoothness_cost(s), [](const UniformBspline& x) { return smoothness_cost(x).value; });
    check(collision_cost(s, anchors, w), [&](const UniformBspline& x) { return collision_cost(x, anchors, w).value; });
    check(feasibility_cost(s, w), [&](const UniformBspline& x) { return feasibility_cost(x, w).value; });
    check(total_cost(s, anchors, w), [&](const UniformBspline& x) { return total_cost(x, anchors, w).value; });
  }
}

TEST_CASE("anchor on a synthetic wall") {
  grid::GridConfig cfg{6.0, 6.0, 2.0, 0.1, 0.0};
  PointCloudFrame wall;
  for (double x = -1.0 + 0.05; x < 0.0; x += 0.1)
    for (double y = -2.95; y < 3.0; y += 0.1)
      for (double z = -0.95; z < 1.0; z += 0.1) wall.points.push_back({Vec3(x, y, z), 0.0});
  const std::vector<PointCloudFrame> frames{wall};
  const auto map = grid::rebuild_from_frames(frames, cfg);

  CHECK_FALSE(find_anchor(Vec3(0.5, 0, 0), map, Vec3(1, 0, 0)).has_value());

  const Vec3 q(-0.3, 0.05, 0.05);
  const auto a = find_anchor(q, map, Vec3(1.0, 0.05, 0.05));
  REQUIRE(a);
  CHECK((a->direction - Vec3(1, 0, 0)).norm() < 1e-12);
  CHECK(a->distance(q) == doctest::Approx(-0.3).epsilon(1e-9));

  const Vec3 edge(-0.05, 0.05, 0.05);
  const auto b = find_anchor(edge, map, Vec3(1.0, 0.05, 0.05));
  REQUIRE(b);
  CHECK(b->distance(edge) >= -cfg.size - 1e-12);
  CHECK(b->distance(edge) <= 0.0);

  // No guide: the BFS fallback still finds the near face.
  const auto c = find_anchor(Vec3(-0.15, 0.05, 0.05), map, Vec3(-0.15, 0.05, 0.05));
  REQUIRE(c);
  CHECK(c->direction.x() > 0.9);

  // Planar search never leaves the layer.
  const auto d = find_anchor(Vec3(-0.35, 0.05, 0.05), map, Vec3(-0.35, 0.05, 3.0), 0, 3.0, true);
  REQUIRE(d);
  CHECK(d->direction.z() == 0.0);
}

TEST_CASE("anchor failure is a planning error") {
  grid::GridConfig cfg{4.0, 4.0, 2.0, 0.1, 0.0};
  grid::LocalGridMap full(cfg, Vec3::Zero());
  for (auto& c : full.mutable_cells()) c = 1;
  CHECK_THROWS_AS(find_anchor(Vec3::Zero(), full, Vec3(1, 0, 0), 0, 0.5), PlanningError);
}

TEST_CASE("grid A* avoids a wall") {
  grid::GridConfig cfg{6.0, 6.0, 1.0, 0.1, 0.0};
  const Scene scene(Aabb{Vec3(-3, -3, -1), Vec3(3, 3, 1)}, {}, {Box{Vec3(-0.2, -3, -1), Vec3(0.2, 1.5, 1)}}, {});
  const auto map = rasterize(scene, cfg, Vec3::Zero());
  const auto path = astar_path(map, Vec3(-1.5, 0, 0), Vec3(1.5, 0, 0));
  REQUIRE(path.size() >= 2);
  CHECK((path.front() - Vec3(-1.5, 0, 0)).norm() < 1e-12);
  CHECK((path.back() - Vec3(1.5, 0, 0)).norm() < 1e-12);
  for (const auto& p : path) CHECK_FALSE(map.is_occupied(p));
  double ymax = -10;
  for (const auto& p : path) ymax = std::max(ymax, p.y());
  CHECK(ymax > 1.5);
}

TEST_CASE("optimize: free space is a fixed point") {
  grid::GridConfig cfg{10.0, 10.0, 2.0, 0.1, 0.5};
  const grid::LocalGridMap empty(cfg, Vec3::Zero());
  const auto s = init_spline(Vec3(-2, 0, 0), Vec3(2, 0, 0), 9, 0.5);
  const auto r = optimize(s, empty, CostWeights{});
  CHECK(r.converged);
  for (int i = 0; i < s.size(); ++i) CHECK((r.spline.control_points()[i] - s.control_points()[i]).norm() < 1e-9);
}

TEST_CASE("optimize: single cylinder") {
  grid::GridConfig cfg{12.0, 12.0, 3.0, 0.1, 0.5};
  const Cylinder cyl{Vec2(0.0, 0.05), 0.5, -2.0, 3.0};
  const Scene scene(Aabb{Vec3(-6, -6, -2), Vec3(6, 6, 3)}, {cyl}, {}, {});
  const auto map = rasterize(scene, cfg, Vec3(0, 0, 1));
  for (bool lbfgs : {true, false}) {
    OptimizeOptions opt;
    opt.use_lbfgs = lbfgs;
    opt.max_iters = lbfgs ? 200 : 2000;
    const auto init = init_spline(Vec3(-4, 0, 1), Vec3(4, 0, 1), 17, 0.35);
    const auto r = optimize(init, map, CostWeights{}, opt);
    CHECK(r.converged);
    CHECK(!r.anchors.empty());
    for (const auto& a : r.anchors) CHECK(a.distance(r.spline.control_points()[a.index]) >= 0.3 - 1e-3);
    int hits = 0;
    for (const auto& p : r.spline.sample(200)) hits += scene.contains(p);
    CHECK(hits == 0);
    CHECK((r.spline.control_points().front() - Vec3(-4, 0, 1)).norm() == 0.0);
    CHECK((r.spline.control_points().back() - Vec3(4, 0, 1)).norm() == 0.0);
    // Cost never rises within one anchor set and penalty weight.
    for (std::size_t k = 1; k < r.history.size(); ++k)
      if (r.history[k].round == r.history[k - 1].round && r.history[k].phase == r.history[k - 1].phase)
        CHECK(r.history[k].cost <= r.history[k - 1].cost + 1e-12);
  }
}

TEST_CASE("optimize: frozen start velocity and planar mode") {
  grid::GridConfig cfg{12.0, 12.0, 3.0, 0.1, 0.5};
  const Scene scene(Aabb{Vec3(-6, -6, -2), Vec3(6, 6, 3)}, {Cylinder{Vec2(0.5, -0.1), 0.4, -2.0, 3.0}}, {}, {});
  const auto map = rasterize(scene, cfg, Vec3(0, 0, 1));
  auto init = init_spline(Vec3(-3, 0, 1), Vec3(3, 0, 1), 13, 0.4);
  init.mutable_control_points()[1] = Vec3(-3, 0, 1) + Vec3(0.3, 0.4, 0.0) * 0.4;
  OptimizeOptions opt;
  opt.freeze_start_velocity = true;
  opt.planar = true;
  const auto r = optimize(init, map, CostWeights{}, opt);
  CHECK(r.converged);
  CHECK((r.spline.velocity(0.0) - Vec3(0.3, 0.4, 0.0)).norm() < 1e-12);
  for (const auto& q : r.spline.control_points()) CHECK(q.z() == 1.0);
  int hits = 0;
  for (const auto& p : r.spline.sample(200)) hits += scene.contains(p);
  CHECK(hits == 0);
}
