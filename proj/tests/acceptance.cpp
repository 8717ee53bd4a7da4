// Acceptance run: one PASS/FAIL line per criterion, extra detail indented below it.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "explo/local_grid.hpp"
#include "explo/mission.hpp"
#include "explo/odom.hpp"
#include "explo/rng.hpp"
#include "explo/trajopt.hpp"
#include "oracles.hpp"

using namespace explo;
namespace fs = std::filesystem;

namespace {

struct Report {
  std::vector<std::string> notes;
  bool ok = true;
  void check(bool c, const std::string& what) {
    if (!c) notes.push_back("failed: " + what);
    ok &= c;
  }
  void info(const std::string& s) { notes.push_back(s); }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int failures = 0;

void criterion(int n, const std::string& title, const std::function<void(Report&)>& body) {
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const std::exception& e) {
    r.check(false, std::string("exception: ") + e.what());
  }
  std::printf("CRITERION %d %s: %s (%.1f s)\n", n, title.c_str(), r.ok ? "PASS" : "FAIL", seconds_since(t0));
  for (const auto& s : r.notes) std::printf("    %s\n", s.c_str());
  std::fflush(stdout);
  failures += !r.ok;
}

// ---------------------------------------------------------------- odometry

odom::NominalState random_state(Rng& rng) {
  odom::NominalState x;
  x.rot = so3_exp(Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)));
  x.pos = Vec3(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
  x.vel = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
  x.bias_gyro = Vec3(rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1));
  x.bias_accel = Vec3(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
  x.gravity = Vec3(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), -9.81);
  return x;
}

void jacobian_fidelity(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_state(rng);
    const odom::ImuSample imu{0.0, Vec3(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)),
                              Vec3(rng.uniform(-3, 3), rng.uniform(-3, 3), 9.81 + rng.uniform(-3, 3))};
    const auto t = odom::transition_exact(x, imu, 1e-3);
    worst = std::max(worst, (t.fx - oracle::fd_transition(x, imu.omega, imu.accel, 1e-3)).cwiseAbs().maxCoeff());
  }
  r.info(fmt("F_x vs finite differences, dt=1e-3, 50 states: max |err| = %.3e", worst));
  r.check(worst <= 1e-5, "finite-difference Jacobian within 1e-5");

  // Rotation block of the approximate form against the exact one, |w| = 1 rad/s.
  odom::NominalState still;
  const odom::ImuSample unit{0.0, Vec3(0.6, 0.0, 0.8), Vec3(0, 0, 9.81)};
  auto block_err = [&](int row, int col, double dt) {
    return (odom::transition_exact(still, unit, dt).fx.block<3, 3>(row, col) -
            odom::transition_approx(still, unit, dt).fx.block<3, 3>(row, col))
        .cwiseAbs()
        .maxCoeff();
  };
  const double rot_ratio = block_err(odom::kRot, odom::kRot, 1e-3) / block_err(odom::kRot, odom::kRot, 5e-4);
  const double bias_ratio =
      block_err(odom::kRot, odom::kBiasGyro, 1e-3) / block_err(odom::kRot, odom::kBiasGyro, 5e-4);
  r.info(fmt("rotation block (dtheta, dtheta): err(dt)/err(dt/2) = %.4f", rot_ratio));
  r.info(fmt("gyro-bias coupling block (dtheta, db_w): err(dt)/err(dt/2) = %.4f", bias_ratio));
  r.check(rot_ratio >= 3.5 && rot_ratio <= 4.5, "rotation-block error ratio in [3.5, 4.5]");
  const double secs = seconds_since(t0);
  r.check(secs < 5.0, "runtime under 5 s");
}

void integrator_exactness(Report& r) {
  odom::NominalState x;
  x.vel = Vec3(0.5, -0.2, 0.1);
  const Vec3 acc(1.0, -0.5, 0.25);
  const double dt = 0.005;
  odom::ImuSample a{0.0, Vec3::Zero(), acc + Vec3(0, 0, 9.81)}, b = a;
  for (int k = 1; k <= 200; ++k) {
    b.t = k * dt;
    x = odom::hf_propagate(x, a, b);
    a = b;
  }
  const double t = 200 * dt;
  const double perr = (x.pos - (Vec3(0.5, -0.2, 0.1) * t + 0.5 * acc * t * t)).cwiseAbs().maxCoeff();
  const double verr = (x.vel - (Vec3(0.5, -0.2, 0.1) + acc * t)).cwiseAbs().maxCoeff();
  r.info(fmt("constant acceleration, 200 steps: position err %.3e", perr) + fmt(", velocity err %.3e", verr));
  r.check(perr <= 1e-9 && verr <= 1e-9, "constant acceleration within 1e-9");

  odom::NominalState y;
  odom::ImuSample c{0.0, Vec3(0, 0, 1), Vec3(0, 0, 9.81)}, d = c;
  for (int k = 1; k <= 200; ++k) {
    d.t = k * dt;
    y = odom::hf_propagate(y, c, d);
    c = d;
  }
  const double yaw_err = std::abs(y.rot.yaw() - 1.0);
  r.info(fmt("constant yaw rate, 200 steps: yaw err %.3e rad", yaw_err));
  r.check(yaw_err <= 1e-6, "yaw within 1e-6 rad");
}

// ---------------------------------------------------------------- grid

void grid_laws(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  grid::GridConfig c;  // 30 x 30 x 3 m at 0.1 m, inflation 0.5
  r.check(grid::array_size(c) == 2700000, "30x30x3 @ 0.1 gives 2,700,000 cells");
  r.check(grid::array_size(grid::GridConfig{1.0, 1.0, 1.0, 0.5, 0.0}) == 8, "1x1x1 @ 0.5 gives 8 cells");
  bool rejected = false;
  try {
    grid::GridConfig bad = c;
    bad.length = 1.05;
    bad.validate();
  } catch (const grid::GridError&) {
    rejected = true;
  }
  r.check(rejected, "non-integral extent rejected");

  Rng rng(103);
  int bad_trips = 0;
  for (int i = 0; i < 10000; ++i) {
    const grid::CellIndex idx{static_cast<int>(rng.next() % 300), static_cast<int>(rng.next() % 300),
                              static_cast<int>(rng.next() % 30)};
    const auto id = grid::indices_to_id(idx, c);
    bad_trips += id != static_cast<std::int64_t>(idx.h) * 90000 + idx.w * 300 + idx.l;
    bad_trips += !(grid::id_to_indices(id, c) == idx);
  }
  r.check(bad_trips == 0, "index/id round trip over 10^4 cells");

  int mismatched = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const Vec3 p(rng.uniform(-14, 14), rng.uniform(-14, 14), rng.uniform(-1.4, 1.4));
    PointCloudFrame f;
    f.points.push_back({p, 0.0});
    const std::vector<PointCloudFrame> frames{f};
    const auto m = grid::rebuild_from_frames(frames, c);
    std::set<std::tuple<int, int, int>> got;
    for (std::int64_t id = 0; id < m.size(); ++id)
      if (m.occupied(id)) {
        const auto i = grid::id_to_indices(id, c);
        got.insert({i.w, i.l, i.h});
      }
    mismatched += got != oracle::lattice_cells(p, 0.5, 0.1, 300, 300, 30);
  }
  r.info(std::to_string(30 - mismatched) + "/30 single-point inflations match the enumerated lattice");
  r.check(mismatched == 0, "inflation equals the enumerated offset lattice");
  r.check(seconds_since(t0) < 5.0, "runtime under 5 s");
}

// ---------------------------------------------------------------- optimizer

std::vector<Vec3> fd_gradient(const traj::UniformBspline& s, const std::function<double(const traj::UniformBspline&)>& f) {
  std::vector<Vec3> g(s.size(), Vec3::Zero());
  const double h = 1e-6;
  for (int i = 0; i < s.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      auto a = s, b = s;
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

void optimizer_correctness(Report& r) {
  using namespace explo::traj;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(104);
  CostWeights w;
  w.v_max = 1.0;
  w.a_max = 1.0;
  w.j_max = 1.5;
  double worst_s = 0, worst_c = 0, worst_d = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Vec3> q;
    Vec3 p(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    for (int i = 0; i < 9; ++i) {
      q.push_back(p);
      p += Vec3(0.8 + rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6));
    }
    const UniformBspline s(q, rng.uniform(0.3, 0.8));
    std::vector<AnchorPair> anchors;
    for (int i = 1; i < s.size() - 1; i += 2) {
      const Vec3 v = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)).normalized();
      anchors.push_back({i, s.control_points()[i] - v * rng.uniform(-0.6, 0.4), v});
    }
    worst_s = std::max(worst_s, rel_error(smoothness_cost(s).gradient,
                                          fd_gradient(s, [](const UniformBspline& x) { return smoothness_cost(x).value; })));
    worst_c = std::max(worst_c, rel_error(collision_cost(s, anchors, w).gradient, fd_gradient(s, [&](const UniformBspline& x) {
                                            return collision_cost(x, anchors, w).value;
                                          })));
    worst_d = std::max(worst_d, rel_error(feasibility_cost(s, w).gradient,
                                          fd_gradient(s, [&](const UniformBspline& x) { return feasibility_cost(x, w).value; })));
  }
  r.info(fmt("gradient rel. error, 100 configs: J_s %.2e", worst_s) + fmt(", J_c %.2e", worst_c) +
         fmt(", J_d %.2e", worst_d));
  r.check(worst_s <= 1e-4 && worst_c <= 1e-4 && worst_d <= 1e-4, "gradients within 1e-4");

  double jump = 0.0;
  for (double sf : {0.2, 0.3, 0.5})
    for (double c : {0.0, sf}) {
      jump = std::max(jump, std::abs(collision_penalty(c + 1e-10, sf) - collision_penalty(c - 1e-10, sf)));
      jump = std::max(jump, std::abs(collision_penalty_derivative(c + 1e-12, sf) - collision_penalty_derivative(c - 1e-12, sf)));
    }
  for (double cm : {1.0, 2.0, 3.0}) {
    const FeasibilityPenalty f(cm, 0.9, 1.25 * cm);
    for (double c : {-1.25 * cm, -0.9 * cm, 0.9 * cm, 1.25 * cm}) {
      jump = std::max(jump, std::abs(f.value(c + 1e-10) - f.value(c - 1e-10)));
      jump = std::max(jump, std::abs(f.derivative(c + 1e-12) - f.derivative(c - 1e-12)));
    }
  }
  r.info(fmt("largest jump across penalty junctions: %.2e", jump));
  r.check(jump <= 1e-8, "penalties continuous at junctions");

  // A single trunk across the straight line between start and goal.
  grid::GridConfig cfg{12.0, 12.0, 3.0, 0.1, 0.5};
  const Scene scene(Aabb{Vec3(-6, -6, -2), Vec3(6, 6, 3)}, {Cylinder{Vec2(0.0, 0.05), 0.5, -2.0, 3.0}}, {}, {});
  PointCloudFrame f;
  const grid::LocalGridMap blank(cfg, Vec3(0, 0, 1));
  for (int h = 0; h < cfg.num_h(); ++h)
    for (int wi = 0; wi < cfg.num_w(); ++wi)
      for (int l = 0; l < cfg.num_l(); ++l) {
        const Vec3 c = blank.cell_center_world({wi, l, h});
        if (scene.contains(c)) f.points.push_back({c - Vec3(0, 0, 1), 0.0});
      }
  const std::vector<PointCloudFrame> frames{f};
  const auto map = grid::rebuild_from_frames(frames, cfg, Vec3(0, 0, 1));
  const CostWeights defaults;
  const auto res = optimize(init_spline(Vec3(-4, 0, 1), Vec3(4, 0, 1), 17, 0.35), map, defaults);
  double min_d = 1e9;
  for (const auto& a : res.anchors) min_d = std::min(min_d, a.distance(res.spline.control_points()[a.index]));
  int hits = 0;
  for (const auto& p : res.spline.sample(200)) hits += scene.contains(p);
  r.info("single cylinder: converged=" + std::string(res.converged ? "yes" : "no") + ", " +
         std::to_string(res.anchors.size()) + " anchors" + fmt(", min d_i %.4f m", min_d) +
         ", " + std::to_string(hits) + " scene collisions in 200 samples");
  r.check(res.converged && !res.anchors.empty(), "single-cylinder optimization converges");
  r.check(min_d >= defaults.safe_distance - 1e-3, "all d_i >= s_f - 1e-3");
  r.check(hits == 0, "no true-scene collisions");
  r.check(seconds_since(t0) < 30.0, "runtime under 30 s");
}

// ---------------------------------------------------------------- episodes

struct Episodes {
  std::vector<mission::EpisodeResult> direction, baseline;
  mission::EpisodeResult open;
  std::vector<double> wall;  // per forest episode
};

mission::ScenarioConfig forest(std::uint64_t seed, explore::RevenueMode mode) {
  auto c = mission::ScenarioConfig{}.with_seed(seed);
  c.explore.mode = mode;
  c.mission.write_snapshots = false;
  return c;
}

Episodes run_all() {
  Episodes e;
  mission::ScenarioConfig open;
  open.scene.type = "open";
  open.scene.min = Vec2(-5, -5);
  open.scene.max = Vec2(5, 5);
  open.scene.height = 4.0;
  open.boundary_min = Vec2(-5, -5);
  open.boundary_max = Vec2(5, 5);
  open.grid.length = 12.0;
  open.grid.width = 12.0;
  open.planner.horizon = 5.0;
  open.mission.max_time = 300.0;
  e.open = mission::run_episode(open);
  for (std::uint64_t s = 1; s <= 10; ++s) {
    for (auto mode : {explore::RevenueMode::Direction, explore::RevenueMode::Baseline}) {
      auto res = mission::run_episode(forest(s, mode));
      e.wall.push_back(res.metrics.wall_clock);
      std::printf("    episode seed %llu %-9s: %-15s goals %2d coverage %.4f heading %.3f path %.1f m, %.1f s\n",
                  static_cast<unsigned long long>(s), explore::to_string(mode).c_str(),
                  mission::to_string(res.metrics.termination).c_str(), res.metrics.explore_goals,
                  res.metrics.reachable_coverage, res.metrics.heading_change, res.metrics.path_length,
                  res.metrics.wall_clock);
      std::fflush(stdout);
      (mode == explore::RevenueMode::Direction ? e.direction : e.baseline).push_back(std::move(res));
    }
  }
  return e;
}

bool stopped(const mission::EpisodeMetrics& m) {
  return m.termination == mission::Termination::NoFrontier || m.termination == mission::Termination::BelowThreshold;
}

void completeness(Report& r, const Episodes& e) {
  const auto& o = e.open.metrics;
  r.info("open 10x10 world: " + mission::to_string(o.termination) + fmt(", coverage %.4f", o.known_fraction) +
         fmt(", %.1f s", o.wall_clock));
  r.check(stopped(o), "open world ends on a stop criterion");
  r.check(o.known_fraction >= 0.99, "open world coverage >= 99%");
  int good = 0;
  for (const auto& res : e.direction) good += stopped(res.metrics) && res.metrics.reachable_coverage >= 0.95;
  r.info("forest seeds 1..10 with >= 95% reachable coverage before a stop criterion: " + std::to_string(good) + "/10");
  r.check(good >= 9, "at least 9 of 10 forest seeds reach 95%");
  double slowest = o.wall_clock;
  for (double w : e.wall) slowest = std::max(slowest, w);
  r.info(fmt("slowest episode %.1f s", slowest));
  r.check(slowest < 60.0, "every episode under 60 s");
}

void direction_benefit(Report& r, const Episodes& e) {
  double hd = 0, hb = 0, pd = 0, pb = 0;
  for (std::size_t i = 0; i < e.direction.size(); ++i) {
    hd += e.direction[i].metrics.heading_change;
    hb += e.baseline[i].metrics.heading_change;
    pd += e.direction[i].metrics.path_length;
    pb += e.baseline[i].metrics.path_length;
  }
  const double n = static_cast<double>(e.direction.size());
  r.info(fmt("mean heading change: direction %.4f rad", hd / n) + fmt(", baseline %.4f rad", hb / n));
  r.info(fmt("mean path length: direction %.1f m", pd / n) + fmt(", baseline %.1f m", pb / n) +
         fmt(" (ratio %.3f)", pd / pb));
  r.check(hd < hb, "direction mode turns less on average");
  r.check(pd <= 1.05 * pb, "direction path length within 5% of baseline");
}

void oracle_shadowing(Report& r, const Episodes& e) {
  std::size_t calls = 0, agree = 0;
  auto scan = [&](const mission::EpisodeResult& res) {
    for (const auto& s : res.metrics.selections) {
      ++calls;
      agree += oracle::argmax(s.candidates, s.state, s.mode == explore::RevenueMode::Direction) == s.chosen;
    }
  };
  scan(e.open);
  for (const auto& x : e.direction) scan(x);
  for (const auto& x : e.baseline) scan(x);
  r.info(std::to_string(agree) + "/" + std::to_string(calls) + " selections equal the brute-force argmax");
  r.check(calls > 0 && agree == calls, "every selection matches the oracle");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void determinism(Report& r, const Episodes& e) {
  const auto cfg = forest(1, explore::RevenueMode::Direction);
  const fs::path a = fs::temp_directory_path() / "explo_accept_a", b = fs::temp_directory_path() / "explo_accept_b";
  fs::remove_all(a);
  fs::remove_all(b);
  mission::export_artifacts(e.direction.front(), cfg, a.string());
  mission::export_artifacts(mission::run_episode(cfg), cfg, b.string());
  const bool metrics = slurp(a / "metrics.csv") == slurp(b / "metrics.csv");
  const bool ply = slurp(a / "map.ply") == slurp(b / "map.ply");
  r.info("forest seed 1 rerun: metrics.csv " + std::string(metrics ? "identical" : "differs") + ", map.ply " +
         (ply ? "identical" : "differs"));
  r.check(metrics && ply, "byte-identical artifacts");
}

// ---------------------------------------------------------------- global map

void global_map_fidelity(Report& r) {
  // Wall face on the plane x = 5.
  const Scene scene(Aabb{Vec3(-10, -40, -2), Vec3(10, 40, 6)}, {}, {Box{Vec3(5, -30, -1), Vec3(5.3, 30, 5)}}, {});
  LidarSpec spec;
  spec.noise_sigma = 0.02;
  const Pose imu_from_lidar{Rot3(), Vec3(0, 0, 0.1)};
  explore::GlobalCloudMap map(0.1);
  std::vector<PointCloudFrame> frames;
  std::vector<Pose> poses;
  for (int k = 0; k < 6; ++k) {
    const Pose world_from_imu{Rot3::about_z(0.3 * k - 0.7), Vec3(-2.0 + 0.5 * k, -3.0 + 1.2 * k, 1.0)};
    const auto scan = lidar_scan(scene, pose_compose(world_from_imu, imu_from_lidar), spec, 900 + k);
    const std::vector<odom::StampedPose> still{{-1.0, world_from_imu}, {1.0, world_from_imu}};
    frames.push_back(odom::undistort_frame(scan, still, imu_from_lidar));
    poses.push_back(world_from_imu);
    explore::accumulate_global(map, frames.back(), world_from_imu, imu_from_lidar);
  }
  double worst = 0.0;
  for (const auto& p : map.points()) worst = std::max(worst, std::abs(p.x() - 5.0));
  r.info(std::to_string(map.size()) + fmt(" points, max plane residual %.4f m", worst) +
         fmt(" (bound %.4f m)", 3 * spec.noise_sigma + 1e-6));
  r.check(map.size() > 1000, "wall scanned");
  r.check(worst <= 3 * spec.noise_sigma + 1e-6, "all points within 3 sigma of the plane");
  const std::size_t before = map.size();
  std::size_t added = 0;
  for (std::size_t k = 0; k < frames.size(); ++k) added += explore::accumulate_global(map, frames[k], poses[k], imu_from_lidar);
  r.info("re-accumulating every frame added " + std::to_string(added) + " points");
  r.check(added == 0 && map.size() == before, "duplicate accumulation does not grow the map");
}

}  // namespace

int main() {
  criterion(1, "Jacobian fidelity", jacobian_fidelity);
  criterion(2, "Integrator exactness", integrator_exactness);
  criterion(3, "Grid laws", grid_laws);
  criterion(4, "Optimizer correctness", optimizer_correctness);

  std::printf("    running the open-world episode and 10 paired forest seeds\n");
  std::fflush(stdout);
  const Episodes e = run_all();
  criterion(5, "Exploration completeness", [&](Report& r) { completeness(r, e); });
  criterion(6, "Direction-aware benefit", [&](Report& r) { direction_benefit(r, e); });
  criterion(7, "Oracle shadowing", [&](Report& r) { oracle_shadowing(r, e); });
  criterion(8, "Determinism", [&](Report& r) { determinism(r, e); });
  criterion(9, "Global map fidelity", global_map_fidelity);

  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
