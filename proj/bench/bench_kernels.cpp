// Parallel kernels against their serial references.
#include <benchmark/benchmark.h>

#include "explo/frontier.hpp"
#include "explo/local_grid.hpp"
#include "explo/scene.hpp"
#include "explo/sensors.hpp"

namespace {

using namespace explo;

const Scene& forest() {
  static const Scene s = generate_forest(ForestParams{});
  return s;
}

SweepPoseFn hover(const Vec3& p) {
  return [p](double) { return Pose{Rot3(), p}; };
}

void BM_LidarScan(benchmark::State& st) {
  const LidarSpec spec;
  const auto pose = hover(Vec3(0.0, 0.0, 1.1));
  for (auto _ : st) benchmark::DoNotOptimize(lidar_scan(forest(), pose, spec, 7));
}

void BM_LidarScanSerial(benchmark::State& st) {
  const LidarSpec spec;
  const auto pose = hover(Vec3(0.0, 0.0, 1.1));
  for (auto _ : st) benchmark::DoNotOptimize(lidar_scan_serial(forest(), pose, spec, 7));
}

std::vector<PointCloudFrame> frames() {
  const LidarSpec spec;
  std::vector<PointCloudFrame> out;
  for (int k = 0; k < 5; ++k) {
    auto f = lidar_scan(forest(), hover(Vec3(0.2 * k, 0.0, 1.1)), spec, 11 + k);
    for (auto& p : f.points) p.p += Vec3(0.2 * k, 0.0, 1.1);
    out.push_back(std::move(f));
  }
  return out;
}

void BM_Rebuild(benchmark::State& st) {
  const auto fs = frames();
  const grid::GridConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(grid::rebuild_from_frames(fs, cfg));
}

void BM_RebuildSerial(benchmark::State& st) {
  const auto fs = frames();
  const grid::GridConfig cfg;
  for (auto _ : st) benchmark::DoNotOptimize(grid::rebuild_from_frames_serial(fs, cfg));
}

struct GainSetup {
  explore::OccupancyGrid2D grid{Vec2(-25.0, -20.0), Vec2(25.0, 20.0), 0.1, {}};
  std::vector<explore::FrontierCandidate> cands;
  GainSetup() {
    const auto f = lidar_scan(forest(), hover(Vec3(0.0, 0.0, 1.1)), LidarSpec{}, 3);
    std::vector<Vec3> pts;
    for (const auto& p : f.points) pts.push_back(p.p + Vec3(0.0, 0.0, 1.1));
    grid.update(pts, Vec3(0.0, 0.0, 1.1));
    explore::RrtParams rp;
    cands = explore::rrt_detect_frontiers(grid, Vec3(0.0, 0.0, 1.0), rp);
  }
};

void BM_InfoGain(benchmark::State& st) {
  GainSetup s;
  for (auto _ : st) {
    explore::compute_info_gain(s.grid, s.cands, 3.0);
    benchmark::DoNotOptimize(s.cands.data());
  }
  st.counters["candidates"] = static_cast<double>(s.cands.size());
}

void BM_InfoGainSerial(benchmark::State& st) {
  GainSetup s;
  for (auto _ : st) {
    explore::compute_info_gain_serial(s.grid, s.cands, 3.0);
    benchmark::DoNotOptimize(s.cands.data());
  }
  st.counters["candidates"] = static_cast<double>(s.cands.size());
}

}  // namespace

BENCHMARK(BM_LidarScan)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LidarScanSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Rebuild)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RebuildSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InfoGain)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InfoGainSerial)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
