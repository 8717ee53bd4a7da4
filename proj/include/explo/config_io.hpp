#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "explo/frontier.hpp"
#include "explo/local_grid.hpp"
#include "explo/scene.hpp"
#include "explo/sensors.hpp"
#include "explo/trajopt.hpp"

namespace explo::mission {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kConfigVersion = 1;

struct SceneSpec {
  std::string type = "forest";  // forest | garage | open | explicit
  std::uint64_t seed = 1;
  Vec2 min = Vec2(-25.0, -20.0);
  Vec2 max = Vec2(25.0, 20.0);
  double height = 8.0;
  // forest
  double density = 0.02;
  double radius_min = 0.15;
  double radius_max = 0.4;
  double min_gap = 1.6;
  double start_clearance = 2.5;
  // garage
  double pillar_pitch = 8.0;
  double pillar_size = 0.6;
  double wall_thickness = 0.3;
  int parked_cars = 4;
  // explicit
  std::vector<Cylinder> cylinders;
  std::vector<Box> boxes;
  std::vector<HalfSpace> halfspaces;
};

Scene build_scene(const SceneSpec& spec);

struct Rates {
  double track = 100.0;
  double collision_check = 20.0;
  double lidar = 10.0;
  double imu = 200.0;  // base tick
};

struct PlannerConfig {
  traj::CostWeights cost;
  int max_iters = 100;
  double tol = 1e-6;
  bool use_lbfgs = true;
  bool multi_anchor = false;
  int max_rounds = 4;
  double horizon = 6.0;           // m of route handed to the local optimizer
  double control_spacing = 0.5;   // m between initial control points
  double cruise_speed = 1.5;      // m/s, sets the knot interval
  double route_clearance = 0.4;   // m kept from occupied cells by the 2D route
  double replan_lead = 1.0;       // s before segment end at which to replan
};

struct ExploreConfig {
  explore::ExploreWeights weights;
  explore::RrtParams rrt;
  explore::SliceConfig slice{0.2, 2.0, true};
  double resolution = 0.1;        // 2D grid, m
  double cloud_resolution = 0.1;  // global map dedup, m
  explore::RevenueMode mode = explore::RevenueMode::Direction;
};

struct MissionParams {
  Vec2 start = Vec2::Zero();
  double altitude = 1.0;
  double goal_tolerance = 0.5;
  double max_time = 900.0;  // s of simulated time
  int max_failures = 5;
  bool return_to_start = true;  // false: hover where exploration stops
  double follower_lag = 0.05;   // s; 0 tracks the curve exactly
  double ground_filter = 0.15;  // m; lower returns stay out of the local grid
  Vec3 lidar_offset = Vec3(0.0, 0.0, 0.1);
  bool write_snapshots = true;
};

struct ScenarioConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 1;
  SceneSpec scene;
  Vec2 boundary_min = Vec2(-25.0, -20.0);
  Vec2 boundary_max = Vec2(25.0, 20.0);
  LidarSpec lidar;
  ImuSpec imu;
  PoseNoiseModel pose_noise{0.005, 0.0005, 0.0};
  grid::GridConfig grid;
  PlannerConfig planner;
  ExploreConfig explore;
  Rates rates;
  MissionParams mission;

  /// Throws ConfigError.
  void validate() const;
  /// Same scenario with the episode and scene seeds replaced.
  ScenarioConfig with_seed(std::uint64_t s) const;
};

ScenarioConfig parse_config(const std::string& json_text);
ScenarioConfig load_config(const std::string& path);
std::string dump_config(const ScenarioConfig& config);

std::string dump_scene(const Scene& scene);
Scene parse_scene(const std::string& json_text);

bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

}  // namespace explo::mission
