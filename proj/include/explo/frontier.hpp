#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "explo/occupancy2d.hpp"

namespace explo::explore {

struct FrontierCandidate {
  Vec3 position = Vec3::Zero();  // z = flight altitude
  std::int64_t f_info = 0;       // unknown cells around the candidate
  double f_dist = 0.0;           // Euclidean distance from the robot, m
  double angle = 0.0;            // rad, in [0, pi]
};

struct RrtParams {
  double step = 1.0;  // eta, m
  int iterations = 2000;
  std::uint64_t seed = 1;
  double altitude = 1.0;
  /// Rejects candidates with an occupied cell this close.
  double clearance = 0.6;
  /// Rejects candidates whose square window (half-size) is already this known.
  double window = 1.0;
  double known_limit = 0.95;
};

/// Grows a single RRT from the robot through idle cells. Every extension whose
/// 4-connected cell walk reaches an unknown cell yields the last idle cell
/// before it as a candidate. Candidates are unique per cell, in discovery order.
std::vector<FrontierCandidate> rrt_detect_frontiers(const OccupancyGrid2D& grid, const Vec3& robot,
                                                    const RrtParams& params);

/// Unknown cells whose centres lie within `radius` of `p`.
std::int64_t info_gain(const OccupancyGrid2D& grid, const Vec2& p, double radius);
/// Fills f_info for every candidate. OpenMP-parallel over candidates.
void compute_info_gain(const OccupancyGrid2D& grid, std::span<FrontierCandidate> candidates, double radius);
void compute_info_gain_serial(const OccupancyGrid2D& grid, std::span<FrontierCandidate> candidates,
                              double radius);

enum class RevenueMode { Baseline, Direction };
RevenueMode parse_mode(const std::string& s);
std::string to_string(RevenueMode m);

struct ExploreWeights {
  double lambda_info = 1.0;
  double lambda_dist = 3.0;
  double lambda_dir = 2.0;
  std::int64_t stop_threshold = 20;  // cells
  double info_radius = 3.0;          // m
};

/// Goal history and exploration flag.
struct ExploreState {
  std::optional<Vec3> prev;       // T_{t-1}
  std::optional<Vec3> prev_prev;  // T_{t-2}
  bool exploring = true;
  ExploreWeights weights;

  void push_goal(const Vec3& g) {
    prev_prev = prev;
    prev = g;
  }
};

/// Angle between T_{t-2}->T_{t-1} and T_{t-1}->p in the horizontal plane;
/// 0 until two goals exist or when either vector vanishes.
double direction_angle(const ExploreState& state, const Vec3& p);

double revenue(const FrontierCandidate& c, const ExploreState& state, RevenueMode mode);

/// Fills f_dist and angle from the robot position and goal history.
void score_candidates(std::span<FrontierCandidate> candidates, const Vec3& robot, const ExploreState& state);

/// Argmax of revenue; ties go to the smaller f_dist, then the
/// lexicographically smaller position. nullopt when empty.
std::optional<std::size_t> best_candidate(std::span<const FrontierCandidate> candidates,
                                          const ExploreState& state, RevenueMode mode);
/// best_candidate plus history shift. Throws std::invalid_argument when empty.
FrontierCandidate select_goal(std::span<const FrontierCandidate> candidates, ExploreState& state,
                              RevenueMode mode);

enum class StopReason { None, NoFrontier, BelowThreshold };
StopReason stop_reason(std::span<const FrontierCandidate> candidates, std::int64_t threshold);
inline bool stop_check(std::span<const FrontierCandidate> candidates, std::int64_t threshold) {
  return stop_reason(candidates, threshold) != StopReason::None;
}

}  // namespace explo::explore
