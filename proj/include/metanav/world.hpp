#pragma once

// 2D navigation world: unicycle vehicle, circular obstacles inside a square
// walled arena, a 129-beam planar LIDAR and goal/collision detection.

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace metanav::world {

inline constexpr int kLidarBeams = 129;
inline constexpr int kObservationDim = kLidarBeams + 6;  // 135
inline constexpr int kActionDim = 2;

using LidarScan = Eigen::Matrix<double, kLidarBeams, 1>;
using ObservationVector = Eigen::Matrix<double, kObservationDim, 1>;

/// Wraps an angle into [-pi, pi).
double wrap_angle(double theta);

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  bool operator==(const Pose2D&) const = default;
};

struct Obstacle {
  double x = 0.0;
  double y = 0.0;
  double radius = 0.5;

  bool operator==(const Obstacle&) const = default;
};

struct WorldSpec {
  Pose2D robot_start;
  Pose2D goal;
  std::vector<Obstacle> obstacles;
  double arena_half_extent = 5.0;
  std::uint64_t seed = 0;

  bool operator==(const WorldSpec&) const = default;
};

/// Physical and sensor constants shared by every task.
struct EnvParams {
  double v_max = 1.0;                         // m/s at full thrust
  double omega_max = std::numbers::pi / 2.0;  // rad/s at full steer
  double dt = 0.1;
  double robot_radius = 0.2;
  double goal_radius = 0.3;
  double lidar_range = 5.0;
  int horizon = 300;
};

/// Task distribution for sample_task.
struct TaskDistributionConfig {
  double arena_half_extent = 5.0;
  int min_obstacles = 1;
  int max_obstacles = 3;
  double min_obstacle_radius = 0.3;
  double max_obstacle_radius = 1.0;
  double min_goal_distance = 2.0;
  double max_goal_distance = 7.0;
  bool random_start = true;
  Pose2D fixed_start{-3.0, 0.0, 0.0};
  // Extra clearance (beyond robot_radius + goal_radius) kept between placed objects.
  double placement_margin = 0.0;
};

enum class Termination { Running, GoalReached, Collided, HorizonExceeded };
enum class StepEvent { None, GoalReached, Collided };

std::string to_string(Termination t);
std::string to_string(StepEvent e);

struct WorldState {
  WorldSpec spec;
  Pose2D pose;
  int step_count = 0;
  Termination terminated = Termination::Running;
};

struct Observation {
  LidarScan lidar = LidarScan::Zero();
  Pose2D robot_pose;
  Pose2D goal_pose;
};

struct Action {
  double thrust = 0.0;
  double steer = 0.0;

  Action clamped() const;
};

struct StepResult {
  Observation observation;
  double dist_target = 0.0;
  double dist_obs = 0.0;
  StepEvent event = StepEvent::None;
  bool done = false;
};

class InfeasibleTaskConfig : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TerminatedStateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Rejection-samples a task. Identical (seed, cfg, params) give identical specs.
/// Throws InfeasibleTaskConfig after 10'000 failed attempts.
WorldSpec sample_task(std::uint64_t seed, const TaskDistributionConfig& cfg,
                      const EnvParams& params = {});

/// Checks the WorldSpec placement invariants; returns an empty string when valid.
std::string validate(const WorldSpec& spec, const EnvParams& params = {});

struct ResetResult {
  WorldState state;
  Observation observation;
};
ResetResult reset(const WorldSpec& spec, const EnvParams& params = {});

struct StepOutput {
  WorldState state;
  StepResult result;
};
/// Advances one control interval of params.dt seconds. Throws TerminatedStateError
/// when the state has already terminated.
StepOutput step(const WorldState& state, const Action& action, const EnvParams& params = {});

/// Ranges of 129 beams spanning [theta - pi/2, theta + pi/2], capped at params.lidar_range.
LidarScan lidar_scan(const Pose2D& pose, const WorldSpec& spec, const EnvParams& params = {});

/// Bearing of beam `index` relative to the robot heading.
double beam_offset(int index);

struct Distances {
  double dist_target = 0.0;
  double dist_obs = 0.0;
};
/// dist_obs is the surface clearance to the closest obstacle, floored at zero;
/// with no obstacles it is the sentinel 10 * lidar_range.
Distances distances(const WorldState& state, const EnvParams& params = {});
Distances distances(const Pose2D& pose, const WorldSpec& spec, const EnvParams& params = {});

/// Clearance between the robot disc and the nearest arena wall, floored at zero.
double wall_clearance(const Pose2D& pose, const WorldSpec& spec, const EnvParams& params = {});

Observation make_observation(const Pose2D& pose, const WorldSpec& spec, const EnvParams& params = {});

/// [lidar / R_max (129), robot x/h, y/h, theta/pi, goal x/h, y/h, theta/pi].
ObservationVector flatten_observation(const Observation& obs, double arena_half_extent,
                                      const EnvParams& params = {});
Observation unflatten_observation(const ObservationVector& flat, double arena_half_extent,
                                  const EnvParams& params = {});

void to_json(nlohmann::json& j, const Pose2D& p);
void from_json(const nlohmann::json& j, Pose2D& p);
void to_json(nlohmann::json& j, const Obstacle& o);
void from_json(const nlohmann::json& j, Obstacle& o);
void to_json(nlohmann::json& j, const WorldSpec& s);
void from_json(const nlohmann::json& j, WorldSpec& s);

}  // namespace metanav::world
