#include "metanav/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "metanav/random.hpp"

namespace metanav::world {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kMaxSampleAttempts = 10'000;
// Smallest reported range; a beam origin sitting on a surface still reads > 0.
constexpr double kMinRange = 1e-12;

double hypot2(double dx, double dy) { return std::sqrt(dx * dx + dy * dy); }

// Distance along a unit ray to the first forward intersection with a circle,
// or +inf when the ray misses.
double ray_circle(double ox, double oy, double dx, double dy, const Obstacle& c) {
  const double fx = ox - c.x;
  const double fy = oy - c.y;
  const double b = fx * dx + fy * dy;
  const double cc = fx * fx + fy * fy - c.radius * c.radius;
  const double disc = b * b - cc;
  if (disc < 0.0) return std::numeric_limits<double>::infinity();
  const double s = std::sqrt(disc);
  const double near = -b - s;
  if (near >= 0.0) return near;
  const double far = -b + s;
  if (far >= 0.0) return far;
  return std::numeric_limits<double>::infinity();
}

// Distance along a unit ray from inside the square [-h, h]^2 to its boundary.
double ray_box(double ox, double oy, double dx, double dy, double h) {
  double t = std::numeric_limits<double>::infinity();
  if (dx > 0.0) t = std::min(t, (h - ox) / dx);
  if (dx < 0.0) t = std::min(t, (-h - ox) / dx);
  if (dy > 0.0) t = std::min(t, (h - oy) / dy);
  if (dy < 0.0) t = std::min(t, (-h - oy) / dy);
  return std::max(t, 0.0);
}

}  // namespace

double wrap_angle(double theta) {
  if (theta >= -kPi && theta < kPi) return theta;
  double r = std::fmod(theta + kPi, 2.0 * kPi);
  if (r < 0.0) r += 2.0 * kPi;
  r -= kPi;
  // fmod round-off can land exactly on +pi.
  if (r >= kPi) r -= 2.0 * kPi;
  return r;
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::Running: return "running";
    case Termination::GoalReached: return "goal_reached";
    case Termination::Collided: return "collided";
    case Termination::HorizonExceeded: return "horizon_exceeded";
  }
  return "unknown";
}

std::string to_string(StepEvent e) {
  switch (e) {
    case StepEvent::None: return "none";
    case StepEvent::GoalReached: return "goal_reached";
    case StepEvent::Collided: return "collided";
  }
  return "unknown";
}

Action Action::clamped() const {
  return {std::clamp(thrust, -1.0, 1.0), std::clamp(steer, -1.0, 1.0)};
}

std::string validate(const WorldSpec& spec, const EnvParams& params) {
  const double h = spec.arena_half_extent;
  const double margin = params.robot_radius + params.goal_radius;
  if (!(h > 0.0)) return "arena_half_extent must be positive";
  auto inside = [&](const Pose2D& p) {
    return std::abs(p.x) <= h - margin && std::abs(p.y) <= h - margin;
  };
  if (!inside(spec.robot_start)) return "robot_start outside arena";
  if (!inside(spec.goal)) return "goal outside arena";
  if (hypot2(spec.goal.x - spec.robot_start.x, spec.goal.y - spec.robot_start.y) < margin)
    return "robot_start overlaps goal";
  for (std::size_t i = 0; i < spec.obstacles.size(); ++i) {
    const Obstacle& o = spec.obstacles[i];
    if (!(o.radius > 0.0)) return "obstacle radius must be positive";
    if (std::abs(o.x) + o.radius > h || std::abs(o.y) + o.radius > h)
      return "obstacle outside arena";
    if (hypot2(o.x - spec.robot_start.x, o.y - spec.robot_start.y) - o.radius < margin)
      return "obstacle overlaps robot_start";
    if (hypot2(o.x - spec.goal.x, o.y - spec.goal.y) - o.radius < margin)
      return "obstacle overlaps goal";
    for (std::size_t j = 0; j < i; ++j) {
      const Obstacle& p = spec.obstacles[j];
      if (hypot2(o.x - p.x, o.y - p.y) < o.radius + p.radius) return "obstacles overlap";
    }
  }
  return {};
}

WorldSpec sample_task(std::uint64_t seed, const TaskDistributionConfig& cfg,
                      const EnvParams& params) {
  if (cfg.min_obstacles < 0 || cfg.max_obstacles < cfg.min_obstacles)
    throw InfeasibleTaskConfig("obstacle count range is empty");
  if (cfg.min_obstacle_radius <= 0.0 || cfg.max_obstacle_radius < cfg.min_obstacle_radius)
    throw InfeasibleTaskConfig("obstacle radius range is invalid");
  if (cfg.max_goal_distance < cfg.min_goal_distance)
    throw InfeasibleTaskConfig("goal distance range is empty");

  Rng rng(mix_seed(seed));
  const double h = cfg.arena_half_extent;
  const double margin = params.robot_radius + params.goal_radius;
  const double clearance = margin + cfg.placement_margin;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::uniform_int_distribution<int> count_dist(cfg.min_obstacles, cfg.max_obstacles);

  for (int attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
    WorldSpec spec;
    spec.arena_half_extent = h;
    spec.seed = seed;

    if (cfg.random_start) {
      spec.robot_start = {uniform(-h + margin, h - margin), uniform(-h + margin, h - margin),
                          wrap_angle(uniform(-kPi, kPi))};
    } else {
      spec.robot_start = cfg.fixed_start;
      spec.robot_start.theta = wrap_angle(spec.robot_start.theta);
    }

    const double goal_dist = uniform(cfg.min_goal_distance, cfg.max_goal_distance);
    const double goal_bearing = uniform(-kPi, kPi);
    spec.goal = {spec.robot_start.x + goal_dist * std::cos(goal_bearing),
                 spec.robot_start.y + goal_dist * std::sin(goal_bearing),
                 wrap_angle(uniform(-kPi, kPi))};

    const int n_obstacles = count_dist(rng);
    bool placed_all = true;
    for (int k = 0; k < n_obstacles && placed_all; ++k) {
      const double r = uniform(cfg.min_obstacle_radius, cfg.max_obstacle_radius);
      if (r >= h) {
        placed_all = false;
        break;
      }
      Obstacle o{uniform(-h + r, h - r), uniform(-h + r, h - r), r};
      const bool clear_of_robot =
          hypot2(o.x - spec.robot_start.x, o.y - spec.robot_start.y) - r >= clearance;
      const bool clear_of_goal = hypot2(o.x - spec.goal.x, o.y - spec.goal.y) - r >= clearance;
      bool clear_of_others = true;
      for (const Obstacle& p : spec.obstacles)
        clear_of_others &= hypot2(o.x - p.x, o.y - p.y) >= o.radius + p.radius + cfg.placement_margin;
      if (clear_of_robot && clear_of_goal && clear_of_others)
        spec.obstacles.push_back(o);
      else
        placed_all = false;
    }
    if (!placed_all) continue;
    if (validate(spec, params).empty()) return spec;
  }
  throw InfeasibleTaskConfig("no valid task after 10000 attempts; arena too crowded");
}

double beam_offset(int index) {
  return -kPi / 2.0 + static_cast<double>(index) * (kPi / static_cast<double>(kLidarBeams - 1));
}

LidarScan lidar_scan(const Pose2D& pose, const WorldSpec& spec, const EnvParams& params) {
  LidarScan scan;
  for (int i = 0; i < kLidarBeams; ++i) {
    const double bearing = pose.theta + beam_offset(i);
    const double dx = std::cos(bearing);
    const double dy = std::sin(bearing);
    double t = ray_box(pose.x, pose.y, dx, dy, spec.arena_half_extent);
    for (const Obstacle& o : spec.obstacles) t = std::min(t, ray_circle(pose.x, pose.y, dx, dy, o));
    scan[i] = std::clamp(t, kMinRange, params.lidar_range);
  }
  return scan;
}

Distances distances(const Pose2D& pose, const WorldSpec& spec, const EnvParams& params) {
  Distances d;
  d.dist_target = hypot2(spec.goal.x - pose.x, spec.goal.y - pose.y);
  if (spec.obstacles.empty()) {
    d.dist_obs = 10.0 * params.lidar_range;
    return d;
  }
  double best = std::numeric_limits<double>::infinity();
  for (const Obstacle& o : spec.obstacles)
    best = std::min(best, hypot2(o.x - pose.x, o.y - pose.y) - o.radius - params.robot_radius);
  d.dist_obs = std::max(best, 0.0);
  return d;
}

Distances distances(const WorldState& state, const EnvParams& params) {
  return distances(state.pose, state.spec, params);
}

double wall_clearance(const Pose2D& pose, const WorldSpec& spec, const EnvParams& params) {
  const double h = spec.arena_half_extent;
  const double gap = std::min(h - std::abs(pose.x), h - std::abs(pose.y)) - params.robot_radius;
  return std::max(gap, 0.0);
}

Observation make_observation(const Pose2D& pose, const WorldSpec& spec, const EnvParams& params) {
  return {lidar_scan(pose, spec, params), pose, spec.goal};
}

ResetResult reset(const WorldSpec& spec, const EnvParams& params) {
  WorldState state{spec, spec.robot_start, 0, Termination::Running};
  state.pose.theta = wrap_angle(state.pose.theta);
  Observation obs = make_observation(state.pose, spec, params);
  return {std::move(state), std::move(obs)};
}

StepOutput step(const WorldState& state, const Action& action, const EnvParams& params) {
  if (state.terminated != Termination::Running)
    throw TerminatedStateError("step() called on a terminated episode (" +
                               to_string(state.terminated) + ")");
  const Action a = action.clamped();

  StepOutput out{state, {}};
  Pose2D& pose = out.state.pose;
  if (a.steer != 0.0) pose.theta = wrap_angle(pose.theta + a.steer * params.omega_max * params.dt);
  if (a.thrust != 0.0) {
    const double dist = a.thrust * params.v_max * params.dt;
    pose.x += dist * std::cos(pose.theta);
    pose.y += dist * std::sin(pose.theta);
  }
  out.state.step_count += 1;

  StepResult& r = out.result;
  const Distances d = distances(pose, state.spec, params);
  r.dist_target = d.dist_target;
  r.dist_obs = d.dist_obs;
  const bool hit_obstacle = !state.spec.obstacles.empty() && d.dist_obs == 0.0;
  const bool hit_wall = wall_clearance(pose, state.spec, params) == 0.0;
  if (hit_obstacle || hit_wall) {
    r.event = StepEvent::Collided;
    out.state.terminated = Termination::Collided;
  } else if (d.dist_target <= params.goal_radius) {
    r.event = StepEvent::GoalReached;
    out.state.terminated = Termination::GoalReached;
  } else if (out.state.step_count >= params.horizon) {
    out.state.terminated = Termination::HorizonExceeded;
  }
  r.done = out.state.terminated != Termination::Running;
  r.observation = make_observation(pose, state.spec, params);
  return out;
}

ObservationVector flatten_observation(const Observation& obs, double arena_half_extent,
                                      const EnvParams& params) {
  ObservationVector v;
  v.head<kLidarBeams>() = obs.lidar / params.lidar_range;
  v.tail<6>() << obs.robot_pose.x / arena_half_extent, obs.robot_pose.y / arena_half_extent,
      obs.robot_pose.theta / kPi, obs.goal_pose.x / arena_half_extent,
      obs.goal_pose.y / arena_half_extent, obs.goal_pose.theta / kPi;
  return v;
}

Observation unflatten_observation(const ObservationVector& flat, double arena_half_extent,
                                  const EnvParams& params) {
  Observation obs;
  obs.lidar = flat.head<kLidarBeams>() * params.lidar_range;
  const auto t = flat.tail<6>();
  obs.robot_pose = {t[0] * arena_half_extent, t[1] * arena_half_extent, t[2] * kPi};
  obs.goal_pose = {t[3] * arena_half_extent, t[4] * arena_half_extent, t[5] * kPi};
  return obs;
}

void to_json(nlohmann::json& j, const Pose2D& p) { j = {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }

void from_json(const nlohmann::json& j, Pose2D& p) {
  p.x = j.at("x").get<double>();
  p.y = j.at("y").get<double>();
  p.theta = j.at("theta").get<double>();
}

void to_json(nlohmann::json& j, const Obstacle& o) {
  j = {{"center", {{"x", o.x}, {"y", o.y}}}, {"radius", o.radius}};
}

void from_json(const nlohmann::json& j, Obstacle& o) {
  o.x = j.at("center").at("x").get<double>();
  o.y = j.at("center").at("y").get<double>();
  o.radius = j.at("radius").get<double>();
}

void to_json(nlohmann::json& j, const WorldSpec& s) {
  j = {{"robot_start", s.robot_start},
       {"goal", s.goal},
       {"obstacles", s.obstacles},
       {"arena_half_extent", s.arena_half_extent},
       {"seed", s.seed}};
}

void from_json(const nlohmann::json& j, WorldSpec& s) {
  s.robot_start = j.at("robot_start").get<Pose2D>();
  s.goal = j.at("goal").get<Pose2D>();
  s.obstacles = j.at("obstacles").get<std::vector<Obstacle>>();
  s.arena_half_extent = j.at("arena_half_extent").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace metanav::world
