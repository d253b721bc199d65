#include <cmath>
#include <fstream>

#include "metanav/harness.hpp"
#include "metanav/random.hpp"

namespace metanav::harness {

using ad::Vector;

namespace {

const ad::MlpShape& network_shape(const Checkpoint& ckpt) {
  return ckpt.algorithm == Algorithm::Maml ? ckpt.policy.mean_net.shape : ckpt.actor.shape;
}

void check_architecture(const Checkpoint& ckpt) {
  const ad::MlpShape& s = network_shape(ckpt);
  if (s.input_dim != world::kObservationDim || s.output_dim != world::kActionDim)
    throw ConfigError("checkpoint network maps " + std::to_string(s.input_dim) + " -> " +
                      std::to_string(s.output_dim) + " but the world needs " +
                      std::to_string(world::kObservationDim) + " -> " +
                      std::to_string(world::kActionDim));
  const Eigen::Index stored = ckpt.algorithm == Algorithm::Maml ? ckpt.policy.mean_net.size()
                                                                : ckpt.actor.size();
  if (stored != s.param_count()) throw ConfigError("checkpoint parameter count does not match its shape");
}

struct Episode {
  double ret = 0.0;
  int length = 0;
  world::Termination end = world::Termination::Running;
};

template <typename Policy>
Episode run_episode(const world::WorldSpec& spec, const TaskSetup& setup, Policy&& policy) {
  Episode ep;
  auto [state, obs] = world::reset(spec, setup.env);
  world::ObservationVector x = world::flatten_observation(obs, spec.arena_half_extent, setup.env);
  while (state.terminated == world::Termination::Running) {
    const ad::Vector a = policy(x);
    auto [next, result] = world::step(state, {a[0], a[1]}, setup.env);
    ep.ret += rewards::reward(result, setup.reward);
    ++ep.length;
    state = std::move(next);
    x = world::flatten_observation(result.observation, spec.arena_half_extent, setup.env);
  }
  ep.end = state.terminated;
  return ep;
}

}  // namespace

nlohmann::json to_json(const EvaluationSummary& s) {
  return {{"episodes", s.episodes},       {"mean_return", s.mean_return},
          {"std_return", s.std_return},   {"goal_rate", s.goal_rate},
          {"collision_rate", s.collision_rate}, {"mean_length", s.mean_length},
          {"adapted", s.adapted}};
}

ad::Vector deterministic_action(const Checkpoint& ckpt, const world::ObservationVector& obs) {
  if (ckpt.algorithm == Algorithm::Maml) return ad::policy_mean(ckpt.policy, obs);
  return ad::mlp_apply(ckpt.actor, obs.transpose()).row(0).transpose();
}

EvaluationSummary evaluate(const Checkpoint& ckpt, const TaskSetup& setup, int n_episodes,
                           std::uint64_t seed, bool adapt) {
  if (adapt && ckpt.algorithm != Algorithm::Maml)
    throw ConfigError("--adapt is only meaningful for MAML checkpoints");
  check_architecture(ckpt);

  EvaluationSummary s;
  s.adapted = adapt;
  if (n_episodes <= 0) return s;

  const maml::MamlConfig mcfg = adapt ? ckpt.config().maml : maml::MamlConfig{};
  std::vector<double> returns;
  double lengths = 0.0;
  int goals = 0, collisions = 0;
  for (int e = 0; e < n_episodes; ++e) {
    const world::WorldSpec spec =
        world::sample_task(evaluation_task_seed(seed, e), setup.task, setup.env);
    Checkpoint scored = ckpt;
    if (adapt) {
      const auto trajs = maml::collect_trajectories(
          ckpt.policy, spec, mcfg.trajectories_per_task, setup.env.horizon, setup.reward, setup.env,
          derive_seed(seed, {static_cast<std::uint64_t>(e), 1}));
      const auto batch = maml::make_batch(trajs, mcfg, setup.env.horizon);
      const ad::Tensor theta = ad::Tensor::vector(ckpt.policy.flat());
      maml::MamlConfig first = mcfg;
      first.first_order = true;
      scored.policy =
          ckpt.policy.with_flat(maml::inner_adapt(theta, ckpt.policy.mean_net.shape, batch, first).value());
    }
    const Episode ep = run_episode(spec, setup, [&](const world::ObservationVector& x) {
      return deterministic_action(scored, x);
    });
    returns.push_back(ep.ret);
    lengths += ep.length;
    goals += ep.end == world::Termination::GoalReached;
    collisions += ep.end == world::Termination::Collided;
  }

  const double n = static_cast<double>(n_episodes);
  s.episodes = n_episodes;
  const Eigen::Map<const Vector> r(returns.data(), static_cast<Eigen::Index>(returns.size()));
  s.mean_return = r.mean();
  s.std_return = std::sqrt((r.array() - s.mean_return).square().sum() / n);
  s.goal_rate = goals / n;
  s.collision_rate = collisions / n;
  s.mean_length = lengths / n;
  return s;
}

std::size_t export_rollout(const Checkpoint& ckpt, std::uint64_t task_seed,
                           const std::filesystem::path& out_path) {
  check_architecture(ckpt);
  const ExperimentConfig cfg = ckpt.config();
  const TaskSetup& setup = cfg.setup;
  const world::WorldSpec spec = world::sample_task(task_seed, setup.task, setup.env);

  std::ofstream out(out_path);
  if (!out) throw std::runtime_error("cannot write " + out_path.string());

  nlohmann::json header = {{"type", "header"},
                           {"algorithm", to_string(ckpt.algorithm)},
                           {"checkpoint_step", ckpt.step},
                           {"task_seed", task_seed},
                           {"task", spec},
                           {"reward_variant", rewards::to_string(setup.reward.variant)},
                           {"horizon", setup.env.horizon},
                           {"version", version_string()}};
  out << header.dump() << '\n';

  auto [state, obs] = world::reset(spec, setup.env);
  world::ObservationVector x = world::flatten_observation(obs, spec.arena_half_extent, setup.env);
  std::size_t steps = 0;
  while (state.terminated == world::Termination::Running) {
    const ad::Vector a = deterministic_action(ckpt, x);
    const world::Action act = world::Action{a[0], a[1]}.clamped();
    auto [next, result] = world::step(state, act, setup.env);
    const double r = rewards::reward(result, setup.reward);
    const auto& p = next.pose;
    nlohmann::json row = {{"step", next.step_count},
                          {"x", p.x},
                          {"y", p.y},
                          {"theta", p.theta},
                          {"thrust", act.thrust},
                          {"steer", act.steer},
                          {"reward", r},
                          {"lidar_min", result.observation.lidar.minCoeff()},
                          {"event", world::to_string(result.event)},
                          {"termination", world::to_string(next.terminated)}};
    out << row.dump() << '\n';
    ++steps;
    state = std::move(next);
    x = world::flatten_observation(result.observation, spec.arena_half_extent, setup.env);
  }
  if (!out) throw std::runtime_error("write failed: " + out_path.string());
  return steps;
}

}  // namespace metanav::harness
