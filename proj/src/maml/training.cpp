#include "metanav/maml.hpp"
#include "metanav/random.hpp"

namespace metanav::maml {

namespace {

enum SeedStream : std::uint64_t { kPreRollouts = 1, kPostRollouts = 2 };

double mean_return(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& t : trajs) acc += t.total_return();
  return acc / static_cast<double>(trajs.size());
}

}  // namespace

ad::GaussianPolicy make_policy(const MamlConfig& cfg, std::uint64_t seed) {
  ad::MlpShape shape{world::kObservationDim, cfg.hidden_dims, world::kActionDim,
                     ad::Activation::ReLU, ad::Activation::Tanh};
  return ad::make_gaussian_policy(shape, derive_seed(seed, {0}), cfg.initial_log_std);
}

std::vector<AdaptedTask> build_adapted_tasks(const ad::GaussianPolicy& policy,
                                             const std::vector<world::WorldSpec>& tasks,
                                             const TaskSetup& setup, const MamlConfig& cfg,
                                             std::uint64_t seed) {
  const int horizon = setup.env.horizon;
  const ad::MlpShape& shape = policy.mean_net.shape;
  Tensor theta = Tensor::vector(policy.flat(), true);
  std::vector<AdaptedTask> out;
  out.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    AdaptedTask a;
    a.task = tasks[i];
    const auto idx = static_cast<std::uint64_t>(i);
    a.pre_trajectories = collect_trajectories(policy, a.task, cfg.trajectories_per_task, horizon,
                                              setup.reward, setup.env,
                                              derive_seed(seed, {kPreRollouts, idx}));
    a.pre_batch = make_batch(a.pre_trajectories, cfg, horizon);
    a.theta_prime = inner_adapt(theta, shape, a.pre_batch, cfg);
    const ad::GaussianPolicy adapted = policy.with_flat(a.theta_prime.value());
    a.post_trajectories = collect_trajectories(adapted, a.task, cfg.trajectories_per_task, horizon,
                                               setup.reward, setup.env,
                                               derive_seed(seed, {kPostRollouts, idx}));
    a.post_batch = make_batch(a.post_trajectories, cfg, horizon);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<MamlMetricsRow> run_meta_training(const MamlConfig& cfg, const TaskSetup& setup,
                                              std::uint64_t seed, MamlSink& sink) {
  cfg.check();
  setup.reward.check();
  ad::GaussianPolicy policy = make_policy(cfg, seed);
  const ad::MlpShape shape = policy.mean_net.shape;
  std::vector<MamlMetricsRow> rows;
  sink.on_checkpoint(0, policy);

  for (int it = 0; it < cfg.meta_iterations; ++it) {
    std::vector<world::WorldSpec> tasks;
    tasks.reserve(static_cast<std::size_t>(cfg.meta_batch_size));
    for (int i = 0; i < cfg.meta_batch_size; ++i)
      tasks.push_back(world::sample_task(training_task_seed(seed, it, i), setup.task, setup.env));

    std::vector<AdaptedTask> adapted;
    TrustRegionResult step;
    try {
      adapted = build_adapted_tasks(policy, tasks, setup, cfg,
                                    derive_seed(seed, {static_cast<std::uint64_t>(it) + 1}));
      step = trpo_meta_step(policy.flat(), adapted, shape, cfg);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("meta-iteration " + std::to_string(it + 1) + ": " + e.what());
    }
    if (!step.theta.allFinite())
      throw NonFiniteError("meta-iteration " + std::to_string(it + 1) + ": non-finite parameters");

    MamlMetricsRow row;
    row.meta_iteration = it + 1;
    double pre = 0.0, post = 0.0;
    int episodes = 0, goals = 0, collisions = 0;
    for (const AdaptedTask& a : adapted) {
      pre += mean_return(a.pre_trajectories);
      post += mean_return(a.post_trajectories);
      for (const Trajectory& t : a.post_trajectories) {
        ++episodes;
        goals += t.terminal_event == world::Termination::GoalReached;
        collisions += t.terminal_event == world::Termination::Collided;
      }
    }
    const double n_tasks = static_cast<double>(adapted.size());
    row.mean_return_pre = pre / n_tasks;
    row.mean_return_post = post / n_tasks;
    row.mean_kl = step.accepted ? step.kl : 0.0;
    row.goal_rate = episodes ? static_cast<double>(goals) / episodes : 0.0;
    row.collision_rate = episodes ? static_cast<double>(collisions) / episodes : 0.0;

    policy = policy.with_flat(step.theta);
    rows.push_back(row);
    sink.on_row(row);
    if ((it + 1) % cfg.checkpoint_every == 0 || it + 1 == cfg.meta_iterations)
      sink.on_checkpoint(it + 1, policy);
  }
  return rows;
}

}  // namespace metanav::maml
