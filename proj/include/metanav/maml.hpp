#pragma once

// Model-agnostic meta-learning for the navigation world: seeded rollouts,
// linear-feature baseline with generalized advantage estimation, the
// differentiable inner policy-gradient step and a trust-region meta-update.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "metanav/autodiff/gaussian.hpp"
#include "metanav/autodiff/tensor.hpp"
#include "metanav/rewards.hpp"
#include "metanav/setup.hpp"
#include "metanav/world.hpp"

namespace metanav::maml {

using ad::Matrix;
using ad::Tensor;
using ad::Vector;

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One episode. Row t of observations/actions and entry t of rewards belong to
/// the same time step; the observation after the final step is not stored.
/// Actions are the raw Gaussian samples (the world clamps them).
struct Trajectory {
  Matrix observations;  // T x 135
  Matrix actions;       // T x 2
  Vector rewards;       // T
  world::Termination terminal_event = world::Termination::Running;

  Eigen::Index length() const { return rewards.size(); }
  double total_return() const { return rewards.sum(); }
};

struct MamlConfig {
  int meta_iterations = 200;
  int meta_batch_size = 20;
  int trajectories_per_task = 20;  // K
  double inner_lr = 0.1;           // alpha
  double kl_bound = 0.01;          // delta
  double gamma = 0.99;
  double gae_lambda = 0.97;
  int inner_steps = 1;
  int cg_iterations = 10;
  double cg_damping = 1e-2;
  int line_search_backtracks = 10;
  double line_search_ratio = 0.5;
  double baseline_ridge = 1e-5;
  bool normalize_advantages = true;
  bool first_order = false;
  std::vector<int> hidden_dims{100, 100};
  double initial_log_std = 0.0;
  int checkpoint_every = 10;

  /// Throws std::invalid_argument on out-of-range values.
  void check() const;
};

// ---------------------------------------------------------------------------
// Rollouts

/// K seeded episodes of at most `horizon` steps under the stochastic policy.
std::vector<Trajectory> collect_trajectories(const ad::GaussianPolicy& policy,
                                             const world::WorldSpec& task, int K, int horizon,
                                             const rewards::RewardConfig& reward_cfg,
                                             const world::EnvParams& env, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Baseline and advantages

template <typename Derived>
Vector discounted_returns(const Eigen::MatrixBase<Derived>& rewards, double gamma) {
  Vector out(rewards.size());
  double acc = 0.0;
  for (Eigen::Index t = rewards.size() - 1; t >= 0; --t) {
    acc = rewards[t] + gamma * acc;
    out[t] = acc;
  }
  return out;
}

/// Backward recursion A_t = delta_t + gamma * lambda * A_{t+1},
/// delta_t = r_t + gamma V_{t+1} - V_t. `values` has one more entry than `rewards`.
template <typename DerivedR, typename DerivedV>
Vector gae_advantages(const Eigen::MatrixBase<DerivedR>& rewards,
                      const Eigen::MatrixBase<DerivedV>& values, double gamma, double lambda) {
  const Eigen::Index T = rewards.size();
  if (values.size() != T + 1)
    throw std::invalid_argument("gae_advantages: values must have length T + 1");
  Vector adv(T);
  double acc = 0.0;
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    const double delta = rewards[t] + gamma * values[t + 1] - values[t];
    acc = delta + gamma * lambda * acc;
    adv[t] = acc;
  }
  return adv;
}

struct BaselineWeights {
  Vector weights;
  double ridge = 0.0;  // regularization actually used
};

/// Features [obs, obs^2, t/H, (t/H)^2, (t/H)^3, 1] for every step.
Matrix baseline_features(const Trajectory& traj, int horizon);

/// Ridge least squares of discounted returns on baseline_features. The ridge
/// term grows tenfold until the solve is finite; never throws for T > 0.
BaselineWeights fit_linear_baseline(const std::vector<Trajectory>& trajs, double gamma,
                                    int horizon, double ridge = 1e-5);

/// Baseline values for every step plus a terminal 0 (length T + 1).
Vector baseline_values(const BaselineWeights& w, const Trajectory& traj, int horizon);

/// Flattened (observation, action, advantage) rows of a set of trajectories.
struct TaskBatch {
  Matrix observations;
  Matrix actions;
  Vector advantages;

  Eigen::Index size() const { return advantages.size(); }
};

TaskBatch make_batch(const std::vector<Trajectory>& trajs, const MamlConfig& cfg, int horizon);

// ---------------------------------------------------------------------------
// Inner loop

/// -(1/N) sum_t log pi(a_t | x_t) A_t with the advantages held constant.
Tensor inner_loss(const Tensor& flat_params, const ad::MlpShape& shape, const TaskBatch& batch);

using LossFn = std::function<Tensor(const Tensor&)>;

/// `steps` gradient-descent steps theta <- theta - alpha * grad loss(theta).
/// With create_graph the result stays differentiable w.r.t. the input.
Tensor adapt(const Tensor& theta, const LossFn& loss, double alpha, int steps, bool create_graph);

/// adapt() on inner_loss; second order unless cfg.first_order.
Tensor inner_adapt(const Tensor& theta, const ad::MlpShape& shape, const TaskBatch& batch,
                   const MamlConfig& cfg);

struct AdaptedTask {
  world::WorldSpec task;
  Tensor theta_prime;
  std::vector<Trajectory> pre_trajectories;
  std::vector<Trajectory> post_trajectories;
  TaskBatch pre_batch;
  TaskBatch post_batch;
};

/// Sum over tasks of inner_loss at the re-adapted parameters on each post batch.
Tensor meta_objective(const Tensor& theta, const std::vector<AdaptedTask>& tasks,
                      const ad::MlpShape& shape, const MamlConfig& cfg);

// ---------------------------------------------------------------------------
// Trust region

/// Solves A x = b for symmetric positive definite A given only products A v.
/// Stops early on small residual; on non-positive curvature returns the last
/// iterate.
Vector conjugate_gradient(const std::function<Vector(const Vector&)>& apply, const Vector& b,
                          int iterations, double residual_tol = 1e-10);

struct TrustRegionConfig {
  double max_kl = 0.01;
  int cg_iterations = 10;
  double cg_damping = 1e-2;
  int backtracks = 10;
  double backtrack_ratio = 0.5;
};

struct TrustRegionResult {
  Vector theta;
  bool accepted = false;
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double kl = 0.0;
  int backtracks_used = 0;
  Vector full_step;  // trust-region-scaled natural step before backtracking
};

using ScalarFn = std::function<Tensor(const Tensor&)>;

/// Natural-gradient step on `surrogate`, with the Fisher matrix given as the
/// Hessian of `kl` at theta (kl(theta) must be 0 with zero gradient there).
/// The step is scaled so that 0.5 s^T (F + damping I) s = max_kl, then halved
/// until the surrogate improves and the measured KL <= max_kl. If no candidate
/// passes, the returned theta is the input unchanged.
TrustRegionResult trust_region_step(const Vector& theta, const ScalarFn& surrogate,
                                    const ScalarFn& kl, const TrustRegionConfig& cfg);

/// Importance-weighted surrogate sum_i -mean(exp(log pi_new - log pi_old) A) over
/// post batches, evaluated at the parameters re-adapted from theta.
Tensor meta_surrogate(const Tensor& theta, const std::vector<AdaptedTask>& tasks,
                      const ad::MlpShape& shape, const MamlConfig& cfg);

/// Mean over tasks of KL(pi_old || pi_theta) on each post batch, where pi_old
/// uses the tasks' stored theta_prime values.
Tensor meta_kl(const Tensor& theta, const std::vector<AdaptedTask>& tasks,
               const ad::MlpShape& shape, const MamlConfig& cfg);

TrustRegionResult trpo_meta_step(const Vector& theta, const std::vector<AdaptedTask>& tasks,
                                 const ad::MlpShape& shape, const MamlConfig& cfg);

// ---------------------------------------------------------------------------
// Outer loop

struct MamlMetricsRow {
  int meta_iteration = 0;
  double mean_return_pre = 0.0;
  double mean_return_post = 0.0;
  double mean_kl = 0.0;
  double goal_rate = 0.0;
  double collision_rate = 0.0;
};

std::string maml_csv_header();
std::string to_csv(const MamlMetricsRow& row);

class MamlSink {
 public:
  virtual ~MamlSink() = default;
  virtual void on_row(const MamlMetricsRow& /*row*/) {}
  virtual void on_checkpoint(int /*meta_iteration*/, const ad::GaussianPolicy& /*policy*/) {}
};

/// Builds per-task adapted data for one meta-iteration under `policy`.
std::vector<AdaptedTask> build_adapted_tasks(const ad::GaussianPolicy& policy,
                                             const std::vector<world::WorldSpec>& tasks,
                                             const TaskSetup& setup, const MamlConfig& cfg,
                                             std::uint64_t seed);

ad::GaussianPolicy make_policy(const MamlConfig& cfg, std::uint64_t seed);

std::vector<MamlMetricsRow> run_meta_training(const MamlConfig& cfg, const TaskSetup& setup,
                                              std::uint64_t seed, MamlSink& sink);

}  // namespace metanav::maml
