#pragma once

// Twin-delayed deterministic policy gradient: replay buffer, exploration,
// clipped target smoothing, twin-critic regression, delayed actor updates and
// soft (Polyak) target tracking.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "metanav/autodiff/adam.hpp"
#include "metanav/autodiff/mlp.hpp"
#include "metanav/random.hpp"
#include "metanav/setup.hpp"

namespace metanav::td3 {

using ad::Matrix;
using ad::ParamVector;
using ad::Tensor;
using ad::Vector;

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// done marks goal/collision only; horizon cut-offs keep done = false.
struct Transition {
  Vector s;
  Vector a;
  double r = 0.0;
  Vector s_next;
  bool done = false;
};

class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  /// Appends; at capacity the oldest transition is evicted.
  void push(Transition t);

  /// N uniform draws with replacement. Throws std::out_of_range when size() < N.
  std::vector<Transition> sample(std::size_t n, Rng& rng) const;
  std::vector<std::size_t> sample_indices(std::size_t n, Rng& rng) const;

  /// i-th oldest stored transition.
  const Transition& at(std::size_t i) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return storage_.size(); }

 private:
  std::vector<Transition> storage_;
  std::size_t head_ = 0;  // next write slot
  std::size_t size_ = 0;
};

struct Td3Config {
  std::size_t buffer_capacity = 20'000;
  std::size_t prefill = 10'000;
  long total_steps = 100'000;
  double tau = 0.005;
  int policy_delay = 2;
  double exploration_sigma = 0.1;
  double smoothing_sigma = 0.2;
  double noise_clip = 0.5;
  double gamma = 0.99;
  std::size_t batch_size = 256;
  double actor_lr = 3e-4;
  double critic_lr = 3e-4;
  std::vector<int> hidden_dims{256, 256};
  long checkpoint_every = 10'000;
  int moving_average_window = 100;

  void check() const;
};

/// Column-stacked mini-batch.
struct Batch {
  Matrix s;       // N x obs_dim
  Matrix a;       // N x act_dim
  Vector r;       // N
  Matrix s_next;  // N x obs_dim
  Vector done;    // N, 1.0 for terminal

  Eigen::Index size() const { return r.size(); }
};
Batch stack(const std::vector<Transition>& transitions);

/// clamp(pi(s) + N(0, sigma^2), -1, 1) per dimension.
Vector select_action(const ParamVector& actor, const Eigen::Ref<const Vector>& obs, double sigma,
                     Rng& rng);

/// Critic value rows Q(s, a) for a batch, graph-free.
Vector critic_values(const ParamVector& critic, const Eigen::Ref<const Matrix>& s,
                     const Eigen::Ref<const Matrix>& a);

/// y = r + (1 - done) * gamma * min(Q1', Q2')(s', a~) with
/// a~ = clamp(pi'(s') + clip(N(0, smoothing_sigma^2), -c, c), -1, 1).
Vector critic_target(const Batch& batch, const ParamVector& target_actor,
                     const ParamVector& target_critic1, const ParamVector& target_critic2,
                     const Td3Config& cfg, Rng& rng);

/// Same as above with the smoothing noise supplied explicitly (N x act_dim, pre-clip).
Vector critic_target(const Batch& batch, const ParamVector& target_actor,
                     const ParamVector& target_critic1, const ParamVector& target_critic2,
                     const Td3Config& cfg, const Matrix& noise);

/// (1/N) sum (y - Q(s, a))^2, differentiable w.r.t. the critic parameter column.
Tensor critic_loss(const Tensor& critic_params, const ad::MlpShape& shape, const Batch& batch,
                   const Vector& y);

/// Gradient step on a flat parameter column.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(Vector& params, const Eigen::Ref<const Vector>& gradient) = 0;
};

class SgdOptimizer final : public Optimizer {
 public:
  explicit SgdOptimizer(double lr) : lr_(lr) {}
  void step(Vector& params, const Eigen::Ref<const Vector>& gradient) override {
    params -= lr_ * gradient;
  }

 private:
  double lr_;
};

class AdamOptimizer final : public Optimizer {
 public:
  AdamOptimizer(Eigen::Index size, double lr) : adam_(size, {.lr = lr}) {}
  void step(Vector& params, const Eigen::Ref<const Vector>& gradient) override {
    adam_.step(params, gradient);
  }

 private:
  ad::Adam adam_;
};

struct CriticLosses {
  double critic1 = 0.0;
  double critic2 = 0.0;
};

/// One optimizer step per critic on the shared batch and targets. Returns the
/// pre-step losses.
CriticLosses update_critics(ParamVector& critic1, ParamVector& critic2, const Batch& batch,
                            const Vector& y, Optimizer& opt1, Optimizer& opt2);

/// -(1/N) sum Q1(s, pi(s)); its gradient is the negated deterministic policy gradient.
Tensor actor_loss(const Tensor& actor_params, const ad::MlpShape& actor_shape,
                  const ParamVector& critic1, const Batch& batch);

/// target <- tau * source + (1 - tau) * target.
template <typename DerivedT, typename DerivedS>
void soft_update(Eigen::MatrixBase<DerivedT>& target, const Eigen::MatrixBase<DerivedS>& source,
                 double tau) {
  target = tau * source + (1.0 - tau) * target;
}

struct Networks {
  ParamVector actor, critic1, critic2;
  ParamVector actor_target, critic1_target, critic2_target;
};

Networks make_networks(int obs_dim, int act_dim, const std::vector<int>& hidden,
                       std::uint64_t seed);

/// Networks, optimizers and update counter for one TD3 learner.
class Agent {
 public:
  Agent(int obs_dim, int act_dim, const Td3Config& cfg, std::uint64_t seed);

  Vector act(const Eigen::Ref<const Vector>& obs, double sigma, Rng& rng) const;
  Vector act_deterministic(const Eigen::Ref<const Vector>& obs) const;

  struct StepStats {
    CriticLosses losses;
    bool actor_updated = false;
  };
  /// Critic update on a sampled batch, then the delayed actor/target update.
  StepStats train_step(const ReplayBuffer& buffer, Rng& rng);

  /// Actor and target update if `update_index` is a multiple of policy_delay.
  bool update_actor_and_targets(const Batch& batch, long update_index);

  const Networks& networks() const { return nets_; }
  Networks& networks() { return nets_; }
  long updates() const { return updates_; }
  const Td3Config& config() const { return cfg_; }

 private:
  Td3Config cfg_;
  Networks nets_;
  AdamOptimizer actor_opt_;
  AdamOptimizer critic1_opt_;
  AdamOptimizer critic2_opt_;
  long updates_ = 0;
};

struct Td3MetricsRow {
  long episode = 0;
  long env_step = 0;
  double episode_return = 0.0;
  double moving_avg_return = 0.0;
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  bool goal_reached = false;
  bool collided = false;
};

std::string td3_csv_header();
std::string to_csv(const Td3MetricsRow& row);

class Td3Sink {
 public:
  virtual ~Td3Sink() = default;
  virtual void on_row(const Td3MetricsRow& /*row*/) {}
  virtual void on_checkpoint(long /*env_step*/, const ParamVector& /*actor*/) {}
};

std::vector<Td3MetricsRow> run_td3_training(const Td3Config& cfg, const TaskSetup& setup,
                                            std::uint64_t seed, Td3Sink& sink);

}  // namespace metanav::td3
