#include <algorithm>
#include <cmath>
#include <random>

#include "metanav/td3.hpp"

namespace metanav::td3 {

namespace {

Matrix concat(const Eigen::Ref<const Matrix>& s, const Eigen::Ref<const Matrix>& a) {
  Matrix x(s.rows(), s.cols() + a.cols());
  x << s, a;
  return x;
}

void require_finite(const Vector& g, const char* what) {
  if (!g.allFinite()) throw NonFiniteError(std::string(what) + ": non-finite gradient");
}

}  // namespace

void Td3Config::check() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("td3 config: ") + what); };
  if (prefill > buffer_capacity) fail("prefill must not exceed buffer_capacity");
  if (buffer_capacity > static_cast<std::size_t>(std::max<long>(total_steps, 0)))
    fail("buffer_capacity must not exceed total_steps");
  if (!(tau > 0.0 && tau < 1.0)) fail("tau must lie in (0, 1)");
  if (policy_delay < 1) fail("policy_delay must be >= 1");
  if (exploration_sigma < 0.0 || smoothing_sigma < 0.0 || noise_clip < 0.0)
    fail("noise parameters must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (!(actor_lr > 0.0 && critic_lr > 0.0)) fail("learning rates must be > 0");
  if (checkpoint_every < 1) fail("checkpoint_every must be >= 1");
  if (moving_average_window < 1) fail("moving_average_window must be >= 1");
}

Vector select_action(const ParamVector& actor, const Eigen::Ref<const Vector>& obs, double sigma,
                     Rng& rng) {
  Vector a = ad::mlp_apply(actor, obs.transpose()).row(0).transpose();
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index i = 0; i < a.size(); ++i) a[i] += noise(rng);
  }
  return a.cwiseMax(-1.0).cwiseMin(1.0);
}

Vector critic_values(const ParamVector& critic, const Eigen::Ref<const Matrix>& s,
                     const Eigen::Ref<const Matrix>& a) {
  return ad::mlp_apply(critic, concat(s, a)).col(0);
}

Vector critic_target(const Batch& batch, const ParamVector& target_actor,
                     const ParamVector& target_critic1, const ParamVector& target_critic2,
                     const Td3Config& cfg, const Matrix& noise) {
  Matrix next_a = ad::mlp_apply(target_actor, batch.s_next);
  next_a += noise.cwiseMax(-cfg.noise_clip).cwiseMin(cfg.noise_clip);
  next_a = next_a.cwiseMax(-1.0).cwiseMin(1.0);
  const Vector q1 = critic_values(target_critic1, batch.s_next, next_a);
  const Vector q2 = critic_values(target_critic2, batch.s_next, next_a);
  return batch.r.array() + (1.0 - batch.done.array()) * cfg.gamma * q1.cwiseMin(q2).array();
}

Vector critic_target(const Batch& batch, const ParamVector& target_actor,
                     const ParamVector& target_critic1, const ParamVector& target_critic2,
                     const Td3Config& cfg, Rng& rng) {
  Matrix noise(batch.size(), target_actor.shape.output_dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = cfg.smoothing_sigma * normal(rng);
  return critic_target(batch, target_actor, target_critic1, target_critic2, cfg, noise);
}

Tensor critic_loss(const Tensor& critic_params, const ad::MlpShape& shape, const Batch& batch,
                   const Vector& y) {
  Tensor q = ad::mlp_forward(critic_params, shape, Tensor::matrix(concat(batch.s, batch.a)));
  return mean(square(sub(q, Tensor::matrix(Matrix(y)))));
}

CriticLosses update_critics(ParamVector& critic1, ParamVector& critic2, const Batch& batch,
                            const Vector& y, Optimizer& opt1, Optimizer& opt2) {
  CriticLosses losses;
  auto update = [&](ParamVector& critic, Optimizer& opt) {
    Tensor params = Tensor::vector(critic.values, true);
    Tensor loss = critic_loss(params, critic.shape, batch, y);
    const double value = loss.item();
    if (!std::isfinite(value)) throw NonFiniteError("critic update: non-finite loss");
    const Vector g = ad::grad(loss, params).value();
    require_finite(g, "critic update");
    opt.step(critic.values, g);
    return value;
  };
  losses.critic1 = update(critic1, opt1);
  losses.critic2 = update(critic2, opt2);
  return losses;
}

Tensor actor_loss(const Tensor& actor_params, const ad::MlpShape& actor_shape,
                  const ParamVector& critic1, const Batch& batch) {
  Tensor s = Tensor::matrix(batch.s);
  Tensor a = ad::mlp_forward(actor_params, actor_shape, s);
  Tensor q = ad::mlp_forward(critic1, hconcat(s, a));
  return neg(mean(q));
}

Networks make_networks(int obs_dim, int act_dim, const std::vector<int>& hidden,
                       std::uint64_t seed) {
  const ad::MlpShape actor_shape{obs_dim, hidden, act_dim, ad::Activation::ReLU,
                                 ad::Activation::Tanh};
  const ad::MlpShape critic_shape{obs_dim + act_dim, hidden, 1, ad::Activation::ReLU,
                                  ad::Activation::Identity};
  Networks n;
  n.actor = ad::init_params(actor_shape, derive_seed(seed, {1}));
  n.critic1 = ad::init_params(critic_shape, derive_seed(seed, {2}));
  n.critic2 = ad::init_params(critic_shape, derive_seed(seed, {3}));
  n.actor_target = n.actor;
  n.critic1_target = n.critic1;
  n.critic2_target = n.critic2;
  return n;
}

Agent::Agent(int obs_dim, int act_dim, const Td3Config& cfg, std::uint64_t seed)
    : cfg_(cfg),
      nets_(make_networks(obs_dim, act_dim, cfg.hidden_dims, seed)),
      actor_opt_(nets_.actor.size(), cfg.actor_lr),
      critic1_opt_(nets_.critic1.size(), cfg.critic_lr),
      critic2_opt_(nets_.critic2.size(), cfg.critic_lr) {}

Vector Agent::act(const Eigen::Ref<const Vector>& obs, double sigma, Rng& rng) const {
  return select_action(nets_.actor, obs, sigma, rng);
}

Vector Agent::act_deterministic(const Eigen::Ref<const Vector>& obs) const {
  Rng unused(0);
  return select_action(nets_.actor, obs, 0.0, unused);
}

Agent::StepStats Agent::train_step(const ReplayBuffer& buffer, Rng& rng) {
  const Batch batch = stack(buffer.sample(cfg_.batch_size, rng));
  const Vector y =
      critic_target(batch, nets_.actor_target, nets_.critic1_target, nets_.critic2_target, cfg_, rng);
  StepStats stats;
  stats.losses = update_critics(nets_.critic1, nets_.critic2, batch, y, critic1_opt_, critic2_opt_);
  ++updates_;
  stats.actor_updated = update_actor_and_targets(batch, updates_);
  return stats;
}

bool Agent::update_actor_and_targets(const Batch& batch, long update_index) {
  if (update_index % cfg_.policy_delay != 0) return false;
  Tensor params = Tensor::vector(nets_.actor.values, true);
  const Vector g = ad::grad(actor_loss(params, nets_.actor.shape, nets_.critic1, batch), params).value();
  require_finite(g, "actor update");
  actor_opt_.step(nets_.actor.values, g);
  soft_update(nets_.critic1_target.values, nets_.critic1.values, cfg_.tau);
  soft_update(nets_.critic2_target.values, nets_.critic2.values, cfg_.tau);
  soft_update(nets_.actor_target.values, nets_.actor.values, cfg_.tau);
  return true;
}

}  // namespace metanav::td3
