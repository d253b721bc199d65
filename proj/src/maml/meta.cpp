#include "metanav/maml.hpp"

namespace metanav::maml {

namespace {

void require_finite(const Tensor& g, const char* where) {
  if (!g.value().allFinite()) throw NonFiniteError(std::string(where) + ": non-finite gradient");
}

Tensor column(const Vector& v) { return Tensor::matrix(Matrix(v)); }

}  // namespace

Tensor inner_loss(const Tensor& flat_params, const ad::MlpShape& shape, const TaskBatch& batch) {
  if (batch.size() == 0) throw std::invalid_argument("inner_loss: empty batch");
  auto out = ad::policy_outputs(flat_params, shape, Tensor::matrix(batch.observations));
  Tensor log_prob = ad::gaussian_log_prob(out.mean, out.log_std, Tensor::matrix(batch.actions));
  return scale(sum(mul(log_prob, column(batch.advantages))),
               -1.0 / static_cast<double>(batch.size()));
}

Tensor adapt(const Tensor& theta, const LossFn& loss, double alpha, int steps, bool create_graph) {
  Tensor current = theta;
  if (!current.requires_grad()) {
    current = Tensor::vector(theta.value(), true);
    create_graph = false;
  }
  for (int s = 0; s < steps; ++s) {
    Tensor g = ad::grad(loss(current), current, {.create_graph = create_graph});
    require_finite(g, "inner adaptation");
    current = sub(current, scale(g, alpha));
  }
  return theta.requires_grad() ? current : current.detach();
}

Tensor inner_adapt(const Tensor& theta, const ad::MlpShape& shape, const TaskBatch& batch,
                   const MamlConfig& cfg) {
  return adapt(
      theta, [&](const Tensor& t) { return inner_loss(t, shape, batch); }, cfg.inner_lr,
      cfg.inner_steps, !cfg.first_order);
}

Tensor meta_objective(const Tensor& theta, const std::vector<AdaptedTask>& tasks,
                      const ad::MlpShape& shape, const MamlConfig& cfg) {
  Tensor total = Tensor::scalar(0.0);
  for (const AdaptedTask& task : tasks) {
    Tensor adapted = inner_adapt(theta, shape, task.pre_batch, cfg);
    total = add(total, inner_loss(adapted, shape, task.post_batch));
  }
  return total;
}

Tensor meta_surrogate(const Tensor& theta, const std::vector<AdaptedTask>& tasks,
                      const ad::MlpShape& shape, const MamlConfig& cfg) {
  Tensor total = Tensor::scalar(0.0);
  for (const AdaptedTask& task : tasks) {
    const TaskBatch& post = task.post_batch;
    Tensor obs = Tensor::matrix(post.observations);
    Tensor actions = Tensor::matrix(post.actions);
    Tensor old_logp;
    {
      ad::NoGradGuard no_grad;
      auto old = ad::policy_outputs(task.theta_prime.detach(), shape, obs);
      old_logp = ad::gaussian_log_prob(old.mean, old.log_std, actions);
    }
    Tensor adapted = inner_adapt(theta, shape, task.pre_batch, cfg);
    auto now = ad::policy_outputs(adapted, shape, obs);
    Tensor ratio = exp(sub(ad::gaussian_log_prob(now.mean, now.log_std, actions), old_logp));
    total = add(total, scale(sum(mul(ratio, column(post.advantages))),
                             -1.0 / static_cast<double>(post.size())));
  }
  return total;
}

Tensor meta_kl(const Tensor& theta, const std::vector<AdaptedTask>& tasks,
               const ad::MlpShape& shape, const MamlConfig& cfg) {
  Tensor total = Tensor::scalar(0.0);
  for (const AdaptedTask& task : tasks) {
    Tensor obs = Tensor::matrix(task.post_batch.observations);
    ad::PolicyOutputs old;
    {
      ad::NoGradGuard no_grad;
      old = ad::policy_outputs(task.theta_prime.detach(), shape, obs);
    }
    Tensor adapted = inner_adapt(theta, shape, task.pre_batch, cfg);
    auto now = ad::policy_outputs(adapted, shape, obs);
    total = add(total, ad::kl_diag_gaussian(old.mean, old.log_std, now.mean, now.log_std));
  }
  return scale(total, 1.0 / static_cast<double>(std::max<std::size_t>(tasks.size(), 1)));
}

}  // namespace metanav::maml
