#pragma once

#include <cstdint>

#include <json.hpp>

#include "metanav/autodiff/mlp.hpp"
#include "metanav/random.hpp"

namespace metanav::ad {

/// Diagonal Gaussian policy with an MLP mean and a state-independent log-std.
///
/// The differentiable parameter vector of the whole policy is the flat column
/// [mean_net.values; log_std], see flat()/from_flat().
struct GaussianPolicy {
  ParamVector mean_net;
  Vector log_std;

  GaussianPolicy() = default;
  GaussianPolicy(ParamVector mean, Vector log_std);

  Eigen::Index action_dim() const { return mean_net.shape.output_dim; }
  Eigen::Index flat_size() const { return mean_net.size() + log_std.size(); }

  Vector flat() const;
  GaussianPolicy with_flat(const Vector& flat) const;
};

/// Policy with freshly initialized mean weights and log_std filled with `initial_log_std`.
GaussianPolicy make_gaussian_policy(const MlpShape& shape, std::uint64_t seed,
                                    double initial_log_std = 0.0);

/// Differentiable views into a flat policy parameter column.
struct PolicyOutputs {
  Tensor mean;     // batch x d
  Tensor log_std;  // 1 x d
};
PolicyOutputs policy_outputs(const Tensor& flat, const MlpShape& shape, const Tensor& obs);

/// Per-row log density of `action` (batch x d) under N(mean, diag(exp(log_std))^2);
/// `log_std` is 1 x d. Returns batch x 1.
Tensor gaussian_log_prob(const Tensor& mean, const Tensor& log_std, const Tensor& action);
Tensor gaussian_log_prob(const GaussianPolicy& policy, const Tensor& obs, const Tensor& action);

/// Batch mean of KL(p || q) between diagonal Gaussians, rank 0.
Tensor kl_diag_gaussian(const Tensor& p_mean, const Tensor& p_log_std, const Tensor& q_mean,
                        const Tensor& q_log_std);

/// Mean action for a single observation row, graph-free.
Vector policy_mean(const GaussianPolicy& policy, const Eigen::Ref<const Vector>& obs);

/// Draws mean + sigma * noise; the caller clamps before applying to the world.
Vector sample_action(const GaussianPolicy& policy, const Eigen::Ref<const Vector>& obs, Rng& rng);

void to_json(nlohmann::json& j, const GaussianPolicy& p);
void from_json(const nlohmann::json& j, GaussianPolicy& p);

}  // namespace metanav::ad
