#include "metanav/autodiff/gaussian.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace metanav::ad {

namespace {
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
}

GaussianPolicy::GaussianPolicy(ParamVector mean, Vector ls)
    : mean_net(std::move(mean)), log_std(std::move(ls)) {
  if (log_std.size() != mean_net.shape.output_dim)
    throw ShapeError("GaussianPolicy: log_std length must equal the action dimension");
  if (!log_std.allFinite()) throw std::invalid_argument("GaussianPolicy: log_std must be finite");
}

Vector GaussianPolicy::flat() const {
  Vector v(flat_size());
  v << mean_net.values, log_std;
  return v;
}

GaussianPolicy GaussianPolicy::with_flat(const Vector& flat) const {
  if (flat.size() != flat_size()) throw ShapeError("GaussianPolicy::with_flat: size mismatch");
  return {ParamVector(mean_net.shape, flat.head(mean_net.size())), flat.tail(log_std.size())};
}

GaussianPolicy make_gaussian_policy(const MlpShape& shape, std::uint64_t seed,
                                    double initial_log_std) {
  return {init_params(shape, seed), Vector::Constant(shape.output_dim, initial_log_std)};
}

PolicyOutputs policy_outputs(const Tensor& flat, const MlpShape& shape, const Tensor& obs) {
  const Eigen::Index n = shape.param_count();
  const Eigen::Index d = shape.output_dim;
  if (flat.rows() != n + d) throw ShapeError("policy_outputs: flat parameter size mismatch");
  Tensor mean = mlp_forward(slice(flat, 0, n), shape, obs);
  Tensor log_std = reshape(slice(flat, n, d), 1, d);
  return {mean, log_std};
}

Tensor gaussian_log_prob(const Tensor& mean, const Tensor& log_std, const Tensor& action) {
  if (action.rows() != mean.rows() || action.cols() != mean.cols())
    throw ShapeError("gaussian_log_prob: action shape must match the mean");
  Tensor z = mul(sub(action, mean), exp(neg(log_std)));
  Tensor per_dim = add_scalar(neg(add(scale(square(z), 0.5), log_std)), -kHalfLog2Pi);
  return sum_cols(per_dim);
}

Tensor gaussian_log_prob(const GaussianPolicy& policy, const Tensor& obs, const Tensor& action) {
  auto out = policy_outputs(Tensor::vector(policy.flat()), policy.mean_net.shape, obs);
  return gaussian_log_prob(out.mean, out.log_std, action);
}

Tensor kl_diag_gaussian(const Tensor& p_mean, const Tensor& p_log_std, const Tensor& q_mean,
                        const Tensor& q_log_std) {
  if (p_mean.rows() != q_mean.rows() || p_mean.cols() != q_mean.cols())
    throw ShapeError("kl_diag_gaussian: mean shapes differ");
  // log(sq/sp) + (sp^2 + (mp - mq)^2) / (2 sq^2) - 1/2
  Tensor var_p = exp(scale(p_log_std, 2.0));
  Tensor var_q = exp(scale(q_log_std, 2.0));
  Tensor diff = sub(p_mean, q_mean);
  Tensor per_dim = add_scalar(
      add(sub(q_log_std, p_log_std), div(add(var_p, square(diff)), scale(var_q, 2.0))), -0.5);
  return scale(sum(per_dim), 1.0 / static_cast<double>(p_mean.rows()));
}

Vector policy_mean(const GaussianPolicy& policy, const Eigen::Ref<const Vector>& obs) {
  return mlp_apply(policy.mean_net, obs.transpose()).row(0).transpose();
}

Vector sample_action(const GaussianPolicy& policy, const Eigen::Ref<const Vector>& obs, Rng& rng) {
  Vector mean = policy_mean(policy, obs);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < mean.size(); ++i) mean[i] += std::exp(policy.log_std[i]) * normal(rng);
  return mean;
}

void to_json(nlohmann::json& j, const GaussianPolicy& p) {
  j = {{"mean_net", p.mean_net},
       {"log_std", std::vector<double>(p.log_std.data(), p.log_std.data() + p.log_std.size())}};
}

void from_json(const nlohmann::json& j, GaussianPolicy& p) {
  auto mean = j.at("mean_net").get<ParamVector>();
  auto raw = j.at("log_std").get<std::vector<double>>();
  p = GaussianPolicy(std::move(mean),
                     Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size())));
}

}  // namespace metanav::ad
