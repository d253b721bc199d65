#include <cmath>

#include "metanav/maml.hpp"

namespace metanav::maml {

Vector conjugate_gradient(const std::function<Vector(const Vector&)>& apply, const Vector& b,
                          int iterations, double residual_tol) {
  Vector x = Vector::Zero(b.size());
  Vector r = b;
  Vector p = b;
  double rr = r.squaredNorm();
  for (int i = 0; i < iterations && rr > residual_tol; ++i) {
    const Vector ap = apply(p);
    const double curvature = p.dot(ap);
    if (!(curvature > 0.0) || !std::isfinite(curvature)) break;
    const double alpha = rr / curvature;
    x += alpha * p;
    r -= alpha * ap;
    const double rr_next = r.squaredNorm();
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  return x;
}

TrustRegionResult trust_region_step(const Vector& theta, const ScalarFn& surrogate,
                                    const ScalarFn& kl, const TrustRegionConfig& cfg) {
  TrustRegionResult result;
  result.theta = theta;

  Tensor params = Tensor::vector(theta, true);
  Tensor loss = surrogate(params);
  result.surrogate_before = loss.item();
  result.surrogate_after = result.surrogate_before;
  const Vector g = ad::grad(loss, params, {.allow_unused = true}).value();
  if (!g.allFinite() || !std::isfinite(result.surrogate_before))
    throw NonFiniteError("trust region: non-finite surrogate gradient");
  result.full_step = Vector::Zero(theta.size());
  if (g.squaredNorm() == 0.0) return result;

  Tensor kl_grad = ad::grad(kl(params), params, {.create_graph = true, .allow_unused = true});
  auto fisher_product = [&](const Vector& v) -> Vector {
    Tensor gv = dot(kl_grad, Tensor::vector(v));
    Vector hv = gv.requires_grad() ? Vector(ad::grad(gv, params, {.allow_unused = true}).value())
                                   : Vector::Zero(v.size());
    return hv + cfg.cg_damping * v;
  };

  const Vector direction = conjugate_gradient(fisher_product, -g, cfg.cg_iterations);
  const double shs = 0.5 * direction.dot(fisher_product(direction));
  if (!(shs > 0.0) || !std::isfinite(shs)) return result;
  result.full_step = direction * std::sqrt(cfg.max_kl / shs);

  double fraction = 1.0;
  for (int k = 0; k < cfg.backtracks; ++k, fraction *= cfg.backtrack_ratio) {
    const Vector candidate = theta + fraction * result.full_step;
    Tensor probe = Tensor::vector(candidate, true);
    const double new_loss = surrogate(probe).item();
    const double new_kl = kl(probe).item();
    if (std::isfinite(new_loss) && std::isfinite(new_kl) && new_loss < result.surrogate_before &&
        new_kl <= cfg.max_kl) {
      result.theta = candidate;
      result.accepted = true;
      result.surrogate_after = new_loss;
      result.kl = new_kl;
      result.backtracks_used = k;
      return result;
    }
  }
  result.backtracks_used = cfg.backtracks;
  return result;
}

TrustRegionResult trpo_meta_step(const Vector& theta, const std::vector<AdaptedTask>& tasks,
                                 const ad::MlpShape& shape, const MamlConfig& cfg) {
  TrustRegionConfig tr{cfg.kl_bound, cfg.cg_iterations, cfg.cg_damping, cfg.line_search_backtracks,
                       cfg.line_search_ratio};
  return trust_region_step(
      theta, [&](const Tensor& t) { return meta_surrogate(t, tasks, shape, cfg); },
      [&](const Tensor& t) { return meta_kl(t, tasks, shape, cfg); }, tr);
}

}  // namespace metanav::maml
