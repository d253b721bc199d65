#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "metanav/autodiff/tensor.hpp"

namespace metanav::ad {

enum class Activation { ReLU, Tanh, Identity };

std::string to_string(Activation a);
Activation parse_activation(const std::string& s);

struct LayerLayout {
  Eigen::Index fan_in = 0;
  Eigen::Index fan_out = 0;
  Eigen::Index weight_offset = 0;  // fan_in x fan_out, row-major
  Eigen::Index bias_offset = 0;    // fan_out
};

struct MlpShape {
  int input_dim = 1;
  std::vector<int> hidden_dims;
  int output_dim = 1;
  Activation hidden_activation = Activation::ReLU;
  Activation output_activation = Activation::Tanh;

  std::vector<LayerLayout> layout() const;
  Eigen::Index param_count() const;
  /// Throws std::invalid_argument for a dimension < 1.
  void check() const;

  bool operator==(const MlpShape&) const = default;
};

/// Flat parameter storage for one MLP; layer k occupies
/// [W_k (row-major fan_in x fan_out), b_k] in order.
struct ParamVector {
  MlpShape shape;
  Vector values;

  ParamVector() = default;
  ParamVector(MlpShape s, Vector v);
  explicit ParamVector(const MlpShape& s);  // zero-initialized

  Eigen::Index size() const { return values.size(); }
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
ParamVector init_params(const MlpShape& shape, std::uint64_t seed);

/// Differentiable forward pass; `params` is a column of length shape.param_count(),
/// `input` is batch x input_dim.
Tensor mlp_forward(const Tensor& params, const MlpShape& shape, const Tensor& input);
Tensor mlp_forward(const ParamVector& params, const Tensor& input);

/// Graph-free forward pass on plain matrices.
Matrix mlp_apply(const ParamVector& params, const Eigen::Ref<const Matrix>& input);

void to_json(nlohmann::json& j, const MlpShape& s);
void from_json(const nlohmann::json& j, MlpShape& s);
void to_json(nlohmann::json& j, const ParamVector& p);
void from_json(const nlohmann::json& j, ParamVector& p);

}  // namespace metanav::ad
