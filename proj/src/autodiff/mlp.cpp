#include "metanav/autodiff/mlp.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "metanav/random.hpp"

namespace metanav::ad {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Tensor activate(const Tensor& x, Activation a) {
  switch (a) {
    case Activation::ReLU: return relu(x);
    case Activation::Tanh: return tanh(x);
    case Activation::Identity: return x;
  }
  return x;
}

void activate_in_place(Matrix& x, Activation a) {
  switch (a) {
    case Activation::ReLU: x = x.cwiseMax(0.0); break;
    case Activation::Tanh: x = x.array().tanh().matrix(); break;
    case Activation::Identity: break;
  }
}

}  // namespace

std::string to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Identity: return "identity";
  }
  return "unknown";
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::vector<LayerLayout> MlpShape::layout() const {
  std::vector<LayerLayout> layers;
  Eigen::Index offset = 0;
  Eigen::Index fan_in = input_dim;
  auto push = [&](Eigen::Index fan_out) {
    LayerLayout l{fan_in, fan_out, offset, offset + fan_in * fan_out};
    offset = l.bias_offset + fan_out;
    layers.push_back(l);
    fan_in = fan_out;
  };
  for (int h : hidden_dims) push(h);
  push(output_dim);
  return layers;
}

Eigen::Index MlpShape::param_count() const {
  const auto layers = layout();
  return layers.back().bias_offset + layers.back().fan_out;
}

void MlpShape::check() const {
  if (input_dim < 1 || output_dim < 1) throw std::invalid_argument("MLP dims must be >= 1");
  for (int h : hidden_dims)
    if (h < 1) throw std::invalid_argument("MLP hidden dims must be >= 1");
}

ParamVector::ParamVector(MlpShape s, Vector v) : shape(std::move(s)), values(std::move(v)) {
  shape.check();
  if (values.size() != shape.param_count())
    throw ShapeError("ParamVector: expected " + std::to_string(shape.param_count()) +
                     " values, got " + std::to_string(values.size()));
}

ParamVector::ParamVector(const MlpShape& s) : shape(s), values(Vector::Zero(s.param_count())) {
  shape.check();
}

ParamVector init_params(const MlpShape& shape, std::uint64_t seed) {
  ParamVector p(shape);
  Rng rng(mix_seed(seed));
  for (const LayerLayout& l : shape.layout()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < l.fan_in * l.fan_out; ++i) p.values[l.weight_offset + i] = dist(rng);
  }
  return p;
}

Tensor mlp_forward(const Tensor& params, const MlpShape& shape, const Tensor& input) {
  if (params.cols() != 1 || params.rows() != shape.param_count())
    throw ShapeError("mlp_forward: parameter vector does not match the MLP shape");
  if (input.cols() != shape.input_dim)
    throw ShapeError("mlp_forward: input has " + std::to_string(input.cols()) +
                     " columns, expected " + std::to_string(shape.input_dim));
  const auto layers = shape.layout();
  Tensor x = input;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const LayerLayout& l = layers[k];
    Tensor w = reshape(slice(params, l.weight_offset, l.fan_in * l.fan_out), l.fan_in, l.fan_out);
    Tensor b = reshape(slice(params, l.bias_offset, l.fan_out), 1, l.fan_out);
    x = add(matmul(x, w), b);
    x = activate(x, k + 1 < layers.size() ? shape.hidden_activation : shape.output_activation);
  }
  return x;
}

Tensor mlp_forward(const ParamVector& params, const Tensor& input) {
  return mlp_forward(Tensor::vector(params.values), params.shape, input);
}

Matrix mlp_apply(const ParamVector& params, const Eigen::Ref<const Matrix>& input) {
  const MlpShape& shape = params.shape;
  if (input.cols() != shape.input_dim) throw ShapeError("mlp_apply: input width mismatch");
  const auto layers = shape.layout();
  Matrix x = input;
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const LayerLayout& l = layers[k];
    Eigen::Map<const RowMajor> w(params.values.data() + l.weight_offset, l.fan_in, l.fan_out);
    Eigen::Map<const Eigen::RowVectorXd> b(params.values.data() + l.bias_offset, l.fan_out);
    Matrix next = x * w;
    next.rowwise() += b;
    activate_in_place(next, k + 1 < layers.size() ? shape.hidden_activation : shape.output_activation);
    x = std::move(next);
  }
  return x;
}

void to_json(nlohmann::json& j, const MlpShape& s) {
  j = {{"input_dim", s.input_dim},
       {"hidden_dims", s.hidden_dims},
       {"output_dim", s.output_dim},
       {"hidden_activation", to_string(s.hidden_activation)},
       {"output_activation", to_string(s.output_activation)}};
}

void from_json(const nlohmann::json& j, MlpShape& s) {
  s.input_dim = j.at("input_dim").get<int>();
  s.hidden_dims = j.at("hidden_dims").get<std::vector<int>>();
  s.output_dim = j.at("output_dim").get<int>();
  s.hidden_activation = parse_activation(j.at("hidden_activation").get<std::string>());
  s.output_activation = parse_activation(j.at("output_activation").get<std::string>());
  s.check();
}

void to_json(nlohmann::json& j, const ParamVector& p) {
  j = {{"shape", p.shape},
       {"values", std::vector<double>(p.values.data(), p.values.data() + p.values.size())}};
}

void from_json(const nlohmann::json& j, ParamVector& p) {
  auto shape = j.at("shape").get<MlpShape>();
  auto raw = j.at("values").get<std::vector<double>>();
  p = ParamVector(std::move(shape), Eigen::Map<const Vector>(raw.data(), static_cast<Eigen::Index>(raw.size())));
}

}  // namespace metanav::ad
