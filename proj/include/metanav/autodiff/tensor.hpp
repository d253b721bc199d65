#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// A Tensor is a shared handle to a graph node holding a rank-0, rank-1 (column)
// or rank-2 double matrix. Every backward rule is written in terms of Tensor
// operations, so running backward with create_graph = true yields gradients
// that are themselves differentiable (gradients of gradients, Hessian-vector
// products, and so on to any order).
//
// Graph recording is controlled by a thread-local flag; NoGradGuard disables
// it for a scope. Nodes own their parents, never their children, so graphs are
// acyclic and freed when the last handle goes away.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace metanav::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Tensor;

struct Node {
  Matrix value;
  int rank = 2;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<Tensor> parents;
  // Maps the gradient w.r.t. this node's value to one gradient per parent
  // (an empty Tensor means "no contribution").
  std::function<std::vector<Tensor>(const Tensor&)> backward;
};

class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor vector(const Vector& v, bool requires_grad = false);
  static Tensor matrix(const Matrix& m, bool requires_grad = false);
  static Tensor zeros(Eigen::Index rows, Eigen::Index cols, int rank = 2);

  /// Internal: wraps a freshly computed value with its graph record. Records
  /// the node only when grad mode is on and some parent requires grad.
  static Tensor make(Matrix value, int rank, const char* op, std::vector<Tensor> parents,
                     std::function<std::vector<Tensor>(const Tensor&)> backward);

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const;
  int rank() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Eigen::Index size() const { return value().size(); }
  std::vector<Eigen::Index> shape() const;
  bool requires_grad() const;
  const char* op() const;

  /// Value of a single-element tensor.
  double item() const;

  /// Same value, cut from the graph.
  Tensor detach() const;

  const Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}
  std::shared_ptr<Node> node_;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GradError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class GradModeGuard {
 public:
  explicit GradModeGuard(bool enabled);
  ~GradModeGuard();
  GradModeGuard(const GradModeGuard&) = delete;
  GradModeGuard& operator=(const GradModeGuard&) = delete;

 private:
  bool previous_;
};

// Elementwise binary ops broadcast a scalar or a 1 x c row against r x c, and
// an r x 1 column against r x c.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor relu(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);

/// Sum of all entries, rank 0.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
/// r x c -> 1 x c.
Tensor sum_rows(const Tensor& a);
/// r x c -> r x 1.
Tensor sum_cols(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);

/// Sub-block copy; the backward of block is embed and vice versa.
Tensor block(const Tensor& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows,
             Eigen::Index cols);
/// Places `a` at (row, col) inside a zero matrix of size rows x cols.
Tensor embed(const Tensor& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows,
             Eigen::Index cols, int rank = 2);
/// Contiguous range of a column vector.
Tensor slice(const Tensor& v, Eigen::Index offset, Eigen::Index length);
/// Row-major reinterpretation of the entries.
Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols, int rank = 2);
Tensor hconcat(const Tensor& a, const Tensor& b);
Tensor vconcat(const Tensor& a, const Tensor& b);
/// Repeats a scalar, row or column to rows x cols.
Tensor broadcast_to(const Tensor& a, Eigen::Index rows, Eigen::Index cols);
/// Inverse of broadcast_to: sums `a` down to rows x cols.
Tensor sum_to(const Tensor& a, Eigen::Index rows, Eigen::Index cols, int rank);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator-(const Tensor& a) { return neg(a); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }

struct GradOptions {
  bool create_graph = false;
  // When false, an input the output does not depend on raises GradError.
  bool allow_unused = false;
};

/// d(output)/d(inputs) for a rank-0 output. Each returned tensor has the shape
/// of its input. With create_graph the results carry their own graph.
std::vector<Tensor> grad(const Tensor& output, std::span<const Tensor> inputs,
                         GradOptions options = {});
Tensor grad(const Tensor& output, const Tensor& input, GradOptions options = {});

/// Hessian-vector product H v of a rank-0 `output` w.r.t. a column `input`.
Tensor hessian_vector_product(const Tensor& output, const Tensor& input, const Vector& v);

}  // namespace metanav::ad
