#include "metanav/autodiff/tensor.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>
#include <utility>

namespace metanav::ad {

namespace {

thread_local bool g_grad_enabled = true;

using Backward = std::function<std::vector<Tensor>(const Tensor&)>;

std::string dims(const Tensor& t) {
  return std::to_string(t.rows()) + "x" + std::to_string(t.cols());
}

Tensor constant(Matrix m, int rank) { return Tensor::make(std::move(m), rank, "const", {}, nullptr); }

int rank_for(Eigen::Index rows, Eigen::Index cols, int hint) {
  if (cols > 1) return 2;
  if (rows > 1) return std::max(hint, 1);
  return hint;
}

// Broadcasts both operands to a common shape for an elementwise op.
std::pair<Tensor, Tensor> broadcast_pair(const Tensor& a, const Tensor& b, const char* op) {
  auto common = [&](Eigen::Index x, Eigen::Index y) -> Eigen::Index {
    if (x == y) return x;
    if (x == 1) return y;
    if (y == 1) return x;
    throw ShapeError(std::string(op) + ": incompatible shapes " + dims(a) + " and " + dims(b));
  };
  const Eigen::Index r = common(a.rows(), b.rows());
  const Eigen::Index c = common(a.cols(), b.cols());
  Tensor ab = (a.rows() == r && a.cols() == c) ? a : broadcast_to(a, r, c);
  Tensor bb = (b.rows() == r && b.cols() == c) ? b : broadcast_to(b, r, c);
  return {ab, bb};
}

int binary_rank(const Tensor& a, const Tensor& b, Eigen::Index rows, Eigen::Index cols) {
  return rank_for(rows, cols, std::max(a.rank(), b.rank()));
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

GradModeGuard::GradModeGuard(bool enabled) : previous_(g_grad_enabled) { g_grad_enabled = enabled; }
GradModeGuard::~GradModeGuard() { g_grad_enabled = previous_; }

Tensor Tensor::make(Matrix value, int rank, const char* op, std::vector<Tensor> parents,
                    Backward backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->rank = rank;
  node->op = op;
  const bool track =
      g_grad_enabled && backward &&
      std::any_of(parents.begin(), parents.end(), [](const Tensor& p) { return p.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  Tensor t = constant(Matrix::Constant(1, 1, v), 0);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::vector(const Vector& v, bool requires_grad) {
  Tensor t = constant(Matrix(v), 1);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::matrix(const Matrix& m, bool requires_grad) {
  Tensor t = constant(m, 2);
  t.node_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::zeros(Eigen::Index rows, Eigen::Index cols, int rank) {
  return constant(Matrix::Zero(rows, cols), rank);
}

const Matrix& Tensor::value() const {
  if (!node_) throw GradError("access to an undefined tensor");
  return node_->value;
}

int Tensor::rank() const { return node_ ? node_->rank : 0; }

std::vector<Eigen::Index> Tensor::shape() const {
  switch (rank()) {
    case 0: return {};
    case 1: return {rows()};
    default: return {rows(), cols()};
  }
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

const char* Tensor::op() const { return node_ ? node_->op : "undefined"; }

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on a tensor of shape " + dims(*this));
  return value()(0, 0);
}

Tensor Tensor::detach() const { return constant(value(), rank()); }

// ---------------------------------------------------------------------------
// Shape ops

Tensor broadcast_to(const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
  const Eigen::Index ar = a.rows();
  const Eigen::Index ac = a.cols();
  if ((ar != rows && ar != 1) || (ac != cols && ac != 1))
    throw ShapeError("broadcast_to: cannot broadcast " + dims(a) + " to " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  Matrix out = a.value().replicate(rows / ar, cols / ac);
  const int rank = a.rank();
  return Tensor::make(std::move(out), rank_for(rows, cols, rank), "broadcast_to", {a},
                      [ar, ac, rank](const Tensor& g) -> std::vector<Tensor> {
                        return {sum_to(g, ar, ac, rank)};
                      });
}

Tensor sum_to(const Tensor& a, Eigen::Index rows, Eigen::Index cols, int rank) {
  const Eigen::Index ar = a.rows();
  const Eigen::Index ac = a.cols();
  Matrix out;
  if (ar == rows && ac == cols) {
    out = a.value();
  } else if (rows == 1 && cols == 1) {
    out = Matrix::Constant(1, 1, a.value().sum());
  } else if (rows == 1 && ac == cols) {
    out = a.value().colwise().sum();
  } else if (cols == 1 && ar == rows) {
    out = a.value().rowwise().sum();
  } else {
    throw ShapeError("sum_to: cannot reduce " + dims(a));
  }
  return Tensor::make(std::move(out), rank, "sum_to", {a},
                      [ar, ac](const Tensor& g) -> std::vector<Tensor> {
                        return {broadcast_to(g, ar, ac)};
                      });
}

Tensor block(const Tensor& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows,
             Eigen::Index cols) {
  if (row < 0 || col < 0 || row + rows > a.rows() || col + cols > a.cols())
    throw ShapeError("block: out of range on " + dims(a));
  const Eigen::Index ar = a.rows();
  const Eigen::Index ac = a.cols();
  const int rank = a.rank();
  return Tensor::make(a.value().block(row, col, rows, cols), rank_for(rows, cols, std::min(rank, 1)),
                      "block", {a},
                      [=](const Tensor& g) -> std::vector<Tensor> {
                        return {embed(g, row, col, ar, ac, rank)};
                      });
}

Tensor embed(const Tensor& a, Eigen::Index row, Eigen::Index col, Eigen::Index rows,
             Eigen::Index cols, int rank) {
  if (row < 0 || col < 0 || row + a.rows() > rows || col + a.cols() > cols)
    throw ShapeError("embed: block does not fit");
  Matrix out = Matrix::Zero(rows, cols);
  out.block(row, col, a.rows(), a.cols()) = a.value();
  const Eigen::Index br = a.rows();
  const Eigen::Index bc = a.cols();
  return Tensor::make(std::move(out), rank, "embed", {a},
                      [=](const Tensor& g) -> std::vector<Tensor> {
                        return {block(g, row, col, br, bc)};
                      });
}

Tensor slice(const Tensor& v, Eigen::Index offset, Eigen::Index length) {
  if (v.cols() != 1) throw ShapeError("slice expects a column vector, got " + dims(v));
  return block(v, offset, 0, length, 1);
}

Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols, int rank) {
  if (rows * cols != a.size())
    throw ShapeError("reshape: size mismatch for " + dims(a));
  using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const RowMajor src = a.value();
  Matrix out = Eigen::Map<const RowMajor>(src.data(), rows, cols);
  const Eigen::Index ar = a.rows();
  const Eigen::Index ac = a.cols();
  const int arank = a.rank();
  return Tensor::make(std::move(out), rank, "reshape", {a},
                      [=](const Tensor& g) -> std::vector<Tensor> {
                        return {reshape(g, ar, ac, arank)};
                      });
}

Tensor hconcat(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw ShapeError("hconcat: row mismatch");
  const Eigen::Index c = a.cols() + b.cols();
  return add(embed(a, 0, 0, a.rows(), c), embed(b, 0, a.cols(), a.rows(), c));
}

Tensor vconcat(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw ShapeError("vconcat: column mismatch");
  const Eigen::Index r = a.rows() + b.rows();
  const int rank = a.cols() == 1 ? 1 : 2;
  return add(embed(a, 0, 0, r, a.cols(), rank), embed(b, a.rows(), 0, r, a.cols(), rank));
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  auto [x, y] = broadcast_pair(a, b, "add");
  return Tensor::make(x.value() + y.value(), binary_rank(a, b, x.rows(), x.cols()), "add", {x, y},
                      [](const Tensor& g) -> std::vector<Tensor> { return {g, g}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto [x, y] = broadcast_pair(a, b, "sub");
  return Tensor::make(x.value() - y.value(), binary_rank(a, b, x.rows(), x.cols()), "sub", {x, y},
                      [](const Tensor& g) -> std::vector<Tensor> { return {g, neg(g)}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto [x, y] = broadcast_pair(a, b, "mul");
  return Tensor::make(x.value().cwiseProduct(y.value()), binary_rank(a, b, x.rows(), x.cols()),
                      "mul", {x, y}, [x, y](const Tensor& g) -> std::vector<Tensor> {
                        return {x.requires_grad() ? mul(g, y) : Tensor{},
                                y.requires_grad() ? mul(g, x) : Tensor{}};
                      });
}

Tensor div(const Tensor& a, const Tensor& b) {
  auto [x, y] = broadcast_pair(a, b, "div");
  return Tensor::make(x.value().cwiseQuotient(y.value()), binary_rank(a, b, x.rows(), x.cols()),
                      "div", {x, y}, [x, y](const Tensor& g) -> std::vector<Tensor> {
                        Tensor gx = div(g, y);
                        Tensor gy = y.requires_grad() ? neg(div(mul(gx, x), y)) : Tensor{};
                        return {gx, gy};
                      });
}

Tensor neg(const Tensor& a) {
  return Tensor::make(-a.value(), a.rank(), "neg", {a},
                      [](const Tensor& g) -> std::vector<Tensor> { return {neg(g)}; });
}

Tensor scale(const Tensor& a, double s) {
  return Tensor::make(a.value() * s, a.rank(), "scale", {a},
                      [s](const Tensor& g) -> std::vector<Tensor> { return {scale(g, s)}; });
}

Tensor add_scalar(const Tensor& a, double s) {
  return Tensor::make((a.value().array() + s).matrix(), a.rank(), "add_scalar", {a},
                      [](const Tensor& g) -> std::vector<Tensor> { return {g}; });
}

Tensor relu(const Tensor& a) {
  return Tensor::make(a.value().cwiseMax(0.0), a.rank(), "relu", {a},
                      [a](const Tensor& g) -> std::vector<Tensor> {
                        Matrix mask = (a.value().array() > 0.0).cast<double>().matrix();
                        return {mul(g, Tensor::matrix(mask))};
                      });
}

Tensor tanh(const Tensor& a) {
  return Tensor::make(a.value().array().tanh().matrix(), a.rank(), "tanh", {a},
                      [a](const Tensor& g) -> std::vector<Tensor> {
                        if (!grad_enabled()) {
                          Matrix d = 1.0 - a.value().array().tanh().square();
                          return {Tensor::matrix(g.value().cwiseProduct(d))};
                        }
                        Tensor y = tanh(a);
                        return {sub(g, mul(g, mul(y, y)))};
                      });
}

Tensor exp(const Tensor& a) {
  return Tensor::make(a.value().array().exp().matrix(), a.rank(), "exp", {a},
                      [a](const Tensor& g) -> std::vector<Tensor> { return {mul(g, exp(a))}; });
}

Tensor log(const Tensor& a) {
  return Tensor::make(a.value().array().log().matrix(), a.rank(), "log", {a},
                      [a](const Tensor& g) -> std::vector<Tensor> { return {div(g, a)}; });
}

Tensor square(const Tensor& a) {
  return Tensor::make(a.value().array().square().matrix(), a.rank(), "square", {a},
                      [a](const Tensor& g) -> std::vector<Tensor> {
                        return {scale(mul(g, a), 2.0)};
                      });
}

// ---------------------------------------------------------------------------
// Linear algebra and reductions

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: inner dimensions differ for " + dims(a) + " and " + dims(b));
  Matrix out = a.value() * b.value();
  const int rank = rank_for(out.rows(), out.cols(), 1);
  return Tensor::make(std::move(out), rank, "matmul", {a, b},
                      [a, b](const Tensor& g) -> std::vector<Tensor> {
                        return {a.requires_grad() ? matmul(g, transpose(b)) : Tensor{},
                                b.requires_grad() ? matmul(transpose(a), g) : Tensor{}};
                      });
}

Tensor transpose(const Tensor& a) {
  return Tensor::make(a.value().transpose(), 2, "transpose", {a},
                      [](const Tensor& g) -> std::vector<Tensor> { return {transpose(g)}; });
}

Tensor sum(const Tensor& a) {
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  return Tensor::make(Matrix::Constant(1, 1, a.value().sum()), 0, "sum", {a},
                      [r, c](const Tensor& g) -> std::vector<Tensor> {
                        return {broadcast_to(g, r, c)};
                      });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor sum_rows(const Tensor& a) { return sum_to(a, 1, a.cols(), 2); }

Tensor sum_cols(const Tensor& a) { return sum_to(a, a.rows(), 1, 1); }

Tensor dot(const Tensor& a, const Tensor& b) { return sum(mul(a, b)); }

// ---------------------------------------------------------------------------
// Backward pass

std::vector<Tensor> grad(const Tensor& output, std::span<const Tensor> inputs,
                         GradOptions options) {
  if (!output.defined() || output.size() != 1)
    throw GradError("grad: output must be a scalar tensor");
  for (const Tensor& in : inputs)
    if (!in.defined()) throw GradError("grad: undefined input tensor");

  // Post-order DFS over nodes that require grad.
  std::vector<const Node*> order;
  std::unordered_set<const Node*> visited;
  if (output.requires_grad()) {
    std::vector<std::pair<const Node*, std::size_t>> stack{{output.node(), 0}};
    visited.insert(output.node());
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < node->parents.size()) {
        const Node* p = node->parents[next++].node();
        if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
      } else {
        order.push_back(node);
        stack.pop_back();
      }
    }
  }

  for (const Tensor& in : inputs) {
    if (!visited.contains(in.node()) && !options.allow_unused)
      throw GradError("grad: an input is not reachable from the output");
  }

  GradModeGuard mode(options.create_graph);
  std::unordered_map<const Node*, Tensor> grads;
  if (output.requires_grad()) grads[output.node()] = Tensor::scalar(1.0);

  std::unordered_set<const Node*> wanted;
  for (const Tensor& in : inputs) wanted.insert(in.node());

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Node* node = *it;
    auto found = grads.find(node);
    if (found == grads.end() || !node->backward) continue;
    const Tensor g = found->second;
    if (!wanted.contains(node)) grads.erase(found);
    std::vector<Tensor> parent_grads = node->backward(g);
    for (std::size_t i = 0; i < node->parents.size(); ++i) {
      const Tensor& p = node->parents[i];
      if (!p.requires_grad() || i >= parent_grads.size() || !parent_grads[i].defined()) continue;
      auto slot = grads.find(p.node());
      if (slot == grads.end())
        grads.emplace(p.node(), parent_grads[i]);
      else
        slot->second = add(slot->second, parent_grads[i]);
    }
  }

  std::vector<Tensor> result;
  result.reserve(inputs.size());
  for (const Tensor& in : inputs) {
    auto found = grads.find(in.node());
    if (found == grads.end()) {
      result.push_back(Tensor::zeros(in.rows(), in.cols(), in.rank()));
      continue;
    }
    Tensor g = found->second;
    if (g.rows() != in.rows() || g.cols() != in.cols())
      throw GradError("grad: internal shape mismatch");
    result.push_back(g.rank() == in.rank() ? g : reshape(g, in.rows(), in.cols(), in.rank()));
  }
  return result;
}

Tensor grad(const Tensor& output, const Tensor& input, GradOptions options) {
  return grad(output, std::span<const Tensor>(&input, 1), options)[0];
}

Tensor hessian_vector_product(const Tensor& output, const Tensor& input, const Vector& v) {
  Tensor g = grad(output, input, {.create_graph = true});
  Tensor gv = dot(g, Tensor::vector(v));
  return grad(gv, input, {.allow_unused = true});
}

}  // namespace metanav::ad
