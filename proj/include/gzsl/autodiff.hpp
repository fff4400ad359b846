#ifndef GZSL_AUTODIFF_HPP
#define GZSL_AUTODIFF_HPP

// Tape-based reverse-mode automatic differentiation over dense row-major
// matrices. Every training loss in the library is built from these ops.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gzsl {

using Index = Eigen::Index;

template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline std::string shape_string(Index rows, Index cols) {
  std::ostringstream os;
  os << '[' << rows << 'x' << cols << ']';
  return os.str();
}

inline std::string shape_string(const std::vector<Index>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

/// Dense array with a logical shape and a gradient accumulator.
///
/// Storage is a row-major matrix whose column count is the last dimension and
/// whose row count is the product of the leading dimensions; a scalar is 1x1
/// and a vector of length n is 1xn.
template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(std::vector<Index> shape) : shape_(std::move(shape)) {
    const auto [r, c] = storage_dims(shape_);
    value_ = Matrix<T>::Zero(r, c);
    grad_ = Matrix<T>::Zero(r, c);
  }

  Tensor(std::vector<Index> shape, Matrix<T> values) : shape_(std::move(shape)), value_(std::move(values)) {
    const auto [r, c] = storage_dims(shape_);
    if (value_.rows() != r || value_.cols() != c)
      throw DimensionError("tensor values " + shape_string(value_.rows(), value_.cols()) +
                           " do not fit shape " + shape_string(shape_));
    grad_ = Matrix<T>::Zero(r, c);
  }

  const std::vector<Index>& shape() const { return shape_; }
  Index numel() const { return value_.size(); }

  Matrix<T>& value() { return value_; }
  const Matrix<T>& value() const { return value_; }
  Matrix<T>& grad() { return grad_; }
  const Matrix<T>& grad() const { return grad_; }

  void zero_grad() { grad_.setZero(); }

 private:
  static std::pair<Index, Index> storage_dims(const std::vector<Index>& shape) {
    if (shape.empty()) return {1, 1};
    for (Index d : shape)
      if (d < 0) throw DimensionError("negative dimension in shape " + shape_string(shape));
    Index rows = 1;
    for (std::size_t i = 0; i + 1 < shape.size(); ++i) rows *= shape[i];
    return {rows, shape.back()};
  }

  std::vector<Index> shape_;
  Matrix<T> value_;
  Matrix<T> grad_;
};

template <typename T>
class Graph;

/// Handle to a node of one Graph.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph<T>& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  const Matrix<T>& value() const { return graph_->value(id_); }
  /// Adjoint from the latest backward pass; leaves report their accumulated total.
  const Matrix<T>& grad() const { return graph_->grad(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  T item() const { return value()(0, 0); }

 private:
  Graph<T>* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Ordered record of operations. Nodes are appended in evaluation order, so
/// inputs always precede the ops that consume them.
template <typename T>
class Graph {
 public:
  using Adjoint = std::function<void(Graph&, const Matrix<T>&)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var<T> constant(Matrix<T> value) { return push(std::move(value), false, nullptr); }

  /// Binds an external tensor as a leaf; backward accumulates into tensor.grad().
  Var<T> leaf(Tensor<T>& tensor) {
    Var<T> v = push(tensor.value(), true, nullptr);
    nodes_[v.id()].bound = &tensor;
    return v;
  }

  /// Graph-owned leaf whose gradient persists across backward calls.
  Var<T> variable(Matrix<T> value) {
    const Index r = value.rows(), c = value.cols();
    owned_.emplace_back(std::vector<Index>{r, c}, std::move(value));
    return leaf(owned_.back());
  }

  void backward(Var<T> root) {
    if (root.rows() != 1 || root.cols() != 1)
      throw DimensionError("backward needs a scalar root, got " + shape_string(root.rows(), root.cols()));
    for (auto& n : nodes_) n.grad.resize(0, 0);
    nodes_[root.id()].grad = Matrix<T>::Ones(1, 1);
    for (std::size_t id = root.id() + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.needs_grad || n.grad.size() == 0) continue;
      if (n.adjoint) n.adjoint(*this, n.grad);
      if (n.bound) n.bound->grad() += n.grad;
    }
  }

  std::size_t size() const { return nodes_.size(); }
  const Matrix<T>& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix<T>& grad(std::size_t id) const {
    const Node& n = nodes_[id];
    return n.bound ? n.bound->grad() : n.grad;
  }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  // Op construction API used by the free functions below.
  Var<T> push(Matrix<T> value, bool needs_grad, Adjoint adjoint) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    if (needs_grad) n.adjoint = std::move(adjoint);
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  /// Adds `contribution` into the block at (row, col) of a rows x cols adjoint.
  void accumulate_block(std::size_t id, Index rows, Index cols, Index row, Index col, const Matrix<T>& contribution) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix<T>::Zero(rows, cols);
    n.grad.block(row, col, contribution.rows(), contribution.cols()) += contribution;
  }

  /// Adds lhs * rhs without a temporary.
  template <typename L, typename R>
  void accumulate_product(std::size_t id, const L& lhs, const R& rhs) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) {
      n.grad.resize(lhs.rows(), rhs.cols());
      n.grad.noalias() = lhs * rhs;
    } else {
      n.grad.noalias() += lhs * rhs;
    }
  }

  template <typename Expr>
  void accumulate(std::size_t id, const Expr& contribution) {
    Node& n = nodes_[id];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0)
      n.grad = contribution;
    else
      n.grad += contribution;
  }

 private:
  struct Node {
    Matrix<T> value;
    Matrix<T> grad;
    bool needs_grad = false;
    Tensor<T>* bound = nullptr;
    Adjoint adjoint;
  };

  std::vector<Node> nodes_;
  std::deque<Tensor<T>> owned_;
};

namespace detail {

template <typename T>
void same_graph(const Var<T>& a, const Var<T>& b, const char* op) {
  if (&a.graph() != &b.graph()) throw std::invalid_argument(std::string(op) + ": operands belong to different graphs");
}

template <typename T>
void same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  same_graph(a, b, op);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
}

template <typename T>
bool any_grad(const Var<T>& a) {
  return a.graph().needs_grad(a.id());
}

template <typename T>
bool any_grad(const Var<T>& a, const Var<T>& b) {
  return any_grad(a) || any_grad(b);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  detail::same_graph(a, b, "matmul");
  if (a.cols() != b.rows())
    throw DimensionError("matmul: inner dimensions differ " + shape_string(a.rows(), a.cols()) + " * " +
                         shape_string(b.rows(), b.cols()));
  Graph<T>& g = a.graph();
  Matrix<T> out(a.rows(), b.cols());
  out.noalias() = a.value() * b.value();
  const std::size_t ia = a.id(), ib = b.id();
  return g.push(std::move(out), detail::any_grad(a, b), [ia, ib](Graph<T>& g, const Matrix<T>& up) {
    if (g.needs_grad(ia)) g.accumulate_product(ia, up, g.value(ib).transpose());
    if (g.needs_grad(ib)) g.accumulate_product(ib, g.value(ia).transpose(), up);
  });
}

// ---------------------------------------------------------------------------
// Binary elementwise

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "add");
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().push(a.value() + b.value(), detail::any_grad(a, b), [ia, ib](Graph<T>& g, const Matrix<T>& up) {
    g.accumulate(ia, up);
    g.accumulate(ib, up);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().push(a.value() - b.value(), detail::any_grad(a, b), [ia, ib](Graph<T>& g, const Matrix<T>& up) {
    g.accumulate(ia, up);
    g.accumulate(ib, -up);
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "mul");
  const std::size_t ia = a.id(), ib = b.id();
  Matrix<T> out = a.value().cwiseProduct(b.value());
  return a.graph().push(std::move(out), detail::any_grad(a, b), [ia, ib](Graph<T>& g, const Matrix<T>& up) {
    if (g.needs_grad(ia)) g.accumulate(ia, up.cwiseProduct(g.value(ib)));
    if (g.needs_grad(ib)) g.accumulate(ib, up.cwiseProduct(g.value(ia)));
  });
}

/// a[m x n] + row[1 x n] broadcast over rows.
template <typename T>
Var<T> add_row(const Var<T>& a, const Var<T>& row) {
  detail::same_graph(a, row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols())
    throw DimensionError("add_row: " + shape_string(a.rows(), a.cols()) + " + " +
                         shape_string(row.rows(), row.cols()));
  const std::size_t ia = a.id(), ir = row.id();
  Matrix<T> out = a.value().rowwise() + row.value().row(0);
  return a.graph().push(std::move(out), detail::any_grad(a, row), [ia, ir](Graph<T>& g, const Matrix<T>& up) {
    g.accumulate(ia, up);
    if (g.needs_grad(ir)) g.accumulate(ir, up.colwise().sum());
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  const std::size_t ia = a.id();
  return a.graph().push(a.value() * factor, detail::any_grad(a),
                        [ia, factor](Graph<T>& g, const Matrix<T>& up) { g.accumulate(ia, up * factor); });
}

template <typename T>
Var<T> operator+(const Var<T>& a, const Var<T>& b) { return add(a, b); }
template <typename T>
Var<T> operator-(const Var<T>& a, const Var<T>& b) { return sub(a, b); }
template <typename T>
Var<T> operator*(const Var<T>& a, const Var<T>& b) { return mul(a, b); }
template <typename T>
Var<T> operator*(T factor, const Var<T>& a) { return scale(a, factor); }

// ---------------------------------------------------------------------------
// Unary elementwise

enum class Unary { kTanh, kSigmoid, kRelu, kExp, kLog, kSquare, kNeg };

template <typename T>
Var<T> unary(Unary op, const Var<T>& a) {
  const Matrix<T>& x = a.value();
  Matrix<T> out;
  switch (op) {
    case Unary::kTanh: out = x.array().tanh().matrix(); break;
    case Unary::kSigmoid: out = x.array().logistic().matrix(); break;
    case Unary::kRelu: out = x.array().max(T(0)).matrix(); break;
    case Unary::kExp: out = x.array().exp().matrix(); break;
    case Unary::kLog:
      if ((x.array() <= T(0)).any()) throw DomainError("log of a non-positive value");
      out = x.array().log().matrix();
      break;
    case Unary::kSquare: out = x.array().square().matrix(); break;
    case Unary::kNeg: out = -x; break;
  }
  const std::size_t ia = a.id();
  Graph<T>& graph = a.graph();
  const std::size_t self = graph.size();
  return graph.push(std::move(out), detail::any_grad(a), [op, ia, self](Graph<T>& g, const Matrix<T>& up) {
    const auto x = g.value(ia).array();
    const auto y = g.value(self).array();
    switch (op) {
      case Unary::kTanh: g.accumulate(ia, (up.array() * (T(1) - y.square())).matrix()); break;
      case Unary::kSigmoid: g.accumulate(ia, (up.array() * y * (T(1) - y)).matrix()); break;
      // relu'(0) = 0
      case Unary::kRelu: g.accumulate(ia, (x > T(0)).select(up.array(), T(0)).matrix()); break;
      case Unary::kExp: g.accumulate(ia, (up.array() * y).matrix()); break;
      case Unary::kLog: g.accumulate(ia, (up.array() / x).matrix()); break;
      case Unary::kSquare: g.accumulate(ia, (up.array() * x * T(2)).matrix()); break;
      case Unary::kNeg: g.accumulate(ia, -up); break;
    }
  });
}

template <typename T> Var<T> tanh(const Var<T>& a) { return unary(Unary::kTanh, a); }
template <typename T> Var<T> sigmoid(const Var<T>& a) { return unary(Unary::kSigmoid, a); }
template <typename T> Var<T> relu(const Var<T>& a) { return unary(Unary::kRelu, a); }
template <typename T> Var<T> exp(const Var<T>& a) { return unary(Unary::kExp, a); }
template <typename T> Var<T> log(const Var<T>& a) { return unary(Unary::kLog, a); }
template <typename T> Var<T> square(const Var<T>& a) { return unary(Unary::kSquare, a); }
template <typename T> Var<T> operator-(const Var<T>& a) { return unary(Unary::kNeg, a); }

// ---------------------------------------------------------------------------
// Reductions. axis 0 collapses rows (result 1 x n), axis 1 collapses columns
// (result m x 1).

template <typename T>
Var<T> sum(const Var<T>& a) {
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  Matrix<T> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.graph().push(std::move(out), detail::any_grad(a), [ia, r, c](Graph<T>& g, const Matrix<T>& up) {
    g.accumulate(ia, Matrix<T>::Constant(r, c, up(0, 0)));
  });
}

namespace detail {
inline void check_axis(int axis, Index rows, Index cols, const char* op) {
  if (axis != 0 && axis != 1) throw std::invalid_argument(std::string(op) + ": axis must be 0 or 1");
  if ((axis == 0 ? rows : cols) == 0) throw DimensionError(std::string(op) + ": empty reduction axis");
}
}  // namespace detail

template <typename T>
Var<T> sum(const Var<T>& a, int axis) {
  detail::check_axis(axis, a.rows(), a.cols(), "sum");
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  Matrix<T> out = axis == 0 ? Matrix<T>(a.value().colwise().sum()) : Matrix<T>(a.value().rowwise().sum());
  return a.graph().push(std::move(out), detail::any_grad(a), [ia, r, c, axis](Graph<T>& g, const Matrix<T>& up) {
    if (axis == 0)
      g.accumulate(ia, up.replicate(r, 1));
    else
      g.accumulate(ia, up.replicate(1, c));
  });
}

template <typename T>
Var<T> mean(const Var<T>& a) {
  if (a.value().size() == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), T(1) / static_cast<T>(a.value().size()));
}

template <typename T>
Var<T> mean(const Var<T>& a, int axis) {
  detail::check_axis(axis, a.rows(), a.cols(), "mean");
  return scale(sum(a, axis), T(1) / static_cast<T>(axis == 0 ? a.rows() : a.cols()));
}

template <typename T>
struct MinResult {
  Var<T> values;
  std::vector<Index> argmin;
};

/// Minimum along an axis. The adjoint flows only to the first minimal entry.
template <typename T>
MinResult<T> min(const Var<T>& a, int axis) {
  detail::check_axis(axis, a.rows(), a.cols(), "min");
  const Matrix<T>& x = a.value();
  const Index outer = axis == 0 ? x.cols() : x.rows();
  const Index inner = axis == 0 ? x.rows() : x.cols();
  std::vector<Index> arg(static_cast<std::size_t>(outer), 0);
  Matrix<T> out = axis == 0 ? Matrix<T>(1, outer) : Matrix<T>(outer, 1);
  for (Index o = 0; o < outer; ++o) {
    Index best = 0;
    T best_val = axis == 0 ? x(0, o) : x(o, 0);
    for (Index i = 1; i < inner; ++i) {
      const T v = axis == 0 ? x(i, o) : x(o, i);
      if (v < best_val) {
        best_val = v;
        best = i;
      }
    }
    arg[static_cast<std::size_t>(o)] = best;
    out(axis == 0 ? 0 : o, axis == 0 ? o : 0) = best_val;
  }
  const std::size_t ia = a.id();
  const Index r = x.rows(), c = x.cols();
  Var<T> v = a.graph().push(std::move(out), detail::any_grad(a), [ia, r, c, axis, arg](Graph<T>& g, const Matrix<T>& up) {
    Matrix<T> d = Matrix<T>::Zero(r, c);
    for (std::size_t o = 0; o < arg.size(); ++o) {
      const Index oi = static_cast<Index>(o);
      if (axis == 0)
        d(arg[o], oi) = up(0, oi);
      else
        d(oi, arg[o]) = up(oi, 0);
    }
    g.accumulate(ia, d);
  });
  return {v, std::move(arg)};
}

/// Minimum over all entries; argmin is the row-major flat index.
template <typename T>
MinResult<T> min(const Var<T>& a) {
  if (a.value().size() == 0) throw DimensionError("min: empty tensor");
  const Matrix<T>& x = a.value();
  Index best = 0;
  for (Index i = 1; i < x.size(); ++i)
    if (x.data()[i] < x.data()[best]) best = i;
  Matrix<T> out(1, 1);
  out(0, 0) = x.data()[best];
  const std::size_t ia = a.id();
  const Index r = x.rows(), c = x.cols();
  Var<T> v = a.graph().push(std::move(out), detail::any_grad(a), [ia, r, c, best](Graph<T>& g, const Matrix<T>& up) {
    Matrix<T> d = Matrix<T>::Zero(r, c);
    d.data()[best] = up(0, 0);
    g.accumulate(ia, d);
  });
  return {v, {best}};
}

/// Row-wise log-sum-exp with max subtraction; result m x 1.
template <typename T>
Var<T> logsumexp_rows(const Var<T>& a) {
  detail::check_axis(1, a.rows(), a.cols(), "logsumexp_rows");
  const Matrix<T>& x = a.value();
  Matrix<T> out(x.rows(), 1);
  for (Index i = 0; i < x.rows(); ++i) {
    const T m = x.row(i).maxCoeff();
    out(i, 0) = m + std::log((x.row(i).array() - m).exp().sum());
  }
  const std::size_t ia = a.id();
  const std::size_t self = a.graph().size();
  return a.graph().push(std::move(out), detail::any_grad(a), [ia, self](Graph<T>& g, const Matrix<T>& up) {
    const Matrix<T>& x = g.value(ia);
    const Matrix<T>& lse = g.value(self);
    Matrix<T> d = ((x.colwise() - lse.col(0)).array().exp().colwise() * up.col(0).array()).matrix();
    g.accumulate(ia, d);
  });
}

// ---------------------------------------------------------------------------
// Distances

/// Squared Euclidean distance between equally shaped tensors; result 1x1.
template <typename T>
Var<T> sq_dist(const Var<T>& a, const Var<T>& b) {
  detail::same_graph(a, b, "sq_dist");
  if (a.value().size() != b.value().size())
    throw DimensionError("sq_dist: length mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("sq_dist: shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                         shape_string(b.rows(), b.cols()));
  T acc = 0;
  const T* pa = a.value().data();
  const T* pb = b.value().data();
  for (Index i = 0; i < a.value().size(); ++i) {
    const T d = pa[i] - pb[i];
    acc += d * d;
  }
  Matrix<T> out(1, 1);
  out(0, 0) = acc;
  const std::size_t ia = a.id(), ib = b.id();
  return a.graph().push(std::move(out), detail::any_grad(a, b), [ia, ib](Graph<T>& g, const Matrix<T>& up) {
    const Matrix<T> d = (g.value(ia) - g.value(ib)) * (T(2) * up(0, 0));
    g.accumulate(ia, d);
    g.accumulate(ib, -d);
  });
}

/// All squared distances between rows of p [m x d] and rows of q [n x d]; result m x n.
template <typename T>
Var<T> pairwise_sq_dist(const Var<T>& p, const Var<T>& q) {
  detail::same_graph(p, q, "pairwise_sq_dist");
  if (p.cols() != q.cols())
    throw DimensionError("pairwise_sq_dist: width mismatch " + shape_string(p.rows(), p.cols()) + " vs " +
                         shape_string(q.rows(), q.cols()));
  const Matrix<T>& pv = p.value();
  const Matrix<T>& qv = q.value();
  Matrix<T> out(pv.rows(), qv.rows());
  for (Index i = 0; i < pv.rows(); ++i)
    for (Index j = 0; j < qv.rows(); ++j) {
      T acc = 0;
      for (Index k = 0; k < pv.cols(); ++k) {
        const T d = pv(i, k) - qv(j, k);
        acc += d * d;
      }
      out(i, j) = acc;
    }
  const std::size_t ip = p.id(), iq = q.id();
  return p.graph().push(std::move(out), detail::any_grad(p, q), [ip, iq](Graph<T>& g, const Matrix<T>& up) {
    const Matrix<T>& pv = g.value(ip);
    const Matrix<T>& qv = g.value(iq);
    // d/dp_i = 2 sum_j up_ij (p_i - q_j); d/dq_j = -2 sum_i up_ij (p_i - q_j)
    if (g.needs_grad(ip)) {
      Matrix<T> dp = T(2) * (up.rowwise().sum().asDiagonal() * pv - up * qv);
      g.accumulate(ip, dp);
    }
    if (g.needs_grad(iq)) {
      Matrix<T> dq = T(2) * (up.colwise().sum().transpose().asDiagonal() * qv - up.transpose() * pv);
      g.accumulate(iq, dq);
    }
  });
}

// ---------------------------------------------------------------------------
// Structural ops

template <typename T>
Var<T> slice_cols(const Var<T>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols())
    throw DimensionError("slice_cols: range out of bounds for " + shape_string(a.rows(), a.cols()));
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  Matrix<T> out = a.value().middleCols(start, count);
  return a.graph().push(std::move(out), detail::any_grad(a), [ia, r, c, start, count](Graph<T>& g, const Matrix<T>& up) {
    g.accumulate_block(ia, r, c, 0, start, up);
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows())
    throw DimensionError("slice_rows: range out of bounds for " + shape_string(a.rows(), a.cols()));
  const std::size_t ia = a.id();
  const Index r = a.rows(), c = a.cols();
  Matrix<T> out = a.value().middleRows(start, count);
  return a.graph().push(std::move(out), detail::any_grad(a), [ia, r, c, start, count](Graph<T>& g, const Matrix<T>& up) {
    g.accumulate_block(ia, r, c, start, 0, up);
  });
}

template <typename T>
Var<T> hcat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("hcat: no operands");
  const Index r = parts.front().rows();
  Index c = 0;
  bool grad = false;
  for (const auto& p : parts) {
    detail::same_graph(parts.front(), p, "hcat");
    if (p.rows() != r) throw DimensionError("hcat: row count mismatch");
    c += p.cols();
    grad = grad || detail::any_grad(p);
  }
  Matrix<T> out(r, c);
  std::vector<std::pair<std::size_t, Index>> spans;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    spans.emplace_back(p.id(), p.cols());
    off += p.cols();
  }
  return parts.front().graph().push(std::move(out), grad, [spans](Graph<T>& g, const Matrix<T>& up) {
    Index off = 0;
    for (const auto& [id, width] : spans) {
      if (g.needs_grad(id)) g.accumulate(id, up.middleCols(off, width));
      off += width;
    }
  });
}

template <typename T>
Var<T> vcat(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw DimensionError("vcat: no operands");
  const Index c = parts.front().cols();
  Index r = 0;
  bool grad = false;
  for (const auto& p : parts) {
    detail::same_graph(parts.front(), p, "vcat");
    if (p.cols() != c) throw DimensionError("vcat: column count mismatch");
    r += p.rows();
    grad = grad || detail::any_grad(p);
  }
  Matrix<T> out(r, c);
  std::vector<std::pair<std::size_t, Index>> spans;
  Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    spans.emplace_back(p.id(), p.rows());
    off += p.rows();
  }
  return parts.front().graph().push(std::move(out), grad, [spans](Graph<T>& g, const Matrix<T>& up) {
    Index off = 0;
    for (const auto& [id, height] : spans) {
      if (g.needs_grad(id)) g.accumulate(id, up.middleRows(off, height));
      off += height;
    }
  });
}

/// Picks entries of `a` by row-major flat index into a rows x cols result.
template <typename T>
Var<T> take(const Var<T>& a, std::vector<Index> flat, Index rows, Index cols) {
  if (rows * cols != static_cast<Index>(flat.size())) throw DimensionError("take: index count does not match result shape");
  const Matrix<T>& x = a.value();
  Matrix<T> out(rows, cols);
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i] < 0 || flat[i] >= x.size()) throw DimensionError("take: index out of range");
    out.data()[i] = x.data()[flat[i]];
  }
  const std::size_t ia = a.id();
  const Index r = x.rows(), c = x.cols();
  return a.graph().push(std::move(out), detail::any_grad(a), [ia, r, c, flat = std::move(flat)](Graph<T>& g, const Matrix<T>& up) {
    Matrix<T> d = Matrix<T>::Zero(r, c);
    for (std::size_t i = 0; i < flat.size(); ++i) d.data()[flat[i]] += up.data()[i];
    g.accumulate(ia, d);
  });
}

/// Mean over `blocks` consecutive row blocks of equal height: a[blocks*h x n] -> [h x n].
template <typename T>
Var<T> mean_row_blocks(const Var<T>& a, Index blocks) {
  if (blocks <= 0 || a.rows() % blocks != 0) throw DimensionError("mean_row_blocks: rows not divisible by block count");
  const Index h = a.rows() / blocks;
  Matrix<T> out = Matrix<T>::Zero(h, a.cols());
  for (Index b = 0; b < blocks; ++b) out += a.value().middleRows(b * h, h);
  out /= static_cast<T>(blocks);
  const std::size_t ia = a.id();
  return a.graph().push(std::move(out), detail::any_grad(a), [ia, blocks](Graph<T>& g, const Matrix<T>& up) {
    g.accumulate(ia, up.replicate(blocks, 1) / static_cast<T>(blocks));
  });
}

}  // namespace gzsl

#endif  // GZSL_AUTODIFF_HPP
