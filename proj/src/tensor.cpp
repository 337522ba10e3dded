#include "dvae/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace dvae {

namespace {

thread_local bool g_autograd_enabled = true;

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

NodePtr make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
  auto numel = shape_numel(shape);
  if (numel != static_cast<std::int64_t>(data.size()))
    throw ShapeError("tensor data length " + std::to_string(data.size()) +
                     " does not match shape " + shape_str(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  n->leaf = true;
  return n;
}

}  // namespace

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (int d : s) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor wrap_node(NodePtr n) { return Tensor(std::move(n)); }

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
  return wrap_node(make_leaf(std::move(shape), std::move(data), false));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  return wrap_node(make_leaf(std::move(shape), std::move(data), true));
}

Tensor Tensor::zeros(Shape shape) {
  auto n = shape_numel(shape);
  return constant(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(Shape shape, double v) {
  auto n = shape_numel(shape);
  return constant(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), v));
}

Tensor Tensor::scalar(double v) { return constant({1}, {v}); }

double Tensor::item() const {
  if (numel() != 1) throw NotScalarError("item() on tensor of shape " + shape_str(shape()));
  return node_->value[0];
}

std::vector<double>& Tensor::mutable_data() {
  if (!node_->leaf)
    throw std::logic_error("mutable_data() is only valid on leaf tensors");
  return node_->value;
}

void Tensor::zero_grad() const { node_->grad.clear(); }

bool autograd_enabled() { return g_autograd_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_autograd_enabled) { g_autograd_enabled = false; }
NoGradGuard::~NoGradGuard() { g_autograd_enabled = prev_; }

namespace {

// Builds a result node; drops inputs/backprop when no gradient is needed.
Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<NodePtr> inputs, std::function<void(Node&)> backprop) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->leaf = false;
  bool need = false;
  if (g_autograd_enabled) {
    for (const auto& in : inputs)
      if (in->requires_grad) { need = true; break; }
  }
  if (need) {
    n->requires_grad = true;
    n->inputs = std::move(inputs);
    n->backprop = std::move(backprop);
  }
  return wrap_node(std::move(n));
}

void accumulate(Node& target, std::size_t idx, double v) {
  target.ensure_grad();
  target.grad[idx] += v;
}

enum class BroadcastKind { same, scalar_left, scalar_right, row_left, row_right };

// Resolves the supported broadcast for elementwise binary ops.
// row_*: a 1-D vector applied across the rows of a 2-D tensor.
BroadcastKind binary_broadcast(const Node& a, const Node& b, const char* opname) {
  if (a.shape == b.shape) return BroadcastKind::same;
  if (a.numel() == 1) return BroadcastKind::scalar_left;
  if (b.numel() == 1) return BroadcastKind::scalar_right;
  if (a.shape.size() == 2 && b.shape.size() == 1 && a.shape[1] == b.shape[0])
    return BroadcastKind::row_right;
  if (b.shape.size() == 2 && a.shape.size() == 1 && b.shape[1] == a.shape[0])
    return BroadcastKind::row_left;
  throw ShapeError(std::string(opname) + ": shapes " + shape_str(a.shape) +
                   " and " + shape_str(b.shape) + " do not conform");
}

template <typename Fwd>
Tensor elementwise_binary(const Tensor& ta, const Tensor& tb, const char* opname,
                          Fwd fwd, double (*dfda)(double, double, double),
                          double (*dfdb)(double, double, double)) {
  const auto& a = *ta.node();
  const auto& b = *tb.node();
  BroadcastKind kind = binary_broadcast(a, b, opname);

  Shape out_shape;
  switch (kind) {
    case BroadcastKind::same: out_shape = a.shape; break;
    case BroadcastKind::scalar_left: out_shape = b.shape; break;
    case BroadcastKind::scalar_right: out_shape = a.shape; break;
    case BroadcastKind::row_right: out_shape = a.shape; break;
    case BroadcastKind::row_left: out_shape = b.shape; break;
  }
  std::size_t n = static_cast<std::size_t>(shape_numel(out_shape));
  std::size_t cols = 0;
  if (kind == BroadcastKind::row_right) cols = static_cast<std::size_t>(a.shape[1]);
  if (kind == BroadcastKind::row_left) cols = static_cast<std::size_t>(b.shape[1]);

  auto a_index = [kind, cols](std::size_t i) -> std::size_t {
    switch (kind) {
      case BroadcastKind::scalar_left: return 0;
      case BroadcastKind::row_left: return i % cols;
      default: return i;
    }
  };
  auto b_index = [kind, cols](std::size_t i) -> std::size_t {
    switch (kind) {
      case BroadcastKind::scalar_right: return 0;
      case BroadcastKind::row_right: return i % cols;
      default: return i;
    }
  };

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = fwd(a.value[a_index(i)], b.value[b_index(i)]);

  auto pa = ta.node_ptr();
  auto pb = tb.node_ptr();
  return make_op(std::move(out_shape), std::move(out), {pa, pb},
                 [pa, pb, a_index, b_index, dfda, dfdb, n](Node& self) {
                   for (std::size_t i = 0; i < n; ++i) {
                     double g = self.grad[i];
                     double av = pa->value[a_index(i)];
                     double bv = pb->value[b_index(i)];
                     double y = self.value[i];
                     if (pa->requires_grad) accumulate(*pa, a_index(i), g * dfda(av, bv, y));
                     if (pb->requires_grad) accumulate(*pb, b_index(i), g * dfdb(av, bv, y));
                   }
                 });
}

template <typename Fwd, typename Dfdx>
Tensor elementwise_unary(const Tensor& ta, Fwd fwd, Dfdx dfdx) {
  const auto& a = *ta.node();
  std::size_t n = a.value.size();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a.value[i]);
  auto pa = ta.node_ptr();
  return make_op(a.shape, std::move(out), {pa}, [pa, dfdx, n](Node& self) {
    for (std::size_t i = 0; i < n; ++i)
      accumulate(*pa, i, self.grad[i] * dfdx(pa->value[i], self.value[i]));
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return elementwise_binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.node()->value)
    if (v == 0.0) throw DomainError("div: zero divisor element");
  return elementwise_binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double, double y, double out) { return -out / y; });
}

Tensor exp(const Tensor& a) {
  Tensor r = elementwise_unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
  for (double v : r.data())
    if (!std::isfinite(v)) throw NonFiniteError("exp: overflow to non-finite value");
  return r;
}

Tensor ln(const Tensor& a) {
  for (double v : a.data())
    if (v <= 0.0) throw DomainError("ln: element <= 0");
  return elementwise_unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor tanh(const Tensor& a) {
  return elementwise_unary(
      a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return elementwise_unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return elementwise_unary(
      a,
      [](double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); },
      [](double x, double) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor square(const Tensor& a) {
  return elementwise_unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.data())
    if (v < 0.0) throw DomainError("sqrt: negative element");
  return elementwise_unary(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor clamp_min(const Tensor& a, double floor) {
  return elementwise_unary(
      a, [floor](double x) { return x > floor ? x : floor; },
      [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

Tensor matmul(const Tensor& ta, const Tensor& tb) {
  const auto& a = *ta.node();
  const auto& b = *tb.node();
  if (a.shape.size() < 1 || a.shape.size() > 2 || b.shape.size() < 1 || b.shape.size() > 2)
    throw ShapeError("matmul: operands must be 1-D or 2-D");

  // Treat a 1-D left operand as a row vector and a 1-D right operand as a
  // column vector; the corresponding unit dimension is dropped from the result.
  const bool a_vec = a.shape.size() == 1;
  const bool b_vec = b.shape.size() == 1;
  const int m = a_vec ? 1 : a.shape[0];
  const int k = a_vec ? a.shape[0] : a.shape[1];
  const int k2 = b_vec ? b.shape[0] : b.shape[0];
  const int n = b_vec ? 1 : b.shape[1];
  if (k != k2)
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape) +
                     " vs " + shape_str(b.shape));

  std::vector<double> out(static_cast<std::size_t>(m) * n, 0.0);
  const double* A = a.value.data();
  const double* B = b.value.data();
  for (int i = 0; i < m; ++i) {
    const double* Ai = A + static_cast<std::size_t>(i) * k;
    double* Oi = out.data() + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = Ai[p];
      const double* Bp = B + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) Oi[j] += av * Bp[j];
    }
  }

  Shape out_shape;
  if (a_vec && b_vec) out_shape = {1};
  else if (a_vec) out_shape = {n};
  else if (b_vec) out_shape = {m};
  else out_shape = {m, n};

  auto pa = ta.node_ptr();
  auto pb = tb.node_ptr();
  return make_op(std::move(out_shape), std::move(out), {pa, pb},
                 [pa, pb, m, k, n](Node& self) {
                   const double* G = self.grad.data();
                   // dA = G · Bᵀ
                   if (pa->requires_grad) {
                     pa->ensure_grad();
                     double* GA = pa->grad.data();
                     const double* B = pb->value.data();
                     for (int i = 0; i < m; ++i)
                       for (int j = 0; j < n; ++j) {
                         double g = G[static_cast<std::size_t>(i) * n + j];
                         const double* Brow = B;  // walk column j of B by rows
                         for (int p = 0; p < k; ++p)
                           GA[static_cast<std::size_t>(i) * k + p] +=
                               g * Brow[static_cast<std::size_t>(p) * n + j];
                       }
                   }
                   // dB = Aᵀ · G
                   if (pb->requires_grad) {
                     pb->ensure_grad();
                     double* GB = pb->grad.data();
                     const double* A = pa->value.data();
                     for (int p = 0; p < k; ++p)
                       for (int i = 0; i < m; ++i) {
                         double av = A[static_cast<std::size_t>(i) * k + p];
                         const double* Gi = G + static_cast<std::size_t>(i) * n;
                         double* GBp = GB + static_cast<std::size_t>(p) * n;
                         for (int j = 0; j < n; ++j) GBp[j] += av * Gi[j];
                       }
                   }
                 });
}

Tensor transpose(const Tensor& ta) {
  const auto& a = *ta.node();
  if (a.shape.size() != 2) throw ShapeError("transpose: 2-D tensor required");
  const int r = a.shape[0], c = a.shape[1];
  std::vector<double> out(a.value.size());
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out[static_cast<std::size_t>(j) * r + i] = a.value[static_cast<std::size_t>(i) * c + j];
  auto pa = ta.node_ptr();
  return make_op({c, r}, std::move(out), {pa}, [pa, r, c](Node& self) {
    pa->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        pa->grad[static_cast<std::size_t>(i) * c + j] +=
            self.grad[static_cast<std::size_t>(j) * r + i];
  });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const int rank = parts[0].rank();
  if (rank != 1 && rank != 2) throw ShapeError("concat: 1-D or 2-D tensors required");
  int rows = rank == 2 ? parts[0].dim(0) : 1;
  int total_cols = 0;
  for (const auto& p : parts) {
    if (p.rank() != rank || (rank == 2 && p.dim(0) != rows))
      throw ShapeError("concat: inconsistent shapes");
    total_cols += rank == 2 ? p.dim(1) : p.dim(0);
  }
  Shape out_shape = rank == 2 ? Shape{rows, total_cols} : Shape{total_cols};

  std::vector<double> out(static_cast<std::size_t>(rows) * total_cols);
  std::vector<NodePtr> inputs;
  std::vector<int> col_of(parts.size());
  int at = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& p = *parts[pi].node();
    int pc = rank == 2 ? p.shape[1] : p.shape[0];
    col_of[pi] = at;
    for (int i = 0; i < rows; ++i)
      std::copy_n(p.value.data() + static_cast<std::size_t>(i) * pc, pc,
                  out.data() + static_cast<std::size_t>(i) * total_cols + at);
    at += pc;
    inputs.push_back(parts[pi].node_ptr());
  }

  auto srcs = inputs;
  return make_op(std::move(out_shape), std::move(out), std::move(inputs),
                 [srcs, col_of, rows, total_cols, rank](Node& self) {
                   for (std::size_t pi = 0; pi < srcs.size(); ++pi) {
                     auto& p = *srcs[pi];
                     if (!p.requires_grad) continue;
                     p.ensure_grad();
                     int pc = rank == 2 ? p.shape[1] : p.shape[0];
                     for (int i = 0; i < rows; ++i)
                       for (int j = 0; j < pc; ++j)
                         p.grad[static_cast<std::size_t>(i) * pc + j] +=
                             self.grad[static_cast<std::size_t>(i) * total_cols +
                                       col_of[pi] + j];
                   }
                 });
}

Tensor slice(const Tensor& ta, int start, int len) {
  const auto& a = *ta.node();
  const int rank = static_cast<int>(a.shape.size());
  if (rank != 1 && rank != 2) throw ShapeError("slice: 1-D or 2-D tensors required");
  const int cols = rank == 2 ? a.shape[1] : a.shape[0];
  const int rows = rank == 2 ? a.shape[0] : 1;
  if (start < 0 || len < 0 || start + len > cols)
    throw ShapeError("slice: range [" + std::to_string(start) + "," +
                     std::to_string(start + len) + ") out of " + shape_str(a.shape));
  Shape out_shape = rank == 2 ? Shape{rows, len} : Shape{len};
  std::vector<double> out(static_cast<std::size_t>(rows) * len);
  for (int i = 0; i < rows; ++i)
    std::copy_n(a.value.data() + static_cast<std::size_t>(i) * cols + start, len,
                out.data() + static_cast<std::size_t>(i) * len);
  auto pa = ta.node_ptr();
  return make_op(std::move(out_shape), std::move(out), {pa},
                 [pa, start, len, rows, cols](Node& self) {
                   pa->ensure_grad();
                   for (int i = 0; i < rows; ++i)
                     for (int j = 0; j < len; ++j)
                       pa->grad[static_cast<std::size_t>(i) * cols + start + j] +=
                           self.grad[static_cast<std::size_t>(i) * len + j];
                 });
}

Tensor sum(const Tensor& ta) {
  const auto& a = *ta.node();
  double s = 0.0;
  for (double v : a.value) s += v;
  auto pa = ta.node_ptr();
  return make_op({1}, {s}, {pa}, [pa](Node& self) {
    pa->ensure_grad();
    double g = self.grad[0];
    for (auto& gv : pa->grad) gv += g;
  });
}

Tensor mean(const Tensor& ta) {
  const auto& a = *ta.node();
  const double inv = 1.0 / static_cast<double>(a.value.size());
  double s = 0.0;
  for (double v : a.value) s += v;
  auto pa = ta.node_ptr();
  return make_op({1}, {s * inv}, {pa}, [pa, inv](Node& self) {
    pa->ensure_grad();
    double g = self.grad[0] * inv;
    for (auto& gv : pa->grad) gv += g;
  });
}

void backward(const Tensor& root) {
  Node* r = root.node();
  if (r == nullptr) throw std::logic_error("backward: undefined tensor");
  if (r->numel() != 1)
    throw NotScalarError("backward: root has shape " + shape_str(r->shape));
  if (!r->requires_grad) return;  // nothing reachable requires a gradient

  // Iterative post-order over the tape; each node visited exactly once.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(r, 0);
  seen.insert(r);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* in = node->inputs[next++].get();
      if (in->requires_grad && !seen.count(in)) {
        seen.insert(in);
        stack.emplace_back(in, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  r->ensure_grad();
  r->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

}  // namespace dvae
