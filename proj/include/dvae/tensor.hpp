#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dvae/errors.hpp"

namespace dvae {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated on first accumulation
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> inputs;
  // Reads this->grad, accumulates into inputs' grad.
  std::function<void(Node&)> backprop;

  std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

}  // namespace detail

// Dense real tensor (row-major) with reverse-mode gradient tracking.
//
// Graphs are dynamic: every op records its backward closure while gradient
// mode is on and at least one input requires a gradient. The tape is the
// shared_ptr chain itself, so dropping the root frees the whole graph.
// A Tensor is a cheap handle; copies alias the same node.
class Tensor {
 public:
  Tensor() = default;

  // Leaf constructors. `constant` never tracks gradients; `parameter` is a
  // trainable leaf whose grad accumulates across backward() calls until
  // zero_grad().
  static Tensor constant(Shape shape, std::vector<double> data);
  static Tensor parameter(Shape shape, std::vector<double> data);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::int64_t numel() const { return node_->numel(); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<std::size_t>(i)]; }
  bool is_scalar() const { return numel() == 1; }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->leaf; }

  std::span<const double> data() const { return node_->value; }
  std::vector<double> values() const { return node_->value; }
  double item() const;

  // In-place mutation is reserved for leaves (optimizer updates); anything
  // recorded on a tape must stay immutable.
  std::vector<double>& mutable_data();

  std::span<const double> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() const;

  detail::Node* node() const { return node_.get(); }
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
  friend Tensor wrap_node(std::shared_ptr<detail::Node> n);
};

// Thread-local gradient mode. Evaluation paths disable recording to keep
// memory flat; values are unaffected.
bool autograd_enabled();
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// ---- ops ----
//
// Binary elementwise ops broadcast in exactly two cases: a scalar against any
// shape, and a 1-D vector against the trailing dimension of a 2-D tensor.
// Everything else is a ShapeError.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);  // DomainError on zero divisor

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, Tensor::scalar(s)); }
inline Tensor operator*(double s, const Tensor& a) { return mul(a, Tensor::scalar(s)); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, Tensor::scalar(s)); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, Tensor::scalar(s)); }

// Concatenate along the last axis (1-D vectors, or 2-D with equal row counts).
Tensor concat(const std::vector<Tensor>& parts);
inline Tensor concat(const Tensor& a, const Tensor& b) { return concat(std::vector<Tensor>{a, b}); }
// Slice [start, start+len) of the last axis.
Tensor slice(const Tensor& a, int start, int len);

Tensor sum(const Tensor& a);   // full reduction, shape {1}
Tensor mean(const Tensor& a);  // full reduction, shape {1}

Tensor exp(const Tensor& a);  // NonFiniteError on overflow
Tensor ln(const Tensor& a);   // DomainError unless all elements > 0
Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
// Numerically stabilized: ln(1+e^{-|x|}) + max(x, 0).
Tensor softplus(const Tensor& a);
Tensor square(const Tensor& a);
Tensor sqrt(const Tensor& a);  // DomainError on negatives
// max(a, floor) elementwise; gradient passes only where a > floor.
Tensor clamp_min(const Tensor& a, double floor);

// Reverse-mode pass from a scalar root. Gradients accumulate additively into
// every requires-grad leaf reachable from the root; leaves not touched by the
// graph keep a zero (absent) grad rather than raising — the disconnected
// case is defined as gradient zero.
void backward(const Tensor& root);

}  // namespace dvae
