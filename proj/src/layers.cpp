#include "dvae/layers.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace dvae {

Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::linear;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "softplus") return Activation::softplus;
  throw ConfigError("unknown activation: " + s);
}

std::string activation_to_string(Activation a) {
  switch (a) {
    case Activation::linear: return "linear";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softplus: return "softplus";
  }
  return "linear";
}

void ParamMap::add(const std::string& name, Tensor t) {
  if (find(name) != nullptr)
    throw std::logic_error("duplicate parameter name: " + name);
  entries_.emplace_back(name, std::move(t));
}

Tensor* ParamMap::find(const std::string& name) {
  for (auto& [n, t] : entries_)
    if (n == name) return &t;
  return nullptr;
}

const Tensor* ParamMap::find(const std::string& name) const {
  for (const auto& [n, t] : entries_)
    if (n == name) return &t;
  return nullptr;
}

std::int64_t ParamMap::total_elements() const {
  std::int64_t n = 0;
  for (const auto& [name, t] : entries_) n += t.numel();
  return n;
}

void ParamMap::zero_grads() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

namespace {

std::vector<double> xavier_uniform(int rows, int cols, int fan_in, int fan_out, Rng& rng) {
  double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> w(static_cast<std::size_t>(rows) * cols);
  for (auto& v : w) v = rng.uniform(-a, a);
  return w;
}

Tensor apply_activation(const Tensor& x, Activation act) {
  switch (act) {
    case Activation::linear: return x;
    case Activation::tanh: return tanh(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::softplus: return softplus(x);
  }
  return x;
}

}  // namespace

DenseLayer DenseLayer::create(int in_dim, int out_dim, Activation act, Rng& rng) {
  DenseLayer l;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.activation = act;
  l.weight = Tensor::parameter({out_dim, in_dim}, xavier_uniform(out_dim, in_dim, in_dim, out_dim, rng));
  l.bias = Tensor::parameter({out_dim}, std::vector<double>(static_cast<std::size_t>(out_dim), 0.0));
  assert(l.param_count() == static_cast<std::int64_t>(out_dim) * in_dim + out_dim);
  return l;
}

Tensor DenseLayer::forward(const Tensor& x) const {
  const int feat = x.rank() == 2 ? x.dim(1) : x.dim(0);
  if (feat != in_dim)
    throw ShapeError("dense: input features " + std::to_string(feat) +
                     " != layer in_dim " + std::to_string(in_dim));
  Tensor y = add(matmul(x, transpose(weight)), bias);
  return apply_activation(y, activation);
}

void DenseLayer::register_params(const std::string& prefix, ParamMap& params) {
  params.add(prefix + ".w", weight);
  params.add(prefix + ".b", bias);
}

std::int64_t DenseLayer::param_count() const { return weight.numel() + bias.numel(); }

LstmCell LstmCell::create(int input_dim, int hidden_dim, Rng& rng) {
  LstmCell c;
  c.input_dim = input_dim;
  c.hidden_dim = hidden_dim;
  const int H = hidden_dim, D = input_dim;
  // Each gate block gets its own Xavier scale.
  std::vector<double> wx(static_cast<std::size_t>(4 * H) * D);
  std::vector<double> wh(static_cast<std::size_t>(4 * H) * H);
  for (int g = 0; g < 4; ++g) {
    auto bx = xavier_uniform(H, D, D, H, rng);
    auto bh = xavier_uniform(H, H, H, H, rng);
    std::copy(bx.begin(), bx.end(), wx.begin() + static_cast<std::size_t>(g) * H * D);
    std::copy(bh.begin(), bh.end(), wh.begin() + static_cast<std::size_t>(g) * H * H);
  }
  std::vector<double> b(static_cast<std::size_t>(4 * H), 0.0);
  for (int i = H; i < 2 * H; ++i) b[static_cast<std::size_t>(i)] = 1.0;  // forget gate
  c.w_x = Tensor::parameter({4 * H, D}, std::move(wx));
  c.w_h = Tensor::parameter({4 * H, H}, std::move(wh));
  c.b = Tensor::parameter({4 * H}, std::move(b));
  assert(c.param_count() == 4LL * (static_cast<std::int64_t>(H) * (D + H) + H));
  return c;
}

RecurrentState LstmCell::initial_state(int batch) const {
  Shape s = batch > 0 ? Shape{batch, hidden_dim} : Shape{hidden_dim};
  return RecurrentState{Tensor::zeros(s), Tensor::zeros(s), 0};
}

RecurrentState LstmCell::step(const Tensor& x, const RecurrentState& state) const {
  const int feat = x.rank() == 2 ? x.dim(1) : x.dim(0);
  if (feat != input_dim)
    throw ShapeError("lstm: input features " + std::to_string(feat) +
                     " != cell input_dim " + std::to_string(input_dim));
  const int H = hidden_dim;
  Tensor pre = add(add(matmul(x, transpose(w_x)), matmul(state.h, transpose(w_h))), b);
  Tensor i = sigmoid(slice(pre, 0, H));
  Tensor f = sigmoid(slice(pre, H, H));
  Tensor g = tanh(slice(pre, 2 * H, H));
  Tensor o = sigmoid(slice(pre, 3 * H, H));
  Tensor c_new = add(mul(f, state.c), mul(i, g));
  Tensor h_new = mul(o, tanh(c_new));
  return RecurrentState{h_new, c_new, state.t + 1};
}

std::vector<RecurrentState> LstmCell::unroll(const std::vector<Tensor>& xs,
                                             const RecurrentState& init,
                                             Direction dir) const {
  if (xs.empty()) throw EmptySequenceError("lstm unroll: empty input sequence");
  std::vector<RecurrentState> out(xs.size());
  if (dir == Direction::forward) {
    RecurrentState s = init;
    for (std::size_t t = 0; t < xs.size(); ++t) {
      s = step(xs[t], s);
      out[t] = s;
    }
  } else {
    RecurrentState s = init;
    for (std::size_t i = xs.size(); i-- > 0;) {
      s = step(xs[i], s);
      out[i] = s;  // out[t] covers xs[t..T-1]
    }
  }
  return out;
}

void LstmCell::register_params(const std::string& prefix, ParamMap& params) {
  params.add(prefix + ".w_x", w_x);
  params.add(prefix + ".w_h", w_h);
  params.add(prefix + ".b", b);
}

std::int64_t LstmCell::param_count() const {
  return w_x.numel() + w_h.numel() + b.numel();
}

}  // namespace dvae
