#pragma once

#include <string>
#include <vector>

#include "dvae/random.hpp"
#include "dvae/tensor.hpp"

namespace dvae {

enum class Activation { linear, tanh, sigmoid, softplus };

Activation activation_from_string(const std::string& s);
std::string activation_to_string(Activation a);

// Ordered name -> tensor registry. Every trainable tensor of a model lives
// here exactly once; the order is the serialization and optimizer order.
class ParamMap {
 public:
  void add(const std::string& name, Tensor t);
  Tensor* find(const std::string& name);
  const Tensor* find(const std::string& name) const;
  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::int64_t total_elements() const;
  void zero_grads();

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

// Fully connected layer, weight stored [out x in].
struct DenseLayer {
  Tensor weight;
  Tensor bias;
  Activation activation = Activation::linear;
  int in_dim = 0;
  int out_dim = 0;

  // Xavier-uniform weights, zero bias.
  static DenseLayer create(int in_dim, int out_dim, Activation act, Rng& rng);

  // x is [in] or [batch x in].
  Tensor forward(const Tensor& x) const;

  void register_params(const std::string& prefix, ParamMap& params);
  std::int64_t param_count() const;
};

struct RecurrentState {
  Tensor h;
  Tensor c;
  int t = 0;
};

enum class Direction { forward, backward };

// Single LSTM cell. Gate blocks are stored stacked in one [4H x D] / [4H x H]
// matrix pair in the order (input, forget, candidate, output); the forget
// block of the bias is initialized to +1.
struct LstmCell {
  Tensor w_x;  // [4H x D]
  Tensor w_h;  // [4H x H]
  Tensor b;    // [4H]
  int input_dim = 0;
  int hidden_dim = 0;

  static LstmCell create(int input_dim, int hidden_dim, Rng& rng);

  RecurrentState initial_state(int batch) const;

  // x is [D] or [batch x D]; state shapes must match x's batching.
  RecurrentState step(const Tensor& x, const RecurrentState& state) const;

  // Runs the cell over xs. Backward direction processes the reversed input
  // and returns states re-aligned to the original time order, so out[t] is
  // the state after consuming xs[t..T-1].
  std::vector<RecurrentState> unroll(const std::vector<Tensor>& xs,
                                     const RecurrentState& init,
                                     Direction dir) const;

  void register_params(const std::string& prefix, ParamMap& params);
  std::int64_t param_count() const;  // 4*(H*(D+H)+H)
};

}  // namespace dvae
