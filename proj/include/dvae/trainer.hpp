#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "dvae/dataset.hpp"
#include "dvae/model.hpp"

namespace dvae {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment arrays mirror the model's ParamMap order;
// updates touch parameter values only, never gradients.
class Adam {
 public:
  Adam(const ParamMap& params, AdamConfig cfg);

  // One update from the accumulated gradients, each gradient scaled by
  // grad_scale (global-norm clipping factor).
  void step(ParamMap& params, double grad_scale = 1.0);

  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void restore(std::int64_t step, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v);

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

// Euclidean norm of all accumulated gradients; NonFiniteError if not finite.
double grad_global_norm(const ParamMap& params);

struct TrainConfig {
  AdamConfig adam;
  int batch_size = 32;
  int patience = 20;
  int max_epochs = 300;
  double clip_norm = 10.0;     // <= 0 disables clipping
  int kl_anneal_epochs = 0;    // 0 = off; else KL weight ramps over this many epochs
  std::uint64_t seed = 0;
};

struct TrainState {
  int epoch = 0;  // completed epochs
  double best_val = std::numeric_limits<double>::infinity();
  int epochs_since_best = 0;
  int patience = 20;
  std::uint64_t rng_seed = 0;
  std::vector<std::pair<double, double>> history;  // (train_loss, val_loss)
};

// One shuffled pass: per batch, the mean per-sequence negative lower bound is
// the loss; backward, clip, Adam update. Returns the epoch mean loss.
// Throws NonFiniteLossError naming the offending batch.
double train_epoch(DvaeModel& model, const SequenceStore& data, int batch_size,
                   Adam& adam, double clip_norm, Rng& order_rng,
                   NoiseSource& noise, double kl_weight = 1.0);

// Mean per-sequence negative lower bound without updates, using noise drawn
// from the given fixed seed so epochs compare like with like.
double validation_loss(const DvaeModel& model, const SequenceStore& data,
                       int batch_size, std::uint64_t noise_seed);

struct Checkpoint;  // checkpoint.hpp

using EpochCallback =
    std::function<void(int epoch, double train_loss, double val_loss)>;

// Full training loop with early stopping. Per-epoch RNG streams are derived
// from (seed, epoch) so a resumed run replays the uninterrupted one exactly.
// On return the model holds the best-validation parameters. When
// checkpoint_dir is nonempty, best.ckpt and last.ckpt are maintained there.
TrainState fit(DvaeModel& model, const SequenceStore& train_set,
               const SequenceStore& val_set, const TrainConfig& cfg,
               const std::string& checkpoint_dir = "",
               const Checkpoint* resume = nullptr,
               const EpochCallback& on_epoch = {});

}  // namespace dvae
