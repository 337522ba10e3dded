#include "dvae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>

#include "dvae/checkpoint.hpp"

namespace dvae {

Adam::Adam(const ParamMap& params, AdamConfig cfg) : cfg_(cfg) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& [name, t] : params.entries()) {
    m_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(t.numel()), 0.0);
  }
}

void Adam::step(ParamMap& params, double grad_scale) {
  if (params.size() != m_.size())
    throw std::logic_error("Adam::step: parameter set changed since construction");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  std::size_t pi = 0;
  for (auto& [name, t] : params.entries()) {
    auto& value = t.mutable_data();
    auto grad = t.grad();
    auto& m = m_[pi];
    auto& v = v_[pi];
    for (std::size_t j = 0; j < value.size(); ++j) {
      double g = (j < grad.size() ? grad[j] : 0.0) * grad_scale;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      double mhat = m[j] / bc1;
      double vhat = v[j] / bc2;
      value[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
    ++pi;
  }
}

void Adam::restore(std::int64_t step, std::vector<std::vector<double>> m,
                   std::vector<std::vector<double>> v) {
  if (m.size() != m_.size() || v.size() != v_.size())
    throw ShapeError("Adam::restore: moment count mismatch");
  t_ = step;
  m_ = std::move(m);
  v_ = std::move(v);
}

double grad_global_norm(const ParamMap& params) {
  double acc = 0.0;
  for (const auto& [name, t] : params.entries())
    for (double g : t.grad()) acc += g * g;
  double norm = std::sqrt(acc);
  if (!std::isfinite(norm)) throw NonFiniteError("gradient norm is not finite");
  return norm;
}

namespace {

std::vector<Tensor> make_batch_frames(const SequenceStore& data,
                                      const std::vector<int>& idx) {
  const int B = static_cast<int>(idx.size());
  const int T = data.sequences[static_cast<std::size_t>(idx[0])].rows;
  const int F = data.feature_dim;
  std::vector<Tensor> frames;
  frames.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    std::vector<double> buf(static_cast<std::size_t>(B) * F);
    for (int b = 0; b < B; ++b) {
      const Matrix& seq = data.sequences[static_cast<std::size_t>(idx[static_cast<std::size_t>(b)])];
      std::copy_n(seq.row(t), F, buf.data() + static_cast<std::size_t>(b) * F);
    }
    frames.push_back(Tensor::constant({B, F}, std::move(buf)));
  }
  return frames;
}

double batch_loss_value(const DvaeModel& model, const std::vector<Tensor>& frames,
                        NoiseSource& noise, int batch) {
  ElboResult el = model.elbo(frames, noise);
  return -el.total.item() / static_cast<double>(batch);
}

}  // namespace

double train_epoch(DvaeModel& model, const SequenceStore& data, int batch_size,
                   Adam& adam, double clip_norm, Rng& order_rng,
                   NoiseSource& noise, double kl_weight) {
  if (data.sequences.empty()) throw EmptySequenceError("train_epoch: empty dataset");
  std::vector<int> order(data.sequences.size());
  std::iota(order.begin(), order.end(), 0);
  order_rng.shuffle(order);

  double loss_acc = 0.0;
  std::int64_t count = 0;
  int batch_index = 0;
  for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
    std::vector<int> idx(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(
                                             std::min(at + static_cast<std::size_t>(batch_size),
                                                      order.size())));
    const int B = static_cast<int>(idx.size());
    auto frames = make_batch_frames(data, idx);

    model.params().zero_grads();
    ElboResult el = model.elbo(frames, noise);
    Tensor objective = kl_weight == 1.0
                           ? el.total
                           : sub(el.recon, el.kl * kl_weight);
    Tensor loss = objective * (-1.0 / static_cast<double>(B));
    double loss_value = loss.item();
    if (!std::isfinite(loss_value))
      throw NonFiniteLossError(batch_index, "non-finite loss in batch " +
                                                std::to_string(batch_index));
    backward(loss);
    double scale = 1.0;
    if (clip_norm > 0.0) {
      double norm = grad_global_norm(model.params());
      if (norm > clip_norm) scale = clip_norm / norm;
    }
    adam.step(model.params(), scale);

    loss_acc += loss_value * B;
    count += B;
    ++batch_index;
  }
  return loss_acc / static_cast<double>(count);
}

double validation_loss(const DvaeModel& model, const SequenceStore& data,
                       int batch_size, std::uint64_t noise_seed) {
  if (data.sequences.empty()) throw EmptySequenceError("validation_loss: empty dataset");
  NoGradGuard ng;
  NoiseSource noise(noise_seed);
  double acc = 0.0;
  std::int64_t count = 0;
  for (std::size_t at = 0; at < data.sequences.size();
       at += static_cast<std::size_t>(batch_size)) {
    std::vector<int> idx;
    for (std::size_t i = at;
         i < std::min(at + static_cast<std::size_t>(batch_size), data.sequences.size()); ++i)
      idx.push_back(static_cast<int>(i));
    auto frames = make_batch_frames(data, idx);
    acc += batch_loss_value(model, frames, noise, 1);  // sum over batch
    count += static_cast<std::int64_t>(idx.size());
  }
  return acc / static_cast<double>(count);
}

TrainState fit(DvaeModel& model, const SequenceStore& train_set,
               const SequenceStore& val_set, const TrainConfig& cfg,
               const std::string& checkpoint_dir, const Checkpoint* resume,
               const EpochCallback& on_epoch) {
  if (train_set.sequences.empty() || val_set.sequences.empty())
    throw EmptySequenceError("fit: train and validation sets must be non-empty");

  Adam adam(model.params(), cfg.adam);
  TrainState st;
  st.patience = cfg.patience;
  st.rng_seed = cfg.seed;

  std::vector<std::vector<double>> best_values;
  auto snapshot = [&]() {
    std::vector<std::vector<double>> vals;
    vals.reserve(model.params().size());
    for (const auto& [name, t] : model.params().entries()) vals.push_back(t.values());
    return vals;
  };

  int start_epoch = 0;
  if (resume != nullptr) {
    apply_checkpoint_params(model, *resume);
    adam.restore(resume->adam_step, resume->adam_m, resume->adam_v);
    st = resume->state;
    st.patience = cfg.patience;
    start_epoch = st.epoch;
    best_values = resume->best_values.empty() ? resume->values : resume->best_values;
  }

  const std::uint64_t val_seed = derive_seed(cfg.seed, "val-noise");
  const bool write_ckpt = !checkpoint_dir.empty();
  if (write_ckpt) std::filesystem::create_directories(checkpoint_dir);

  for (int epoch = start_epoch; epoch < cfg.max_epochs; ++epoch) {
    double kl_weight = 1.0;
    if (cfg.kl_anneal_epochs > 0)
      kl_weight = std::min(1.0, static_cast<double>(epoch + 1) /
                                    static_cast<double>(cfg.kl_anneal_epochs));
    Rng order_rng(derive_seed(cfg.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    NoiseSource noise(derive_seed(cfg.seed, "train-noise", static_cast<std::uint64_t>(epoch)));
    double tr = train_epoch(model, train_set, cfg.batch_size, adam, cfg.clip_norm,
                            order_rng, noise, kl_weight);
    double va = validation_loss(model, val_set, cfg.batch_size, val_seed);

    st.history.emplace_back(tr, va);
    st.epoch = epoch + 1;
    const bool improved = va < st.best_val;
    bool stop = false;
    if (improved) {
      st.best_val = va;
      st.epochs_since_best = 0;
      best_values = snapshot();
      if (write_ckpt)
        save_checkpoint(checkpoint_dir + "/best.ckpt",
                        make_checkpoint(model, &adam, st, cfg.seed));
    } else {
      if (st.epochs_since_best < st.patience) ++st.epochs_since_best;
      stop = st.epochs_since_best >= st.patience;
    }
    if (write_ckpt)
      save_checkpoint(checkpoint_dir + "/last.ckpt",
                      make_checkpoint(model, &adam, st, cfg.seed, &best_values));
    if (on_epoch) on_epoch(epoch, tr, va);
    if (stop) break;
  }

  if (!best_values.empty()) {
    std::size_t i = 0;
    for (auto& [name, t] : model.params().entries()) t.mutable_data() = best_values[i++];
  }
  return st;
}

}  // namespace dvae
