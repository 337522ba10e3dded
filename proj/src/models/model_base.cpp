#include <cmath>

#include "dvae/errors.hpp"
#include "dvae/model.hpp"
#include "models/heads.hpp"

namespace dvae {

namespace {
// Offset keeping the observation transform finite on silence bins.
constexpr double kFeatureOffset = 1e-4;
}

ModelKind model_kind_from_string(const std::string& s) {
  for (ModelKind k : all_model_kinds())
    if (model_kind_to_string(k) == s) return k;
  throw ConfigError("unknown model kind: " + s);
}

std::string model_kind_to_string(ModelKind k) {
  switch (k) {
    case ModelKind::vae: return "vae";
    case ModelKind::dkf: return "dkf";
    case ModelKind::storn: return "storn";
    case ModelKind::vrnn: return "vrnn";
    case ModelKind::srnn: return "srnn";
    case ModelKind::rvae: return "rvae";
    case ModelKind::dsae: return "dsae";
  }
  throw ConfigError("invalid model kind value");
}

const std::vector<ModelKind>& all_model_kinds() {
  static const std::vector<ModelKind> kinds = {
      ModelKind::vae,  ModelKind::dkf,  ModelKind::storn, ModelKind::vrnn,
      ModelKind::srnn, ModelKind::rvae, ModelKind::dsae};
  return kinds;
}

void DvaeConfig::validate() const {
  if (feature_dim < 1 || latent_dim < 1 || hidden_dim < 1)
    throw ConfigError("model dimensions must be >= 1");
  if (max_seq_len < 1) throw ConfigError("max_seq_len must be >= 1");
  if (kind == ModelKind::dsae && dsae_v_dim < 1)
    throw ConfigError("dsae_v_dim must be >= 1");
  if (rvae_hidden && *rvae_hidden < 1) throw ConfigError("rvae_hidden must be >= 1");
}

std::unique_ptr<DvaeModel> DvaeModel::create(const DvaeConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (cfg.sever_temporal) {
    // With every temporal path severed the remaining architecture is the
    // per-frame VAE; build exactly that (same parameter names/shapes) while
    // keeping the configured kind label.
    if (cfg.kind == ModelKind::dsae)
      throw ConfigError("sever_temporal is not defined for dsae");
    return internal::make_vae(cfg, seed);
  }
  switch (cfg.kind) {
    case ModelKind::vae: return internal::make_vae(cfg, seed);
    case ModelKind::dkf: return internal::make_dkf(cfg, seed);
    case ModelKind::storn: return internal::make_storn(cfg, seed);
    case ModelKind::vrnn: return internal::make_vrnn(cfg, seed);
    case ModelKind::srnn: return internal::make_srnn(cfg, seed);
    case ModelKind::rvae: return internal::make_rvae(cfg, seed);
    case ModelKind::dsae: return internal::make_dsae(cfg, seed);
  }
  throw ConfigError("invalid model kind value");
}

void DvaeModel::check_frames(const std::vector<Tensor>& frames) const {
  if (frames.empty()) throw EmptySequenceError("model pass: empty frame sequence");
  if (static_cast<int>(frames.size()) > cfg_.max_seq_len)
    throw ShapeError("model pass: sequence length " + std::to_string(frames.size()) +
                     " exceeds max_seq_len " + std::to_string(cfg_.max_seq_len));
  const int B = frames[0].rank() == 2 ? frames[0].dim(0) : -1;
  for (const auto& f : frames) {
    if (f.rank() != 2 || f.dim(0) != B || f.dim(1) != cfg_.feature_dim)
      throw ShapeError("model pass: every frame must be [batch x " +
                       std::to_string(cfg_.feature_dim) + "]");
  }
}

Tensor DvaeModel::log_features(const Tensor& frame) const {
  std::vector<double> v = frame.values();
  for (auto& x : v) x = std::log(x + kFeatureOffset);
  return Tensor::constant(frame.shape(), std::move(v));
}

Tensor DvaeModel::log_features_values(const std::vector<double>& power, int batch) const {
  std::vector<double> v = power;
  for (auto& x : v) x = std::log(x + kFeatureOffset);
  return Tensor::constant({batch, static_cast<int>(power.size()) / batch}, std::move(v));
}

ElboResult DvaeModel::elbo(const std::vector<Tensor>& frames, NoiseSource& noise) const {
  PassResult pr = run_pass(frames, noise, {});
  ElboResult r;
  r.recon = pr.recon_log_prob;
  r.kl = pr.kl;
  r.total = sub(pr.recon_log_prob, pr.kl);
  return r;
}

InferResult DvaeModel::infer(const Matrix& x, NoiseSource& noise) const {
  NoGradGuard ng;
  auto frames = frames_from_matrix(x);
  SequenceTrace trace;
  PassOptions opts;
  opts.trace = &trace;
  PassResult pr = run_pass(frames, noise, opts);
  const int T = static_cast<int>(frames.size());
  const int L = cfg_.latent_dim;
  InferResult out;
  out.z = Matrix(T, L);
  out.post_mean = Matrix(T, L);
  out.post_log_var = Matrix(T, L);
  for (int t = 0; t < T; ++t) {
    const auto& ts = trace.steps[static_cast<std::size_t>(t)];
    for (int l = 0; l < L; ++l) {
      out.z.at(t, l) = ts.z[static_cast<std::size_t>(l)];
      out.post_mean.at(t, l) = ts.post_mean[static_cast<std::size_t>(l)];
      out.post_log_var.at(t, l) = ts.post_log_var[static_cast<std::size_t>(l)];
    }
  }
  return out;
}

Matrix DvaeModel::resynthesize(const Matrix& x, NoiseSource& noise,
                               bool use_posterior_mean) const {
  NoGradGuard ng;
  auto frames = frames_from_matrix(x);
  PassOptions opts;
  opts.use_posterior_mean = use_posterior_mean;
  PassResult pr = run_pass(frames, noise, opts);
  const int T = static_cast<int>(frames.size());
  const int F = cfg_.feature_dim;
  Matrix sigma2(T, F);
  for (int t = 0; t < T; ++t) {
    Tensor scale = gamma1_scale(pr.likelihoods[static_cast<std::size_t>(t)]);
    auto v = scale.values();
    for (int f = 0; f < F; ++f) sigma2.at(t, f) = v[static_cast<std::size_t>(f)];
  }
  return sigma2;
}

void DvaeModel::copy_parameters_from(const DvaeModel& other) {
  for (auto& [name, t] : params_.entries()) {
    const Tensor* src = other.params().find(name);
    if (src == nullptr)
      throw ShapeError("copy_parameters_from: missing parameter " + name);
    if (src->shape() != t.shape())
      throw ShapeError("copy_parameters_from: shape mismatch for " + name);
    t.mutable_data() = src->values();
  }
}

std::vector<Tensor> frames_from_matrix(const Matrix& x) {
  std::vector<Tensor> frames;
  frames.reserve(static_cast<std::size_t>(x.rows));
  for (int t = 0; t < x.rows; ++t) {
    std::vector<double> row(x.row(t), x.row(t) + x.cols);
    frames.push_back(Tensor::constant({1, x.cols}, std::move(row)));
  }
  return frames;
}

}  // namespace dvae
