#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dvae/distributions.hpp"
#include "dvae/layers.hpp"
#include "dvae/matrix.hpp"
#include "dvae/random.hpp"
#include "dvae/tensor.hpp"

namespace dvae {

enum class ModelKind { vae, dkf, storn, vrnn, srnn, rvae, dsae };

ModelKind model_kind_from_string(const std::string& s);
std::string model_kind_to_string(ModelKind k);
const std::vector<ModelKind>& all_model_kinds();

struct DvaeConfig {
  ModelKind kind = ModelKind::vae;
  int feature_dim = 257;  // F
  int latent_dim = 16;    // L
  int hidden_dim = 128;   // H
  int max_seq_len = 150;  // longest sequence a pass will accept
  int dsae_v_dim = 8;     // sequence-level variable (dsae only)
  // Lighter RVAE variant: overrides the recurrent width for that model only.
  std::optional<int> rvae_hidden;
  // Activation of the hidden layer inside every distribution-parameter head.
  Activation head_activation = Activation::tanh;
  // Diagnostic mode: drops every temporal conditioning path, reducing the
  // model to the per-frame architecture shared with the plain VAE.
  bool sever_temporal = false;

  void validate() const;
};

// Snapshot of the distribution parameters produced at one step; used by the
// structural conditional-independence probes and by inference consumers.
struct TraceStep {
  std::vector<double> prior_mean, prior_log_var;
  std::vector<double> post_mean, post_log_var;
  std::vector<double> lik_log_scale;
  std::vector<double> z;
  std::vector<double> xhat;  // generation only: the fed-back reconstruction
};

struct SequenceTrace {
  std::vector<TraceStep> steps;
  std::vector<double> v_post_mean, v_post_log_var, v;  // dsae sequence variable
};

// Do-style overrides applied at the production point of each variable: the
// override replaces the value every downstream computation sees. Keys are
// 0-based step indices.
struct Intervention {
  std::map<int, std::vector<double>> force_z;
  std::map<int, std::vector<double>> force_xhat;  // generation feedback only
  std::optional<std::vector<double>> force_v;     // dsae
};

struct PassOptions {
  bool use_posterior_mean = false;
  const Intervention* intervention = nullptr;
  SequenceTrace* trace = nullptr;
};

// One teacher-forced encoder/decoder sweep over a batch of sequences.
// Scalars are sums over batch and time; the caller normalizes.
struct PassResult {
  Tensor recon_log_prob;
  Tensor kl;
  std::vector<Tensor> z;  // sampled latents per step, [B x L]
  std::vector<DiagGaussian> posteriors;
  std::vector<DiagGaussian> priors;
  std::vector<GammaShape1> likelihoods;
};

struct ElboResult {
  Tensor total;  // recon - kl
  Tensor recon;
  Tensor kl;
};

struct GenerateResult {
  Matrix z;       // T x L
  Matrix sigma2;  // T x F, strictly positive
};

struct InferResult {
  Matrix z;             // T x L
  Matrix post_mean;     // T x L
  Matrix post_log_var;  // T x L
};

// Shared interface of the seven sequence models. A model owns its parameters;
// passes read them and are safe to run concurrently with other passes as long
// as no optimizer update is in flight.
class DvaeModel {
 public:
  virtual ~DvaeModel() = default;

  static std::unique_ptr<DvaeModel> create(const DvaeConfig& cfg, std::uint64_t init_seed);

  const DvaeConfig& config() const { return cfg_; }
  ModelKind kind() const { return cfg_.kind; }
  ParamMap& params() { return params_; }
  const ParamMap& params() const { return params_; }

  // frames[t] is a [B x F] constant of nonnegative power values.
  virtual PassResult run_pass(const std::vector<Tensor>& frames, NoiseSource& noise,
                              const PassOptions& opts = {}) const = 0;

  // Ancestral sampling in the order z_1, x^_1, z_2, x^_2, ...; the Gamma mean
  // (the scale itself) is fed back as the reconstruction.
  virtual GenerateResult generate(int T, NoiseSource& noise,
                                  const Intervention* iv = nullptr,
                                  SequenceTrace* trace = nullptr) const = 0;

  // Single-sample estimator of the sequence lower bound, summed over the
  // batch: sum_t log-likelihood - sum_t KL(posterior_t || prior_t), with the
  // prior evaluated at the sampled past latents and the observed past frames.
  ElboResult elbo(const std::vector<Tensor>& frames, NoiseSource& noise) const;

  InferResult infer(const Matrix& x, NoiseSource& noise) const;

  // Encoder pass (posterior mean when the flag is set) followed by the
  // teacher-forced likelihood pass; returns the variance spectrogram.
  Matrix resynthesize(const Matrix& x, NoiseSource& noise, bool use_posterior_mean) const;

  // Copies values from another model with identical parameter names/shapes.
  void copy_parameters_from(const DvaeModel& other);

 protected:
  explicit DvaeModel(const DvaeConfig& cfg) : cfg_(cfg) {}

  void check_frames(const std::vector<Tensor>& frames) const;

  // Observation transform applied to every conditioning input: ln(x + 1e-4).
  // Values only; conditioning inputs are treated as constants.
  Tensor log_features(const Tensor& frame) const;
  Tensor log_features_values(const std::vector<double>& power, int batch) const;

  DvaeConfig cfg_;
  ParamMap params_;
};

// Converts a T x F matrix into per-step [1 x F] constants.
std::vector<Tensor> frames_from_matrix(const Matrix& x);

}  // namespace dvae
