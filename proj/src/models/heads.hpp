#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "dvae/distributions.hpp"
#include "dvae/layers.hpp"
#include "dvae/model.hpp"

namespace dvae::internal {

// One hidden layer followed by linear mean / log-variance outputs. Every
// Gaussian in the zoo (priors, transitions, posteriors) is parameterized by
// one of these.
struct GaussianHead {
  DenseLayer hidden;
  DenseLayer mean;
  DenseLayer log_var;

  static GaussianHead create(int in_dim, int hidden_dim, int out_dim, Activation act,
                             Rng& rng) {
    GaussianHead h;
    h.hidden = DenseLayer::create(in_dim, hidden_dim, act, rng);
    h.mean = DenseLayer::create(hidden_dim, out_dim, Activation::linear, rng);
    h.log_var = DenseLayer::create(hidden_dim, out_dim, Activation::linear, rng);
    return h;
  }

  DiagGaussian forward(const Tensor& in) const {
    Tensor hid = hidden.forward(in);
    return DiagGaussian{mean.forward(hid), log_var.forward(hid)};
  }

  void register_params(const std::string& prefix, ParamMap& params) {
    hidden.register_params(prefix + ".hidden", params);
    mean.register_params(prefix + ".mean", params);
    log_var.register_params(prefix + ".log_var", params);
  }
};

// One hidden layer followed by a linear log-scale output for the shape-1
// Gamma likelihood.
struct GammaHead {
  DenseLayer hidden;
  DenseLayer log_scale;

  static GammaHead create(int in_dim, int hidden_dim, int out_dim, Activation act,
                          Rng& rng) {
    GammaHead h;
    h.hidden = DenseLayer::create(in_dim, hidden_dim, act, rng);
    h.log_scale = DenseLayer::create(hidden_dim, out_dim, Activation::linear, rng);
    return h;
  }

  GammaShape1 forward(const Tensor& in) const {
    return GammaShape1{log_scale.forward(hidden.forward(in))};
  }

  void register_params(const std::string& prefix, ParamMap& params) {
    hidden.register_params(prefix + ".hidden", params);
    log_scale.register_params(prefix + ".log_scale", params);
  }
};

inline TraceStep* trace_at(SequenceTrace* tr, int t) {
  return tr ? &tr->steps[static_cast<std::size_t>(t)] : nullptr;
}

inline void trace_prior(SequenceTrace* tr, int t, const DiagGaussian& d) {
  if (auto* ts = trace_at(tr, t)) {
    ts->prior_mean = d.mean.values();
    ts->prior_log_var = d.log_var.values();
  }
}

inline void trace_posterior(SequenceTrace* tr, int t, const DiagGaussian& d) {
  if (auto* ts = trace_at(tr, t)) {
    ts->post_mean = d.mean.values();
    ts->post_log_var = d.log_var.values();
  }
}

inline void trace_likelihood(SequenceTrace* tr, int t, const GammaShape1& d) {
  if (auto* ts = trace_at(tr, t)) ts->lik_log_scale = d.log_scale.values();
}

inline void trace_z(SequenceTrace* tr, int t, const Tensor& z) {
  if (auto* ts = trace_at(tr, t)) ts->z = z.values();
}

inline void trace_xhat(SequenceTrace* tr, int t, const std::vector<double>& xhat) {
  if (auto* ts = trace_at(tr, t)) ts->xhat = xhat;
}

inline const std::vector<double>* forced_z(const Intervention* iv, int t) {
  if (iv == nullptr) return nullptr;
  auto it = iv->force_z.find(t);
  return it == iv->force_z.end() ? nullptr : &it->second;
}

inline const std::vector<double>* forced_xhat(const Intervention* iv, int t) {
  if (iv == nullptr) return nullptr;
  auto it = iv->force_xhat.find(t);
  return it == iv->force_xhat.end() ? nullptr : &it->second;
}

// Draws the step's noise unconditionally (so interventions never desync the
// stream), then yields the forced value, the posterior mean, or the
// reparameterized sample.
inline Tensor sample_latent(const DiagGaussian& q, NoiseSource& noise,
                            const PassOptions& opts, int t, int batch, int dim) {
  Tensor n = Tensor::constant({batch, dim},
                              noise.standard_normal(static_cast<std::size_t>(batch) * dim));
  if (const auto* f = forced_z(opts.intervention, t)) {
    if (static_cast<int>(f->size()) != batch * dim)
      throw ShapeError("intervention force_z size mismatch");
    return Tensor::constant({batch, dim}, *f);
  }
  if (opts.use_posterior_mean) return q.mean;
  return gaussian_sample(q, n);
}

inline Tensor sample_prior_latent(const DiagGaussian& p, NoiseSource& noise,
                                  const Intervention* iv, int t, int batch, int dim) {
  Tensor n = Tensor::constant({batch, dim},
                              noise.standard_normal(static_cast<std::size_t>(batch) * dim));
  if (const auto* f = forced_z(iv, t)) {
    if (static_cast<int>(f->size()) != batch * dim)
      throw ShapeError("intervention force_z size mismatch");
    return Tensor::constant({batch, dim}, *f);
  }
  return gaussian_sample(p, n);
}

// Factory hooks, one per model translation unit.
std::unique_ptr<DvaeModel> make_vae(const DvaeConfig& cfg, std::uint64_t seed);
std::unique_ptr<DvaeModel> make_dkf(const DvaeConfig& cfg, std::uint64_t seed);
std::unique_ptr<DvaeModel> make_storn(const DvaeConfig& cfg, std::uint64_t seed);
std::unique_ptr<DvaeModel> make_vrnn(const DvaeConfig& cfg, std::uint64_t seed);
std::unique_ptr<DvaeModel> make_srnn(const DvaeConfig& cfg, std::uint64_t seed);
std::unique_ptr<DvaeModel> make_rvae(const DvaeConfig& cfg, std::uint64_t seed);
std::unique_ptr<DvaeModel> make_dsae(const DvaeConfig& cfg, std::uint64_t seed);

}  // namespace dvae::internal
