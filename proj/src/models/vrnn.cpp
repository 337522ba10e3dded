#include "dvae/model.hpp"
#include "models/heads.hpp"

namespace dvae::internal {

// VRNN: a single recurrence h_t over feature extractions of (x_{t-1}, z_{t-1})
// shared by prior, likelihood and encoder, keeping every dependency of the
// general causal factorization. The encoder is causal: q(z_t | x_{1:t},
// z_{1:t-1}) through (phi_x(x_t), h_t).
class VrnnModel final : public DvaeModel {
 public:
  VrnnModel(const DvaeConfig& cfg, std::uint64_t seed) : DvaeModel(cfg) {
    Rng rng(seed);
    const int F = cfg.feature_dim, L = cfg.latent_dim, H = cfg.hidden_dim;
    phi_x_ = DenseLayer::create(F, H, Activation::tanh, rng);
    phi_z_ = DenseLayer::create(L, H, Activation::tanh, rng);
    rnn_ = LstmCell::create(2 * H, H, rng);
    prior_head_ = GaussianHead::create(H, H, L, cfg.head_activation, rng);
    dec_ = GammaHead::create(2 * H, H, F, cfg.head_activation, rng);
    enc_ = GaussianHead::create(2 * H, H, L, cfg.head_activation, rng);
    phi_x_.register_params("phi_x", params_);
    phi_z_.register_params("phi_z", params_);
    rnn_.register_params("rnn", params_);
    prior_head_.register_params("prior", params_);
    dec_.register_params("dec", params_);
    enc_.register_params("enc", params_);
  }

  PassResult run_pass(const std::vector<Tensor>& frames, NoiseSource& noise,
                      const PassOptions& opts) const override {
    check_frames(frames);
    const int T = static_cast<int>(frames.size());
    const int B = frames[0].dim(0);
    const int L = cfg_.latent_dim;
    if (opts.trace) opts.trace->steps.assign(static_cast<std::size_t>(T), {});

    PassResult pr;
    pr.recon_log_prob = Tensor::scalar(0.0);
    pr.kl = Tensor::scalar(0.0);
    RecurrentState h = rnn_.initial_state(B);
    for (int t = 0; t < T; ++t) {
      Tensor fx = phi_x_.forward(log_features(frames[static_cast<std::size_t>(t)]));
      DiagGaussian pz = prior_head_.forward(h.h);
      DiagGaussian q = enc_.forward(concat(fx, h.h));
      Tensor z = sample_latent(q, noise, opts, t, B, L);
      Tensor fz = phi_z_.forward(z);
      GammaShape1 lik = dec_.forward(concat(fz, h.h));
      pr.recon_log_prob =
          add(pr.recon_log_prob, gamma1_log_prob(lik, frames[static_cast<std::size_t>(t)]));
      pr.kl = add(pr.kl, gaussian_kl(q, pz));
      trace_prior(opts.trace, t, pz);
      trace_posterior(opts.trace, t, q);
      trace_likelihood(opts.trace, t, lik);
      trace_z(opts.trace, t, z);
      pr.z.push_back(z);
      pr.posteriors.push_back(q);
      pr.priors.push_back(pz);
      pr.likelihoods.push_back(lik);
      h = rnn_.step(concat(fx, fz), h);
    }
    return pr;
  }

  GenerateResult generate(int T, NoiseSource& noise, const Intervention* iv,
                          SequenceTrace* trace) const override {
    NoGradGuard ng;
    const int L = cfg_.latent_dim, F = cfg_.feature_dim;
    GenerateResult out;
    out.z = Matrix(T, L);
    out.sigma2 = Matrix(T, F);
    if (trace) trace->steps.assign(static_cast<std::size_t>(T), {});
    RecurrentState h = rnn_.initial_state(1);
    for (int t = 0; t < T; ++t) {
      DiagGaussian pz = prior_head_.forward(h.h);
      Tensor z = sample_prior_latent(pz, noise, iv, t, 1, L);
      Tensor fz = phi_z_.forward(z);
      GammaShape1 lik = dec_.forward(concat(fz, h.h));
      std::vector<double> sigma2 = gamma1_scale(lik).values();
      std::vector<double> xhat = sigma2;
      if (const auto* f = forced_xhat(iv, t)) xhat = *f;
      trace_prior(trace, t, pz);
      trace_likelihood(trace, t, lik);
      trace_z(trace, t, z);
      trace_xhat(trace, t, xhat);
      auto zv = z.values();
      for (int l = 0; l < L; ++l) out.z.at(t, l) = zv[static_cast<std::size_t>(l)];
      for (int f = 0; f < F; ++f) out.sigma2.at(t, f) = sigma2[static_cast<std::size_t>(f)];
      Tensor fx = phi_x_.forward(log_features_values(xhat, 1));
      h = rnn_.step(concat(fx, fz), h);
    }
    return out;
  }

 private:
  DenseLayer phi_x_, phi_z_;
  LstmCell rnn_;
  GaussianHead prior_head_;
  GammaHead dec_;
  GaussianHead enc_;
};

std::unique_ptr<DvaeModel> make_vrnn(const DvaeConfig& cfg, std::uint64_t seed) {
  return std::make_unique<VrnnModel>(cfg, seed);
}

}  // namespace dvae::internal
