#include "dvae/model.hpp"
#include "models/heads.hpp"

namespace dvae::internal {

// Per-frame model: standard Gaussian prior, q(z_t | x_t), p(x_t | z_t).
// Also serves as the severed-temporal reduction of the recurrent models.
class VaeModel final : public DvaeModel {
 public:
  VaeModel(const DvaeConfig& cfg, std::uint64_t seed) : DvaeModel(cfg) {
    Rng rng(seed);
    enc_ = GaussianHead::create(cfg.feature_dim, cfg.hidden_dim, cfg.latent_dim,
                                cfg.head_activation, rng);
    dec_ = GammaHead::create(cfg.latent_dim, cfg.hidden_dim, cfg.feature_dim,
                             cfg.head_activation, rng);
    enc_.register_params("enc", params_);
    dec_.register_params("dec", params_);
    prior_.dim = cfg.latent_dim;
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
    for (int t = 0; t < T; ++t) {
      DiagGaussian q = enc_.forward(log_features(frames[static_cast<std::size_t>(t)]));
      Tensor z = sample_latent(q, noise, opts, t, B, L);
      DiagGaussian pz = prior_.materialize(B);
      GammaShape1 lik = dec_.forward(z);
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
    }
    return pr;
  }

  GenerateResult generate(int T, NoiseSource& noise, const Intervention* iv,
                          SequenceTrace* trace) const override {
    NoGradGuard ng;
    const int L = cfg_.latent_dim;
    const int F = cfg_.feature_dim;
    GenerateResult out;
    out.z = Matrix(T, L);
    out.sigma2 = Matrix(T, F);
    if (trace) trace->steps.assign(static_cast<std::size_t>(T), {});
    for (int t = 0; t < T; ++t) {
      DiagGaussian pz = prior_.materialize(1);
      Tensor z = sample_prior_latent(pz, noise, iv, t, 1, L);
      GammaShape1 lik = dec_.forward(z);
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
    }
    return out;
  }

 private:
  GaussianHead enc_;
  GammaHead dec_;
  StandardGaussianPrior prior_;
};

std::unique_ptr<DvaeModel> make_vae(const DvaeConfig& cfg, std::uint64_t seed) {
  return std::make_unique<VaeModel>(cfg, seed);
}

}  // namespace dvae::internal
