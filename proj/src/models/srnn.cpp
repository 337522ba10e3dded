#include "dvae/model.hpp"
#include "models/heads.hpp"

namespace dvae::internal {

// SRNN: deterministic forward recurrence h_t over x_{1:t-1}; first-order
// stochastic layer p(z_t | z_{t-1}, h_t); emission p(x_t | z_t, h_t).
// Inference runs a backward recurrence over (h_t, x_t) so q(z_t | z_{t-1},
// x_{1:T}) matches the structure of the exact posterior.
class SrnnModel final : public DvaeModel {
 public:
  SrnnModel(const DvaeConfig& cfg, std::uint64_t seed) : DvaeModel(cfg) {
    Rng rng(seed);
    const int F = cfg.feature_dim, L = cfg.latent_dim, H = cfg.hidden_dim;
    fwd_x_ = LstmCell::create(F, H, rng);
    prior_head_ = GaussianHead::create(L + H, H, L, cfg.head_activation, rng);
    dec_ = GammaHead::create(L + H, H, F, cfg.head_activation, rng);
    bwd_ = LstmCell::create(H + F, H, rng);
    enc_ = GaussianHead::create(L + H, H, L, cfg.head_activation, rng);
    fwd_x_.register_params("fwd_x", params_);
    prior_head_.register_params("prior", params_);
    dec_.register_params("dec", params_);
    bwd_.register_params("enc.bwd", params_);
    enc_.register_params("enc.head", params_);
  }

  PassResult run_pass(const std::vector<Tensor>& frames, NoiseSource& noise,
                      const PassOptions& opts) const override {
    check_frames(frames);
    const int T = static_cast<int>(frames.size());
    const int B = frames[0].dim(0);
    const int L = cfg_.latent_dim, F = cfg_.feature_dim;
    if (opts.trace) opts.trace->steps.assign(static_cast<std::size_t>(T), {});

    std::vector<Tensor> xfeat;
    xfeat.reserve(frames.size());
    for (const auto& f : frames) xfeat.push_back(log_features(f));

    // h[t] consumes x_{1:t-1}: shift the features right by one step.
    std::vector<Tensor> shifted;
    shifted.reserve(frames.size());
    shifted.push_back(Tensor::zeros({B, F}));
    for (int t = 0; t + 1 < T; ++t) shifted.push_back(xfeat[static_cast<std::size_t>(t)]);
    auto h = fwd_x_.unroll(shifted, fwd_x_.initial_state(B), Direction::forward);

    std::vector<Tensor> bwd_in;
    bwd_in.reserve(frames.size());
    for (int t = 0; t < T; ++t)
      bwd_in.push_back(concat(h[static_cast<std::size_t>(t)].h, xfeat[static_cast<std::size_t>(t)]));
    auto g = bwd_.unroll(bwd_in, bwd_.initial_state(B), Direction::backward);

    PassResult pr;
    pr.recon_log_prob = Tensor::scalar(0.0);
    pr.kl = Tensor::scalar(0.0);
    Tensor z_prev = Tensor::zeros({B, L});
    for (int t = 0; t < T; ++t) {
      DiagGaussian q = enc_.forward(concat(z_prev, g[static_cast<std::size_t>(t)].h));
      Tensor z = sample_latent(q, noise, opts, t, B, L);
      DiagGaussian pz = prior_head_.forward(concat(z_prev, h[static_cast<std::size_t>(t)].h));
      GammaShape1 lik = dec_.forward(concat(z, h[static_cast<std::size_t>(t)].h));
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
      z_prev = z;
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
    RecurrentState h = fwd_x_.initial_state(1);
    Tensor xfeat_prev = Tensor::zeros({1, F});
    Tensor z_prev = Tensor::zeros({1, L});
    for (int t = 0; t < T; ++t) {
      h = fwd_x_.step(xfeat_prev, h);
      DiagGaussian pz = prior_head_.forward(concat(z_prev, h.h));
      Tensor z = sample_prior_latent(pz, noise, iv, t, 1, L);
      GammaShape1 lik = dec_.forward(concat(z, h.h));
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
      xfeat_prev = log_features_values(xhat, 1);
      z_prev = z;
    }
    return out;
  }

 private:
  LstmCell fwd_x_;
  GaussianHead prior_head_;
  GammaHead dec_;
  LstmCell bwd_;
  GaussianHead enc_;
};

std::unique_ptr<DvaeModel> make_srnn(const DvaeConfig& cfg, std::uint64_t seed) {
  return std::make_unique<SrnnModel>(cfg, seed);
}

}  // namespace dvae::internal
