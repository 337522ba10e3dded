#include "dvae/model.hpp"
#include "models/heads.hpp"

namespace dvae::internal {

// STORN: i.i.d. standard-normal prior on z_t, generation RNN consuming
// (x_{t-1}, z_t) so the likelihood covers x_{1:t-1} and z_{1:t}, causal
// encoder q(z_t | x_{1:t}) from a forward recurrence over the observations.
class StornModel final : public DvaeModel {
 public:
  StornModel(const DvaeConfig& cfg, std::uint64_t seed) : DvaeModel(cfg) {
    Rng rng(seed);
    const int F = cfg.feature_dim, L = cfg.latent_dim, H = cfg.hidden_dim;
    dec_rnn_ = LstmCell::create(F + L, H, rng);
    dec_ = GammaHead::create(H, H, F, cfg.head_activation, rng);
    enc_rnn_ = LstmCell::create(F, H, rng);
    enc_ = GaussianHead::create(H, H, L, cfg.head_activation, rng);
    dec_rnn_.register_params("dec.rnn", params_);
    dec_.register_params("dec.head", params_);
    enc_rnn_.register_params("enc.rnn", params_);
    enc_.register_params("enc.head", params_);
    prior_.dim = L;
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
    auto e = enc_rnn_.unroll(xfeat, enc_rnn_.initial_state(B), Direction::forward);

    PassResult pr;
    pr.recon_log_prob = Tensor::scalar(0.0);
    pr.kl = Tensor::scalar(0.0);
    RecurrentState d = dec_rnn_.initial_state(B);
    Tensor xfeat_prev = Tensor::zeros({B, F});
    for (int t = 0; t < T; ++t) {
      DiagGaussian q = enc_.forward(e[static_cast<std::size_t>(t)].h);
      Tensor z = sample_latent(q, noise, opts, t, B, L);
      DiagGaussian pz = prior_.materialize(B);
      d = dec_rnn_.step(concat(xfeat_prev, z), d);
      GammaShape1 lik = dec_.forward(d.h);
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
      xfeat_prev = xfeat[static_cast<std::size_t>(t)];
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
    RecurrentState d = dec_rnn_.initial_state(1);
    Tensor xfeat_prev = Tensor::zeros({1, F});
    for (int t = 0; t < T; ++t) {
      DiagGaussian pz = prior_.materialize(1);
      Tensor z = sample_prior_latent(pz, noise, iv, t, 1, L);
      d = dec_rnn_.step(concat(xfeat_prev, z), d);
      GammaShape1 lik = dec_.forward(d.h);
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
    }
    return out;
  }

 private:
  LstmCell dec_rnn_;
  GammaHead dec_;
  LstmCell enc_rnn_;
  GaussianHead enc_;
  StandardGaussianPrior prior_;
};

std::unique_ptr<DvaeModel> make_storn(const DvaeConfig& cfg, std::uint64_t seed) {
  return std::make_unique<StornModel>(cfg, seed);
}

}  // namespace dvae::internal
