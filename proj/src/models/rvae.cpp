#include "dvae/model.hpp"
#include "models/heads.hpp"

namespace dvae::internal {

// RVAE: i.i.d. standard-normal prior, likelihood p(x_t | z_{1:t}) from a
// forward recurrence over latents, and the non-causal posterior-compliant
// encoder q(z_t | z_{1:t-1}, x_{t:T}) built from a forward recurrence over
// sampled latents and a backward recurrence over observations.
// `rvae_hidden` shrinks the recurrent width for the lighter variant.
class RvaeModel final : public DvaeModel {
 public:
  RvaeModel(const DvaeConfig& cfg, std::uint64_t seed) : DvaeModel(cfg) {
    Rng rng(seed);
    const int F = cfg.feature_dim, L = cfg.latent_dim;
    const int H = cfg.rvae_hidden.value_or(cfg.hidden_dim);
    dec_rnn_ = LstmCell::create(L, H, rng);
    dec_ = GammaHead::create(H, H, F, cfg.head_activation, rng);
    enc_bwd_x_ = LstmCell::create(F, H, rng);
    enc_fwd_z_ = LstmCell::create(L, H, rng);
    enc_ = GaussianHead::create(2 * H, H, L, cfg.head_activation, rng);
    dec_rnn_.register_params("dec.rnn", params_);
    dec_.register_params("dec.head", params_);
    enc_bwd_x_.register_params("enc.bwd_x", params_);
    enc_fwd_z_.register_params("enc.fwd_z", params_);
    enc_.register_params("enc.head", params_);
    prior_.dim = L;
  }

  PassResult run_pass(const std::vector<Tensor>& frames, NoiseSource& noise,
                      const PassOptions& opts) const override {
    check_frames(frames);
    const int T = static_cast<int>(frames.size());
    const int B = frames[0].dim(0);
    const int L = cfg_.latent_dim;
    if (opts.trace) opts.trace->steps.assign(static_cast<std::size_t>(T), {});

    std::vector<Tensor> xfeat;
    xfeat.reserve(frames.size());
    for (const auto& f : frames) xfeat.push_back(log_features(f));
    auto g = enc_bwd_x_.unroll(xfeat, enc_bwd_x_.initial_state(B), Direction::backward);

    PassResult pr;
    pr.recon_log_prob = Tensor::scalar(0.0);
    pr.kl = Tensor::scalar(0.0);
    RecurrentState zs = enc_fwd_z_.initial_state(B);  // covers z_{1:t-1}
    RecurrentState d = dec_rnn_.initial_state(B);
    for (int t = 0; t < T; ++t) {
      DiagGaussian q = enc_.forward(concat(zs.h, g[static_cast<std::size_t>(t)].h));
      Tensor z = sample_latent(q, noise, opts, t, B, L);
      DiagGaussian pz = prior_.materialize(B);
      d = dec_rnn_.step(z, d);
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
      zs = enc_fwd_z_.step(z, zs);
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
    for (int t = 0; t < T; ++t) {
      DiagGaussian pz = prior_.materialize(1);
      Tensor z = sample_prior_latent(pz, noise, iv, t, 1, L);
      d = dec_rnn_.step(z, d);
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
    }
    return out;
  }

 private:
  LstmCell dec_rnn_;
  GammaHead dec_;
  LstmCell enc_bwd_x_;
  LstmCell enc_fwd_z_;
  GaussianHead enc_;
  StandardGaussianPrior prior_;
};

std::unique_ptr<DvaeModel> make_rvae(const DvaeConfig& cfg, std::uint64_t seed) {
  return std::make_unique<RvaeModel>(cfg, seed);
}

}  // namespace dvae::internal
