#include "dvae/model.hpp"
#include "models/heads.hpp"

namespace dvae::internal {

// DSAE: one sequence-level variable v with standard-normal prior plus a
// latent chain p(z_t | z_{1:t-1}) from a forward recurrence over latents.
// Emission consumes (z_t, v). Inference: q(v | x_{1:T}) from a mean-pooled
// bidirectional recurrence, q(z_t | x_{1:T}) from a separate bidirectional
// recurrence; neither conditions on past latents.
class DsaeModel final : public DvaeModel {
 public:
  DsaeModel(const DvaeConfig& cfg, std::uint64_t seed) : DvaeModel(cfg) {
    Rng rng(seed);
    const int F = cfg.feature_dim, L = cfg.latent_dim, H = cfg.hidden_dim;
    const int V = cfg.dsae_v_dim;
    prior_rnn_ = LstmCell::create(L, H, rng);
    prior_head_ = GaussianHead::create(H, H, L, cfg.head_activation, rng);
    dec_ = GammaHead::create(L + V, H, F, cfg.head_activation, rng);
    v_fwd_ = LstmCell::create(F, H, rng);
    v_bwd_ = LstmCell::create(F, H, rng);
    v_head_ = GaussianHead::create(2 * H, H, V, cfg.head_activation, rng);
    z_fwd_ = LstmCell::create(F, H, rng);
    z_bwd_ = LstmCell::create(F, H, rng);
    enc_ = GaussianHead::create(2 * H, H, L, cfg.head_activation, rng);
    prior_rnn_.register_params("prior.rnn", params_);
    prior_head_.register_params("prior.head", params_);
    dec_.register_params("dec", params_);
    v_fwd_.register_params("enc_v.fwd", params_);
    v_bwd_.register_params("enc_v.bwd", params_);
    v_head_.register_params("enc_v.head", params_);
    z_fwd_.register_params("enc_z.fwd", params_);
    z_bwd_.register_params("enc_z.bwd", params_);
    enc_.register_params("enc_z.head", params_);
    v_prior_.dim = V;
  }

  PassResult run_pass(const std::vector<Tensor>& frames, NoiseSource& noise,
                      const PassOptions& opts) const override {
    check_frames(frames);
    const int T = static_cast<int>(frames.size());
    const int B = frames[0].dim(0);
    const int L = cfg_.latent_dim, V = cfg_.dsae_v_dim;
    if (opts.trace) opts.trace->steps.assign(static_cast<std::size_t>(T), {});

    std::vector<Tensor> xfeat;
    xfeat.reserve(frames.size());
    for (const auto& f : frames) xfeat.push_back(log_features(f));

    // Sequence variable first: its noise draw precedes every z draw.
    auto vf = v_fwd_.unroll(xfeat, v_fwd_.initial_state(B), Direction::forward);
    auto vb = v_bwd_.unroll(xfeat, v_bwd_.initial_state(B), Direction::backward);
    Tensor pooled = Tensor::zeros({B, 2 * cfg_.hidden_dim});
    for (int t = 0; t < T; ++t)
      pooled = add(pooled, concat(vf[static_cast<std::size_t>(t)].h,
                                  vb[static_cast<std::size_t>(t)].h));
    pooled = pooled * (1.0 / static_cast<double>(T));
    DiagGaussian qv = v_head_.forward(pooled);
    Tensor v_noise = Tensor::constant({B, V}, noise.standard_normal(static_cast<std::size_t>(B) * V));
    Tensor v;
    if (opts.intervention && opts.intervention->force_v) {
      const auto& fv = *opts.intervention->force_v;
      if (static_cast<int>(fv.size()) != B * V)
        throw ShapeError("intervention force_v size mismatch");
      v = Tensor::constant({B, V}, fv);
    } else if (opts.use_posterior_mean) {
      v = qv.mean;
    } else {
      v = gaussian_sample(qv, v_noise);
    }
    DiagGaussian pv = v_prior_.materialize(B);

    auto zf = z_fwd_.unroll(xfeat, z_fwd_.initial_state(B), Direction::forward);
    auto zb = z_bwd_.unroll(xfeat, z_bwd_.initial_state(B), Direction::backward);

    PassResult pr;
    pr.recon_log_prob = Tensor::scalar(0.0);
    pr.kl = gaussian_kl(qv, pv);
    if (opts.trace) {
      opts.trace->v_post_mean = qv.mean.values();
      opts.trace->v_post_log_var = qv.log_var.values();
      opts.trace->v = v.values();
    }
    RecurrentState m = prior_rnn_.initial_state(B);
    Tensor z_prev = Tensor::zeros({B, L});
    for (int t = 0; t < T; ++t) {
      DiagGaussian q = enc_.forward(concat(zf[static_cast<std::size_t>(t)].h,
                                           zb[static_cast<std::size_t>(t)].h));
      Tensor z = sample_latent(q, noise, opts, t, B, L);
      m = prior_rnn_.step(z_prev, m);
      DiagGaussian pz = prior_head_.forward(m.h);
      GammaShape1 lik = dec_.forward(concat(z, v));
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
    const int L = cfg_.latent_dim, F = cfg_.feature_dim, V = cfg_.dsae_v_dim;
    GenerateResult out;
    out.z = Matrix(T, L);
    out.sigma2 = Matrix(T, F);
    if (trace) trace->steps.assign(static_cast<std::size_t>(T), {});

    DiagGaussian pv = v_prior_.materialize(1);
    Tensor v_noise = Tensor::constant({1, V}, noise.standard_normal(static_cast<std::size_t>(V)));
    Tensor v = gaussian_sample(pv, v_noise);
    if (iv && iv->force_v) {
      if (static_cast<int>(iv->force_v->size()) != V)
        throw ShapeError("intervention force_v size mismatch");
      v = Tensor::constant({1, V}, *iv->force_v);
    }
    if (trace) trace->v = v.values();

    RecurrentState m = prior_rnn_.initial_state(1);
    Tensor z_prev = Tensor::zeros({1, L});
    for (int t = 0; t < T; ++t) {
      m = prior_rnn_.step(z_prev, m);
      DiagGaussian pz = prior_head_.forward(m.h);
      Tensor z = sample_prior_latent(pz, noise, iv, t, 1, L);
      GammaShape1 lik = dec_.forward(concat(z, v));
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
      z_prev = z;
    }
    return out;
  }

 private:
  LstmCell prior_rnn_;
  GaussianHead prior_head_;
  GammaHead dec_;
  LstmCell v_fwd_, v_bwd_;
  GaussianHead v_head_;
  LstmCell z_fwd_, z_bwd_;
  GaussianHead enc_;
  StandardGaussianPrior v_prior_;
};

std::unique_ptr<DvaeModel> make_dsae(const DvaeConfig& cfg, std::uint64_t seed) {
  return std::make_unique<DsaeModel>(cfg, seed);
}

}  // namespace dvae::internal
