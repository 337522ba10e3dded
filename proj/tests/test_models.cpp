#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "dvae/model.hpp"
#include "model_probes.hpp"

using namespace dvae;

namespace {

DvaeConfig tiny_config(ModelKind kind) {
  DvaeConfig cfg;
  cfg.kind = kind;
  cfg.feature_dim = 3;
  cfg.latent_dim = 2;
  cfg.hidden_dim = 4;
  cfg.max_seq_len = 64;
  cfg.dsae_v_dim = 2;
  return cfg;
}

std::vector<Tensor> random_frames(int T, int F, std::uint64_t seed, int batch = 1) {
  Rng rng(seed);
  std::vector<Tensor> frames;
  for (int t = 0; t < T; ++t) {
    std::vector<double> v(static_cast<std::size_t>(batch) * F);
    for (auto& x : v) x = std::exp(rng.uniform(-1.0, 1.0));
    frames.push_back(Tensor::constant({batch, F}, v));
  }
  return frames;
}

// Replays the recorded noise so the finite-difference evaluations see the
// exact draws of the analytic pass.
double elbo_with_replay(const DvaeModel& model, const std::vector<Tensor>& frames,
                        const std::vector<double>& noise_record) {
  NoGradGuard ng;
  NoiseSource replay(noise_record);
  return model.elbo(frames, replay).total.item();
}

}  // namespace

TEST_CASE("structural probes: full matrix per model") {
  const int T = 5, target = 2;
  for (ModelKind kind : all_model_kinds()) {
    CAPTURE(model_kind_to_string(kind));
    auto model = DvaeModel::create(tiny_config(kind), 1234 + static_cast<int>(kind));
    auto gen_failures = probes::run_generate_probes(*model, T, target, 99);
    for (const auto& f : gen_failures) FAIL_CHECK(f);
    auto inf_failures = probes::run_infer_probes(*model, T, target, 101);
    for (const auto& f : inf_failures) FAIL_CHECK(f);
  }
}

TEST_CASE("elbo gradients match finite differences on the tiny config") {
  const int T = 3;
  for (ModelKind kind : all_model_kinds()) {
    CAPTURE(model_kind_to_string(kind));
    auto model = DvaeModel::create(tiny_config(kind), 31 + static_cast<int>(kind));
    auto frames = random_frames(T, 3, 7);

    std::vector<double> record;
    model->params().zero_grads();
    {
      NoiseSource noise(55);
      noise.record_into(&record);
      ElboResult el = model->elbo(frames, noise);
      backward(el.total);
    }

    int checked = 0, bad = 0;
    const double h = 1e-5;
    for (auto& [name, t] : model->params().entries()) {
      auto grad = t.grad();
      auto& data = t.mutable_data();
      for (std::size_t i = 0; i < data.size(); i += 3) {
        double keep = data[i];
        data[i] = keep + h;
        double fp = elbo_with_replay(*model, frames, record);
        data[i] = keep - h;
        double fm = elbo_with_replay(*model, frames, record);
        data[i] = keep;
        double numeric = (fp - fm) / (2 * h);
        double analytic = grad.empty() ? 0.0 : grad[i];
        double denom = std::max(std::abs(numeric), std::abs(analytic));
        ++checked;
        if (denom < 1e-7) continue;
        if (std::abs(numeric - analytic) / denom > 1e-3) {
          ++bad;
          MESSAGE("gradient mismatch in ", name, "[", i, "]: numeric=", numeric,
                  " analytic=", analytic);
        }
      }
    }
    CHECK(checked >= 20);
    CHECK(bad == 0);
  }
}

TEST_CASE("kl term of the elbo is nonnegative for every model") {
  for (ModelKind kind : all_model_kinds()) {
    auto model = DvaeModel::create(tiny_config(kind), 77 + static_cast<int>(kind));
    auto frames = random_frames(6, 3, 13, 2);
    NoiseSource noise(5);
    ElboResult el = model->elbo(frames, noise);
    CHECK(el.kl.item() >= -1e-12);
    CHECK(std::isfinite(el.total.item()));
  }
}

TEST_CASE("elbo at T=1 reduces to a single step") {
  for (ModelKind kind : all_model_kinds()) {
    CAPTURE(model_kind_to_string(kind));
    auto model = DvaeModel::create(tiny_config(kind), 19 + static_cast<int>(kind));
    auto frames = random_frames(1, 3, 3);
    NoiseSource noise(17);
    PassResult pr = model->run_pass(frames, noise, {});
    Tensor step_recon = gamma1_log_prob(pr.likelihoods[0], frames[0]);
    Tensor step_kl = gaussian_kl(pr.posteriors[0], pr.priors[0]);
    CHECK(pr.recon_log_prob.item() == doctest::Approx(step_recon.item()).epsilon(1e-12));
    if (kind == ModelKind::dsae) {
      // the sequence variable contributes its own divergence term
      CHECK(pr.kl.item() >= step_kl.item() - 1e-12);
    } else {
      CHECK(pr.kl.item() == doctest::Approx(step_kl.item()).epsilon(1e-12));
    }
  }
}

TEST_CASE("vae with encoder forced to the prior has zero kl") {
  auto model = DvaeModel::create(tiny_config(ModelKind::vae), 3);
  for (auto& [name, t] : model->params().entries())
    if (name.rfind("enc", 0) == 0)
      std::fill(t.mutable_data().begin(), t.mutable_data().end(), 0.0);
  auto frames = random_frames(4, 3, 21);
  NoiseSource noise(9);
  ElboResult el = model->elbo(frames, noise);
  CHECK(el.kl.item() == 0.0);
}

TEST_CASE("vae generates i.i.d. latents: lag-1 autocorrelation near zero") {
  DvaeConfig cfg = tiny_config(ModelKind::vae);
  cfg.max_seq_len = 20000;
  auto model = DvaeModel::create(cfg, 5);
  NoiseSource noise(123);
  GenerateResult gen = model->generate(10000, noise);
  for (int l = 0; l < cfg.latent_dim; ++l) {
    double mean = 0.0;
    for (int t = 0; t < gen.z.rows; ++t) mean += gen.z.at(t, l);
    mean /= gen.z.rows;
    double num = 0.0, den = 0.0;
    for (int t = 0; t < gen.z.rows; ++t) {
      double c = gen.z.at(t, l) - mean;
      den += c * c;
      if (t > 0) num += c * (gen.z.at(t - 1, l) - mean);
    }
    CHECK(std::abs(num / den) < 0.05);
  }
}

TEST_CASE("generate produces finite positive variance spectrograms") {
  for (ModelKind kind : all_model_kinds()) {
    auto model = DvaeModel::create(tiny_config(kind), 41 + static_cast<int>(kind));
    NoiseSource noise(7);
    GenerateResult gen = model->generate(12, noise);
    REQUIRE(gen.sigma2.rows == 12);
    REQUIRE(gen.sigma2.cols == 3);
    for (double v : gen.sigma2.data) {
      CHECK(std::isfinite(v));
      CHECK(v > 0.0);
    }
    for (double v : gen.z.data) CHECK(std::isfinite(v));
  }
}

TEST_CASE("resynthesize: shape, positivity, mean-mode determinism") {
  for (ModelKind kind : all_model_kinds()) {
    auto model = DvaeModel::create(tiny_config(kind), 61 + static_cast<int>(kind));
    Rng rng(15);
    Matrix x(7, 3);
    for (double& v : x.data) v = std::exp(rng.uniform(-1.0, 1.0));

    NoiseSource n1(1), n2(2);  // different streams: mean mode must not care
    Matrix a = model->resynthesize(x, n1, true);
    Matrix b = model->resynthesize(x, n2, true);
    REQUIRE(a.rows == 7);
    REQUIRE(a.cols == 3);
    for (double v : a.data) CHECK(v > 0.0);
    CHECK(a.data == b.data);

    NoiseSource n3(3), n4(3);
    Matrix c = model->resynthesize(x, n3, false);
    Matrix d = model->resynthesize(x, n4, false);
    CHECK(c.data == d.data);  // same stream, bit-equal
  }
}

TEST_CASE("severed temporal conditioning reduces to the vae elbo") {
  DvaeConfig vae_cfg = tiny_config(ModelKind::vae);
  auto vae = DvaeModel::create(vae_cfg, 101);
  auto frames = random_frames(4, 3, 33);

  for (ModelKind kind : {ModelKind::vrnn, ModelKind::srnn, ModelKind::dkf}) {
    CAPTURE(model_kind_to_string(kind));
    DvaeConfig cfg = tiny_config(kind);
    cfg.sever_temporal = true;
    auto severed = DvaeModel::create(cfg, 999);
    severed->copy_parameters_from(*vae);

    NoiseSource n1(77), n2(77);
    double got = severed->elbo(frames, n1).total.item();
    double want = vae->elbo(frames, n2).total.item();
    CHECK(std::abs(got - want) < 1e-10);
    CHECK(severed->kind() == kind);
  }
  CHECK_THROWS_AS(
      [] {
        DvaeConfig cfg = tiny_config(ModelKind::dsae);
        cfg.sever_temporal = true;
        (void)DvaeModel::create(cfg, 1);
      }(),
      ConfigError);
}

TEST_CASE("vae elbo estimator matches numerical integration of the bound") {
  // Hand-set networks small enough to integrate: F=2, L=1, one hidden unit
  // pair. The oracle evaluates E_q[ln p(x|z)] - KL by trapezoid quadrature.
  DvaeConfig cfg;
  cfg.kind = ModelKind::vae;
  cfg.feature_dim = 2;
  cfg.latent_dim = 1;
  cfg.hidden_dim = 2;
  cfg.max_seq_len = 4;
  auto model = DvaeModel::create(cfg, 1);

  auto set = [&](const std::string& name, std::vector<double> v) {
    Tensor* t = model->params().find(name);
    REQUIRE(t != nullptr);
    REQUIRE(t->numel() == static_cast<std::int64_t>(v.size()));
    t->mutable_data() = v;
  };
  set("enc.hidden.w", {0.5, -0.3, 0.2, 0.4});
  set("enc.hidden.b", {0.1, -0.2});
  set("enc.mean.w", {0.7, -0.5});
  set("enc.mean.b", {0.05});
  set("enc.log_var.w", {0.3, 0.2});
  set("enc.log_var.b", {-0.5});
  set("dec.hidden.w", {0.6, -0.4});
  set("dec.hidden.b", {0.0, 0.1});
  set("dec.log_scale.w", {0.5, -0.2, 0.3, 0.1});
  set("dec.log_scale.b", {0.2, -0.1});

  const std::vector<std::vector<double>> x{{0.8, 1.3}, {0.4, 2.0}};

  // scalar-loop oracle
  auto enc_oracle = [&](const std::vector<double>& xf, double& mu, double& lv) {
    double xt0 = std::log(xf[0] + 1e-4), xt1 = std::log(xf[1] + 1e-4);
    double h0 = std::tanh(0.5 * xt0 - 0.3 * xt1 + 0.1);
    double h1 = std::tanh(0.2 * xt0 + 0.4 * xt1 - 0.2);
    mu = 0.7 * h0 - 0.5 * h1 + 0.05;
    lv = 0.3 * h0 + 0.2 * h1 - 0.5;
  };
  auto loglik_oracle = [&](const std::vector<double>& xf, double z) {
    double h0 = std::tanh(0.6 * z);
    double h1 = std::tanh(-0.4 * z + 0.1);
    double ls0 = 0.5 * h0 - 0.2 * h1 + 0.2;
    double ls1 = 0.3 * h0 + 0.1 * h1 - 0.1;
    double th0 = std::max(std::exp(ls0), 1e-6);
    double th1 = std::max(std::exp(ls1), 1e-6);
    return -std::log(th0) - xf[0] / th0 - std::log(th1) - xf[1] / th1;
  };

  double oracle = 0.0;
  for (const auto& xf : x) {
    double mu, lv;
    enc_oracle(xf, mu, lv);
    double var = std::max(std::exp(lv), 1e-6);
    double sd = std::sqrt(var);
    const int N = 20001;
    double lo = mu - 10 * sd, hi = mu + 10 * sd, dz = (hi - lo) / (N - 1);
    double integral = 0.0;
    for (int i = 0; i < N; ++i) {
      double z = lo + i * dz;
      double w = (i == 0 || i == N - 1) ? 0.5 : 1.0;
      double pdf = std::exp(-0.5 * (z - mu) * (z - mu) / var) / (sd * std::sqrt(2 * 3.14159265358979323846));
      integral += w * pdf * loglik_oracle(xf, z) * dz;
    }
    double kl = 0.5 * (-lv + var + mu * mu - 1.0);
    oracle += integral - kl;
  }

  // single-sample estimator averaged over a large batch of noise draws
  const int B = 100000;
  std::vector<Tensor> frames;
  for (const auto& xf : x) {
    std::vector<double> buf(static_cast<std::size_t>(B) * 2);
    for (int b = 0; b < B; ++b) {
      buf[static_cast<std::size_t>(b) * 2] = xf[0];
      buf[static_cast<std::size_t>(b) * 2 + 1] = xf[1];
    }
    frames.push_back(Tensor::constant({B, 2}, buf));
  }
  NoGradGuard ng;
  NoiseSource noise(2024);
  double estimate = model->elbo(frames, noise).total.item() / B;

  CHECK(std::abs(estimate - oracle) / std::abs(oracle) < 0.01);
}

TEST_CASE("pass validates frame shapes") {
  auto model = DvaeModel::create(tiny_config(ModelKind::vrnn), 1);
  NoiseSource noise(1);
  CHECK_THROWS_AS(model->run_pass({}, noise, {}), EmptySequenceError);
  std::vector<Tensor> bad{Tensor::zeros({1, 5})};
  CHECK_THROWS_AS(model->run_pass(bad, noise, {}), ShapeError);
  DvaeConfig cfg = tiny_config(ModelKind::vae);
  cfg.max_seq_len = 2;
  auto small = DvaeModel::create(cfg, 1);
  auto frames = random_frames(3, 3, 5);
  CHECK_THROWS_AS(small->run_pass(frames, noise, {}), ShapeError);
}

TEST_CASE("kl annealing severs nothing: breakdown adds up") {
  for (ModelKind kind : all_model_kinds()) {
    auto model = DvaeModel::create(tiny_config(kind), 404 + static_cast<int>(kind));
    auto frames = random_frames(3, 3, 11);
    NoiseSource noise(31);
    ElboResult el = model->elbo(frames, noise);
    CHECK(el.total.item() ==
          doctest::Approx(el.recon.item() - el.kl.item()).epsilon(1e-12));
  }
}
