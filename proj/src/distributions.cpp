#include "dvae/distributions.hpp"

#include <cmath>

namespace dvae {

namespace {
constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shapes " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()) + " differ");
}
}  // namespace

DiagGaussian StandardGaussianPrior::materialize(int batch) const {
  Shape s = batch > 0 ? Shape{batch, dim} : Shape{dim};
  return DiagGaussian{Tensor::zeros(s), Tensor::zeros(s)};
}

Tensor gaussian_variance(const DiagGaussian& d) {
  return clamp_min(exp(d.log_var), kVarianceFloor);
}

Tensor gamma1_scale(const GammaShape1& d) {
  return clamp_min(exp(d.log_scale), kVarianceFloor);
}

Tensor gaussian_sample(const DiagGaussian& d, const Tensor& noise) {
  check_same_shape(d.mean, noise, "gaussian_sample");
  check_same_shape(d.mean, d.log_var, "gaussian_sample");
  return add(d.mean, mul(sqrt(gaussian_variance(d)), noise));
}

Tensor gaussian_log_prob(const DiagGaussian& d, const Tensor& x) {
  check_same_shape(d.mean, x, "gaussian_log_prob");
  check_same_shape(d.mean, d.log_var, "gaussian_log_prob");
  Tensor var = gaussian_variance(d);
  Tensor diff = sub(x, d.mean);
  Tensor quad = div(mul(diff, diff), var);
  Tensor per_elem = add(ln(var), quad) + kLogTwoPi;
  return sum(per_elem) * -0.5;
}

Tensor gaussian_kl(const DiagGaussian& q, const DiagGaussian& p) {
  check_same_shape(q.mean, p.mean, "gaussian_kl");
  check_same_shape(q.log_var, p.log_var, "gaussian_kl");
  check_same_shape(q.mean, q.log_var, "gaussian_kl");
  Tensor var_q = gaussian_variance(q);
  Tensor var_p = gaussian_variance(p);
  Tensor dmean = sub(q.mean, p.mean);
  Tensor per_elem = sub(ln(div(var_p, var_q)),
                        Tensor::full(var_q.shape(), 1.0)) +
                    div(add(var_q, mul(dmean, dmean)), var_p);
  return sum(per_elem) * 0.5;
}

Tensor gamma1_log_prob(const GammaShape1& d, const Tensor& x) {
  check_same_shape(d.log_scale, x, "gamma1_log_prob");
  for (double v : x.data())
    if (v < 0.0) throw DomainError("gamma1_log_prob: negative observation");
  Tensor scale = gamma1_scale(d);
  Tensor per_elem = add(ln(scale), div(x, scale));
  return sum(per_elem) * -1.0;
}

}  // namespace dvae
