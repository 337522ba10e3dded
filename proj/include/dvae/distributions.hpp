#pragma once

#include "dvae/random.hpp"
#include "dvae/tensor.hpp"

namespace dvae {

// Floor on variances and Gamma scales before any division or log. Applied as
// a clamp so that values comfortably above the floor are untouched exactly.
inline constexpr double kVarianceFloor = 1e-6;

// Diagonal Gaussian with [L] or [batch x L] parameter tensors.
struct DiagGaussian {
  Tensor mean;
  Tensor log_var;
};

// Zero-mean unit-variance Gaussian of fixed dimension.
struct StandardGaussianPrior {
  int dim = 0;
  // Constant-parameter DiagGaussian; batch 0 gives the unbatched [dim] form.
  DiagGaussian materialize(int batch = 0) const;
};

// Gamma with shape fixed at 1 and per-bin scale exp(log_scale); the scale is
// the modeled power spectral density.
struct GammaShape1 {
  Tensor log_scale;  // [F] or [batch x F]
};

// Floored variance / scale, as tensors on the same tape.
Tensor gaussian_variance(const DiagGaussian& d);
Tensor gamma1_scale(const GammaShape1& d);

// Reparameterized draw: mean + sqrt(var) * noise, differentiable in the
// parameters. `noise` must be externally drawn standard normal.
Tensor gaussian_sample(const DiagGaussian& d, const Tensor& noise);

// Sum over all elements of the elementwise Gaussian log-density.
Tensor gaussian_log_prob(const DiagGaussian& d, const Tensor& x);

// Closed-form KL(q || p) summed over all elements; nonnegative.
Tensor gaussian_kl(const DiagGaussian& q, const DiagGaussian& p);

// Sum over all elements of -ln(scale) - x/scale. DomainError if any x < 0.
Tensor gamma1_log_prob(const GammaShape1& d, const Tensor& x);

}  // namespace dvae
