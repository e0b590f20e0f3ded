#pragma once

#include <utility>
#include <vector>

#include "davegan/rng.hpp"
#include "davegan/tensor.hpp"

namespace davegan {

struct AugmentConfig {
  real_t translation_std_frac = 0.125;  // pixel-shift stddev as a fraction of image size
  real_t latent_strength = 0.5;         // < 1 keeps augmented sigmas positive
  real_t prior_jitter = 0.2;
};

// Per-sample integer displacements (u_x, u_y), stored reduced mod image size.
struct TranslationParams {
  std::vector<std::pair<int, int>> u;
};

// Draws round(N(0, (std_frac * image_size)^2)) for each component.
TranslationParams sample_translation(Rng& rng, int batch, int image_size, real_t std_frac);

// x'[i][j] = x[(i - u_y) mod H][(j - u_x) mod W] per sample: a pure pixel
// permutation, so the adjoint is the inverse roll and every periodic
// statistic of the image is untouched.
Tensor translate_periodic(const Tensor& x, const TranslationParams& u);

// One uniform [0, 1) draw per latent dimension. A single instance is shared
// by the posterior and prior transforms of a training step.
struct LatentAugParams {
  std::vector<real_t> u_mu, u_sigma;
};

LatentAugParams sample_latent_aug(Rng& rng, int z_dim);

// mu + strength * (2u - 1), elementwise over the latent axis
Tensor augment_mu(const Tensor& mu, const LatentAugParams& u, real_t strength);
// sigma * (1 + strength * (2u - 1)); requires 0 <= strength < 1
Tensor augment_sigma(const Tensor& sigma, const LatentAugParams& u, real_t strength);
// the same scaling applied in log-variance form:
// log_var + 2 log(1 + strength * (2u - 1))
Tensor augment_log_var(const Tensor& log_var, const LatentAugParams& u, real_t strength);

// Randomized prior for the divergence target: mu ~ N(0, jitter^2) and
// log sigma ~ N(0, jitter^2) per dimension. jitter = 0 degenerates to the
// unit normal.
struct PriorSample {
  std::vector<real_t> mu, log_var;  // each z_dim long
};

PriorSample sample_prior(Rng& rng, int z_dim, real_t jitter);

}  // namespace davegan
