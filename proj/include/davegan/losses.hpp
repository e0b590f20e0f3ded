#pragma once

#include "davegan/tensor.hpp"

namespace davegan {

// Every loss returns a rank-0 scalar. Per-sample terms sum over their
// non-batch axes (latent dimensions, pixels), then everything averages over
// the batch, keeping the weights between terms independent of batch size.

// -1/2 * (1 + log_var - exp(log_var) - mu^2), i.e. divergence from the unit
// normal. mu, log_var: [B, z].
Tensor kl_standard(const Tensor& mu, const Tensor& log_var);

// Divergence between two diagonal normals parameterized by log-variance;
// reduces to kl_standard when the prior is (0, 1). Prior arguments may be
// [B, z] or a broadcastable [z].
Tensor kl_general(const Tensor& mu_post, const Tensor& log_var_post, const Tensor& mu_prior,
                  const Tensor& log_var_prior);

// Bernoulli negative log-likelihood of x under the predicted intensities
// x_hat: the cross-entropy is summed over each sample's pixels (axis 0 is
// the batch for rank >= 2) and averaged over the batch, so the value scales
// with image area exactly like the per-image log-likelihood it stands for.
// That scale is what balances this term against the per-dimension divergence
// sums and the order-one adversarial terms; averaging over pixels instead
// starves the decoder of reconstruction gradient. Predictions are clamped
// to [1e-7, 1 - 1e-7] before the logs; targets must already lie in [0, 1].
Tensor reconstruction_loss(const Tensor& x_hat, const Tensor& x);

// beta * kld + rec
Tensor encoder_loss(const Tensor& kld, const Tensor& rec, real_t beta);

// Three-score form with both fake routes: -log D(x) - log(1 - D(G(z_vae)))
// - log(1 - D(G(z_noise))), each term batch-averaged. Scores must be
// strictly inside (0, 1); they are clamped to [1e-7, 1 - 1e-7] so a
// saturated discriminator yields a bounded loss and gradient.
Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_vae, const Tensor& d_noise);

struct GenWeights {
  real_t lambda_vae = 1;
  real_t lambda_noise = 1;
  real_t lambda_rec = 1e-4;
};

// -lambda_vae * log D(G(z_vae)) - lambda_noise * log D(G(z_noise))
// + lambda_rec * rec, scores batch-averaged (non-saturating direction).
Tensor generator_loss(const Tensor& d_vae, const Tensor& d_noise, const Tensor& rec,
                      const GenWeights& w);

// Plain two-player forms, kept as reference points; the trainer never calls
// them.
Tensor gan_generator_loss_ref(const Tensor& d_fake);                         // log(1 - D(G(z)))
Tensor gan_discriminator_loss_ref(const Tensor& d_real, const Tensor& d_fake);

}  // namespace davegan
