#include "davegan/losses.hpp"

#include <stdexcept>
#include <string>

namespace davegan {

namespace {

constexpr real_t kProbFloor = 1e-7;
constexpr real_t kProbCeil = real_t{1} - 1e-7;

void check_latent(const char* op, const Tensor& mu, const Tensor& log_var) {
  if (mu.shape().rank() != 2)
    throw std::invalid_argument(std::string(op) + ": latent statistics must be [B, z], got " +
                                mu.shape().str());
  if (log_var.shape() != mu.shape())
    throw std::invalid_argument(std::string(op) + ": mu " + mu.shape().str() +
                                " and log_var " + log_var.shape().str() + " differ");
}

void check_scores(const char* who, const Tensor& s) {
  if (s.shape().rank() != 1)
    throw std::invalid_argument(std::string(who) + ": scores must be [B], got " +
                                s.shape().str());
  for (real_t v : s.data())
    if (v <= 0 || v >= 1)
      throw std::invalid_argument(std::string(who) + ": score " + std::to_string(v) +
                                  " outside the open interval (0, 1)");
}

Tensor clamp_prob(const Tensor& s) { return clamp(s, kProbFloor, kProbCeil); }

// mean over the batch of the per-sample latent sums
Tensor latent_mean(const Tensor& per_element) { return reduce_mean(reduce_sum(per_element, {1})); }

}  // namespace

Tensor kl_standard(const Tensor& mu, const Tensor& log_var) {
  check_latent("kl_standard", mu, log_var);
  Tensor t = real_t{1} + log_var - exp(log_var) - square(mu);
  return real_t{-0.5} * latent_mean(t);
}

Tensor kl_general(const Tensor& mu_post, const Tensor& log_var_post, const Tensor& mu_prior,
                  const Tensor& log_var_prior) {
  check_latent("kl_general", mu_post, log_var_post);
  // log(sigma_p / sigma_q) + (sigma_q^2 + (mu_p - mu_q)^2) / (2 sigma_p^2) - 1/2
  Tensor half_log_ratio = real_t{0.5} * (log_var_prior - log_var_post);
  Tensor ratio = (exp(log_var_post) + square(mu_prior - mu_post)) /
                 (real_t{2} * exp(log_var_prior));
  return latent_mean(half_log_ratio + ratio - real_t{0.5});
}

Tensor reconstruction_loss(const Tensor& x_hat, const Tensor& x) {
  if (x_hat.shape() != x.shape())
    throw std::invalid_argument("reconstruction_loss: prediction " + x_hat.shape().str() +
                                " and target " + x.shape().str() + " differ");
  for (real_t v : x.data())
    if (v < 0 || v > 1)
      throw std::invalid_argument("reconstruction_loss: target value " + std::to_string(v) +
                                  " outside [0, 1]");
  Tensor p = clamp_prob(x_hat);
  Tensor nll = neg(x.detach() * log(p) + (real_t{1} - x.detach()) * log(real_t{1} - p));
  // per-sample pixel sum, then batch mean; rank <= 1 is a single sample
  Tensor total = reduce_sum(nll);
  if (x.shape().rank() >= 2) total = total / static_cast<real_t>(x.shape()[0]);
  return total;
}

Tensor encoder_loss(const Tensor& kld, const Tensor& rec, real_t beta) {
  if (kld.numel() != 1 || rec.numel() != 1)
    throw std::invalid_argument("encoder_loss: kld and rec must be scalars");
  return beta * kld + rec;
}

Tensor discriminator_loss(const Tensor& d_real, const Tensor& d_vae, const Tensor& d_noise) {
  check_scores("discriminator_loss: d_real", d_real);
  check_scores("discriminator_loss: d_vae", d_vae);
  check_scores("discriminator_loss: d_noise", d_noise);
  Tensor real_term = neg(reduce_mean(log(clamp_prob(d_real))));
  Tensor vae_term = neg(reduce_mean(log(real_t{1} - clamp_prob(d_vae))));
  Tensor noise_term = neg(reduce_mean(log(real_t{1} - clamp_prob(d_noise))));
  return real_term + vae_term + noise_term;
}

Tensor generator_loss(const Tensor& d_vae, const Tensor& d_noise, const Tensor& rec,
                      const GenWeights& w) {
  check_scores("generator_loss: d_vae", d_vae);
  check_scores("generator_loss: d_noise", d_noise);
  if (rec.numel() != 1) throw std::invalid_argument("generator_loss: rec must be a scalar");
  Tensor vae_term = neg(reduce_mean(log(clamp_prob(d_vae))));
  Tensor noise_term = neg(reduce_mean(log(clamp_prob(d_noise))));
  return w.lambda_vae * vae_term + w.lambda_noise * noise_term + w.lambda_rec * rec;
}

Tensor gan_generator_loss_ref(const Tensor& d_fake) {
  check_scores("gan_generator_loss_ref", d_fake);
  return reduce_mean(log(real_t{1} - clamp_prob(d_fake)));
}

Tensor gan_discriminator_loss_ref(const Tensor& d_real, const Tensor& d_fake) {
  check_scores("gan_discriminator_loss_ref: d_real", d_real);
  check_scores("gan_discriminator_loss_ref: d_fake", d_fake);
  return neg(reduce_mean(log(clamp_prob(d_real)))) +
         neg(reduce_mean(log(real_t{1} - clamp_prob(d_fake))));
}

}  // namespace davegan
