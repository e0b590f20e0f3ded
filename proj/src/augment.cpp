#include "davegan/augment.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace davegan {

namespace {

int wrap(long v, int n) {
  const long m = v % n;
  return static_cast<int>(m < 0 ? m + n : m);
}

std::vector<real_t> latent_shift(const std::vector<real_t>& u, real_t strength) {
  std::vector<real_t> c(u.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    c[i] = strength * (real_t{2} * u[i] - real_t{1});
  return c;
}

void check_strength(const char* op, real_t strength) {
  if (strength < 0 || strength >= 1)
    throw std::invalid_argument(std::string(op) + ": strength must lie in [0, 1), got " +
                                std::to_string(strength));
}

void check_latent_arg(const char* op, const Tensor& t, const std::vector<real_t>& u) {
  if (t.shape().rank() != 2)
    throw std::invalid_argument(std::string(op) + ": expected [B, z], got " + t.shape().str());
  if (static_cast<std::size_t>(t.shape()[1]) != u.size())
    throw std::invalid_argument(std::string(op) + ": draw holds " + std::to_string(u.size()) +
                                " dims, tensor has " + std::to_string(t.shape()[1]));
}

}  // namespace

TranslationParams sample_translation(Rng& rng, int batch, int image_size, real_t std_frac) {
  if (batch < 1 || image_size < 1)
    throw std::invalid_argument("sample_translation: batch and image_size must be positive");
  if (std_frac < 0) throw std::invalid_argument("sample_translation: std_frac must be >= 0");
  const double stddev = static_cast<double>(std_frac) * image_size;
  TranslationParams p;
  p.u.reserve(static_cast<std::size_t>(batch));
  for (int b = 0; b < batch; ++b) {
    const long ux = std::lround(rng.normal(0.0, stddev));
    const long uy = std::lround(rng.normal(0.0, stddev));
    p.u.emplace_back(wrap(ux, image_size), wrap(uy, image_size));
  }
  return p;
}

Tensor translate_periodic(const Tensor& x, const TranslationParams& u) {
  if (x.shape().rank() != 4)
    throw std::invalid_argument("translate_periodic: expected [B, C, H, W], got " +
                                x.shape().str());
  const int B = x.shape()[0], C = x.shape()[1], H = x.shape()[2], W = x.shape()[3];
  if (u.u.size() != static_cast<std::size_t>(B))
    throw std::invalid_argument("translate_periodic: " + std::to_string(u.u.size()) +
                                " displacements for batch " + std::to_string(B));

  std::vector<std::pair<int, int>> shifts(u.u.size());
  for (std::size_t b = 0; b < shifts.size(); ++b)
    shifts[b] = {wrap(u.u[b].first, W), wrap(u.u[b].second, H)};

  const real_t* px = x.data().data();
  std::vector<real_t> out(x.numel());
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  for (int b = 0; b < B; ++b) {
    const auto [ux, uy] = shifts[static_cast<std::size_t>(b)];
    for (int c = 0; c < C; ++c) {
      const std::size_t base = (static_cast<std::size_t>(b) * C + c) * hw;
      for (int i = 0; i < H; ++i) {
        const int si = i >= uy ? i - uy : i - uy + H;
        const real_t* src = px + base + static_cast<std::size_t>(si) * W;
        real_t* dst = out.data() + base + static_cast<std::size_t>(i) * W;
        // dst[ux ..] <- src[0 ..], dst[0 .. ux) <- src[W - ux ..]
        for (int j = 0; j < W - ux; ++j) dst[ux + j] = src[j];
        for (int j = 0; j < ux; ++j) dst[j] = src[W - ux + j];
      }
    }
  }

  if (!x.attached()) return Tensor(x.shape(), std::move(out));
  Tape* tape = x.tape();
  const int xn = x.node();
  const std::size_t n = x.numel();
  auto back = [=, shifts = std::move(shifts)](Tape& t, const std::vector<real_t>& g) {
    if (real_t* gx = t.adjoint_ptr(xn, n)) {
      for (int b = 0; b < B; ++b) {
        const auto [ux, uy] = shifts[static_cast<std::size_t>(b)];
        for (int c = 0; c < C; ++c) {
          const std::size_t base = (static_cast<std::size_t>(b) * C + c) * hw;
          for (int i = 0; i < H; ++i) {
            const int si = i >= uy ? i - uy : i - uy + H;
            real_t* dst = gx + base + static_cast<std::size_t>(si) * W;
            const real_t* src = g.data() + base + static_cast<std::size_t>(i) * W;
            for (int j = 0; j < W - ux; ++j) dst[j] += src[ux + j];
            for (int j = 0; j < ux; ++j) dst[W - ux + j] += src[j];
          }
        }
      }
    }
  };
  return tape->emit(x.shape(), std::move(out), std::move(back));
}

LatentAugParams sample_latent_aug(Rng& rng, int z_dim) {
  if (z_dim < 1) throw std::invalid_argument("sample_latent_aug: z_dim must be positive");
  LatentAugParams p;
  p.u_mu.resize(static_cast<std::size_t>(z_dim));
  p.u_sigma.resize(static_cast<std::size_t>(z_dim));
  for (auto& v : p.u_mu) v = static_cast<real_t>(rng.uniform());
  for (auto& v : p.u_sigma) v = static_cast<real_t>(rng.uniform());
  return p;
}

Tensor augment_mu(const Tensor& mu, const LatentAugParams& u, real_t strength) {
  check_strength("augment_mu", strength);
  check_latent_arg("augment_mu", mu, u.u_mu);
  const int z = mu.shape()[1];
  return mu + Tensor(Shape{z}, latent_shift(u.u_mu, strength));
}

Tensor augment_sigma(const Tensor& sigma, const LatentAugParams& u, real_t strength) {
  check_strength("augment_sigma", strength);
  check_latent_arg("augment_sigma", sigma, u.u_sigma);
  const int z = sigma.shape()[1];
  std::vector<real_t> f = latent_shift(u.u_sigma, strength);
  for (auto& v : f) v += 1;
  return sigma * Tensor(Shape{z}, std::move(f));
}

Tensor augment_log_var(const Tensor& log_var, const LatentAugParams& u, real_t strength) {
  check_strength("augment_log_var", strength);
  check_latent_arg("augment_log_var", log_var, u.u_sigma);
  const int z = log_var.shape()[1];
  std::vector<real_t> f = latent_shift(u.u_sigma, strength);
  for (auto& v : f) v = real_t{2} * std::log(real_t{1} + v);
  return log_var + Tensor(Shape{z}, std::move(f));
}

PriorSample sample_prior(Rng& rng, int z_dim, real_t jitter) {
  if (z_dim < 1) throw std::invalid_argument("sample_prior: z_dim must be positive");
  if (jitter < 0) throw std::invalid_argument("sample_prior: jitter must be >= 0");
  PriorSample p;
  p.mu.resize(static_cast<std::size_t>(z_dim));
  p.log_var.resize(static_cast<std::size_t>(z_dim));
  for (auto& v : p.mu) v = static_cast<real_t>(rng.normal(0.0, static_cast<double>(jitter)));
  for (auto& v : p.log_var)
    v = real_t{2} * static_cast<real_t>(rng.normal(0.0, static_cast<double>(jitter)));
  return p;
}

}  // namespace davegan
