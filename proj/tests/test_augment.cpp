#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "davegan/augment.hpp"
#include "davegan/rng.hpp"
#include "doctest.h"
#include "support/gradcheck.hpp"

using namespace davegan;
using davegan::testing::grad_check;

namespace {

Tensor random_batch(Rng& rng, int b, int c, int h, int w) {
  std::vector<real_t> v(static_cast<std::size_t>(b) * c * h * w);
  for (auto& x : v) x = static_cast<real_t>(rng.normal());
  return Tensor(Shape{b, c, h, w}, std::move(v));
}

double dot(const std::vector<real_t>& a, const std::vector<real_t>& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

}  // namespace

TEST_CASE("translation moves the marked pixel as documented") {
  Tensor x(Shape{1, 1, 2, 2}, {1, 0, 0, 0});
  TranslationParams u{{{1, 0}}};  // one pixel to the right
  Tensor y = translate_periodic(x, u);
  CHECK(y.data() == std::vector<real_t>{0, 1, 0, 0});

  TranslationParams d{{{0, 1}}};  // one pixel down
  CHECK(translate_periodic(x, d).data() == std::vector<real_t>{0, 0, 1, 0});

  TranslationParams wrap_u{{{3, 2}}};  // displacements reduce mod the extent
  CHECK(translate_periodic(x, wrap_u).data() == std::vector<real_t>{0, 1, 0, 0});

  TranslationParams zero{{{0, 0}}};
  CHECK(translate_periodic(x, zero).data() == x.data());
}

TEST_CASE("translations compose additively") {
  Rng rng(11);
  Tensor x = random_batch(rng, 2, 1, 6, 6);
  TranslationParams a{{{2, 1}, {5, 3}}}, b{{{3, 4}, {1, 2}}}, ab{{{5, 5}, {0, 5}}};
  Tensor y = translate_periodic(translate_periodic(x, a), b);
  CHECK(y.data() == translate_periodic(x, ab).data());
}

TEST_CASE("translation permutes, never blends") {
  Rng rng(12);
  Tensor x = random_batch(rng, 1, 1, 5, 7);
  TranslationParams u{{{3, 2}}};
  Tensor y = translate_periodic(x, u);
  std::vector<real_t> a = x.data(), b = y.data();
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(a == b);  // identical pixel multiset
}

TEST_CASE("translation adjoint is the inverse roll") {
  Rng rng(13);
  Tensor x = random_batch(rng, 2, 1, 4, 4);
  Tensor y = random_batch(rng, 2, 1, 4, 4);
  TranslationParams u{{{1, 3}, {2, 2}}};
  TranslationParams inv{{{-1, -3}, {-2, -2}}};
  const double lhs = dot(translate_periodic(x, u).data(), y.data());
  const double rhs = dot(x.data(), translate_periodic(y, inv).data());
  CHECK(std::fabs(lhs - rhs) < 1e-12);
}

TEST_CASE("finite differences confirm the translation gradient") {
  Rng rng(14);
  std::vector<real_t> v(16);
  for (auto& x : v) x = static_cast<real_t>(rng.normal());
  std::vector<Variable> vars;
  vars.emplace_back("x", Shape{1, 1, 4, 4}, v);
  TranslationParams u{{{1, 2}}};
  auto f = [&u](Tape&, const std::vector<Tensor>& xs) {
    Tensor t = translate_periodic(xs[0], u);
    return reduce_mean(square(t + real_t{0.3} * translate_periodic(xs[0], u)));
  };
  CHECK(grad_check(f, vars).max_rel_err < 1e-6);
}

TEST_CASE("translation draws live inside the image") {
  Rng rng(15);
  TranslationParams p = sample_translation(rng, 64, 32, 0.125);
  CHECK(p.u.size() == 64);
  bool moved = false;
  for (auto [ux, uy] : p.u) {
    CHECK(ux >= 0);
    CHECK(ux < 32);
    CHECK(uy >= 0);
    CHECK(uy < 32);
    moved = moved || ux != 0 || uy != 0;
  }
  CHECK(moved);

  Rng a(16), b(16);
  CHECK(sample_translation(a, 8, 32, 0.125).u == sample_translation(b, 8, 32, 0.125).u);

  for (auto [ux, uy] : sample_translation(rng, 8, 32, 0.0).u) {
    CHECK(ux == 0);
    CHECK(uy == 0);
  }
}

TEST_CASE("latent transforms follow their formulas") {
  LatentAugParams u{{0.0, 0.5, 1.0}, {0.0, 0.5, 1.0}};
  Tensor mu = Tensor::full(Shape{2, 3}, 1);
  Tensor out = augment_mu(mu, u, 0.5);
  // shift = 0.5 * (2u - 1) = {-0.5, 0, 0.5}
  CHECK(out.data()[0] == doctest::Approx(0.5));
  CHECK(out.data()[1] == doctest::Approx(1.0));
  CHECK(out.data()[2] == doctest::Approx(1.5));
  CHECK(out.data()[3] == doctest::Approx(0.5));  // same draw for every sample

  Tensor sigma = Tensor::full(Shape{1, 3}, 2);
  Tensor so = augment_sigma(sigma, u, 0.5);
  CHECK(so.data()[0] == doctest::Approx(1.0));  // factor 0.5
  CHECK(so.data()[1] == doctest::Approx(2.0));
  CHECK(so.data()[2] == doctest::Approx(3.0));  // factor 1.5

  // strength 0 is the identity
  CHECK(augment_mu(mu, u, 0).data() == mu.data());
  CHECK(augment_sigma(sigma, u, 0).data() == sigma.data());

  CHECK_THROWS_AS(augment_sigma(sigma, u, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(augment_mu(mu, u, -0.1), std::invalid_argument);
  LatentAugParams short_u{{0.5}, {0.5}};
  CHECK_THROWS_AS(augment_mu(mu, short_u, 0.5), std::invalid_argument);
}

TEST_CASE("log-variance form matches the sigma form") {
  Rng rng(17);
  LatentAugParams u = sample_latent_aug(rng, 4);
  std::vector<real_t> lv(8);
  for (auto& v : lv) v = static_cast<real_t>(rng.normal(0, 1.2));
  Tensor log_var(Shape{2, 4}, lv);
  Tensor via_sigma = augment_sigma(exp(real_t{0.5} * log_var), u, 0.5);
  Tensor via_logv = exp(real_t{0.5} * augment_log_var(log_var, u, 0.5));
  for (std::size_t i = 0; i < via_sigma.numel(); ++i)
    CHECK(std::fabs(via_sigma.data()[i] - via_logv.data()[i]) < 1e-12);
}

TEST_CASE("latent gradients pass through the transforms untouched") {
  Rng rng(18);
  LatentAugParams u = sample_latent_aug(rng, 3);
  std::vector<real_t> mv(6);
  for (auto& v : mv) v = static_cast<real_t>(rng.normal());
  std::vector<Variable> vars;
  vars.emplace_back("mu", Shape{2, 3}, mv);
  auto f = [&u](Tape&, const std::vector<Tensor>& xs) {
    return reduce_mean(square(augment_mu(xs[0], u, 0.5)));
  };
  CHECK(grad_check(f, vars).max_rel_err < 1e-6);
}

TEST_CASE("prior sampling degenerates cleanly at zero jitter") {
  Rng rng(19);
  PriorSample p = sample_prior(rng, 5, 0.0);
  for (double v : p.mu) CHECK(v == 0.0);
  for (double v : p.log_var) CHECK(v == 0.0);

  PriorSample q = sample_prior(rng, 5, 0.2);
  bool off = false;
  for (double v : q.mu) off = off || v != 0.0;
  CHECK(off);

  Rng a(20), b(20);
  PriorSample pa = sample_prior(a, 4, 0.2), pb = sample_prior(b, 4, 0.2);
  CHECK(pa.mu == pb.mu);
  CHECK(pa.log_var == pb.log_var);
}
