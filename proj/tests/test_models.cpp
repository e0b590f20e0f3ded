#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <fstream>
#include <vector>

#include "davegan/models.hpp"
#include "davegan/rng.hpp"
#include "doctest.h"

using namespace davegan;

namespace {

Tensor random_image(Rng& rng, int batch, int size) {
  std::vector<real_t> v(static_cast<std::size_t>(batch) * size * size);
  for (auto& x : v) x = static_cast<real_t>(rng.uniform());
  return Tensor(Shape{batch, 1, size, size}, std::move(v));
}

std::vector<char> slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("32-family layer table") {
  HybridArchSpec s = hybrid_arch(32, 5);
  auto filters = [](const ArchSpec& a) {
    std::vector<int> f;
    for (auto& l : a.layers) f.push_back(l.filters);
    return f;
  };
  auto strides = [](const ArchSpec& a) {
    std::vector<int> f;
    for (auto& l : a.layers) f.push_back(l.stride);
    return f;
  };
  CHECK(filters(s.encoder) == std::vector<int>{16, 32, 64, 10});
  CHECK(strides(s.encoder) == std::vector<int>{2, 2, 2, 1});
  CHECK(filters(s.generator) == std::vector<int>{64, 32, 16, 1});
  CHECK(strides(s.generator) == std::vector<int>{1, 2, 2, 2});
  CHECK(filters(s.discriminator) == std::vector<int>{8, 16, 32, 1});

  for (auto& l : s.encoder.layers) CHECK(l.kernel == 4);
  CHECK_FALSE(s.encoder.layers[0].batch_norm);
  CHECK(s.encoder.layers[1].batch_norm);
  CHECK(s.encoder.layers[3].padding == Padding::Valid);
  CHECK(s.encoder.layers[3].activation == Activation::LeakyRelu);
  CHECK(s.generator.layers[0].kind == LayerKind::TranspConv2D);
  CHECK(s.generator.layers[0].padding == Padding::Valid);
  CHECK(s.generator.layers[3].activation == Activation::Sigmoid);
  CHECK(s.generator.layers[3].batch_norm);
  CHECK_FALSE(s.discriminator.layers[0].batch_norm);
  CHECK(s.discriminator.layers[3].batch_norm);
  CHECK(s.discriminator.layers[3].activation == Activation::Sigmoid);
}

TEST_CASE("64-family layer table") {
  HybridArchSpec s = hybrid_arch(64, 32);
  auto filters = [](const ArchSpec& a) {
    std::vector<int> f;
    for (auto& l : a.layers) f.push_back(l.filters);
    return f;
  };
  CHECK(filters(s.encoder) == std::vector<int>{16, 16, 32, 64, 64});
  CHECK(filters(s.generator) == std::vector<int>{64, 32, 32, 16, 1});
  CHECK(filters(s.discriminator) == std::vector<int>{4, 8, 16, 32, 1});
  CHECK_FALSE(s.generator.layers[4].batch_norm);  // the one stack ending without norm
  CHECK(s.generator.layers[4].activation == Activation::Sigmoid);
  CHECK(s.discriminator.layers[4].batch_norm);

  CHECK_THROWS_AS(hybrid_arch(48, 5), std::invalid_argument);
  CHECK_THROWS_AS(hybrid_arch(32, 0), std::invalid_argument);
}

TEST_CASE("architecture hashes separate the families") {
  CHECK(arch_hash(hybrid_arch(32, 5)) != arch_hash(hybrid_arch(64, 5)));
  CHECK(arch_hash(hybrid_arch(32, 5)) != arch_hash(hybrid_arch(32, 7)));
  CHECK(arch_hash(hybrid_arch(32, 5)) == arch_hash(hybrid_arch(32, 5)));
  CHECK(arch_string(hybrid_arch(32, 5)).substr(0, 12) == "size=32;z=5;");
}

TEST_CASE("latent pipeline shapes, 32 family") {
  HybridModel m(hybrid_arch(32, 5), 11);
  Rng rng(1);
  Tensor x = random_image(rng, 2, 32);

  LatentDist q = m.encode(nullptr, x, false);
  CHECK(q.mu.shape() == Shape{2, 5});
  CHECK(q.log_var.shape() == Shape{2, 5});

  Tensor eps = sample_noise(rng, 2, 5);
  Tensor z = reparametrize(q, eps);
  CHECK(z.shape() == Shape{2, 5});

  Tensor gen = m.generate(nullptr, z, false);
  CHECK(gen.shape() == Shape{2, 1, 32, 32});
  for (real_t v : gen.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  Tensor score = m.discriminate(nullptr, gen.detach(), false);
  CHECK(score.shape() == Shape{2});
  for (real_t v : score.data()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  CHECK_THROWS_AS(m.encode(nullptr, random_image(rng, 1, 16), false), std::invalid_argument);
  CHECK_THROWS_AS(m.generate(nullptr, sample_noise(rng, 1, 4), false), std::invalid_argument);
}

TEST_CASE("latent pipeline shapes, 64 family") {
  HybridModel m(hybrid_arch(64, 32), 12);
  Rng rng(2);
  Tensor x = random_image(rng, 2, 64);
  LatentDist q = m.encode(nullptr, x, false);
  CHECK(q.mu.shape() == Shape{2, 32});
  Tensor gen = m.generate(nullptr, reparametrize(q, sample_noise(rng, 2, 32)), false);
  CHECK(gen.shape() == Shape{2, 1, 64, 64});
  CHECK(m.discriminate(nullptr, x, false).shape() == Shape{2});
}

TEST_CASE("reparametrize follows mu + sigma * eps") {
  LatentDist q{Tensor(Shape{1, 2}, {0, 1}), Tensor(Shape{1, 2}, {0, std::log(real_t{4})})};
  Tensor z = reparametrize(q, Tensor(Shape{1, 2}, {1, 1}));
  CHECK(z.data()[0] == doctest::Approx(1.0).epsilon(1e-12));   // sigma = 1
  CHECK(z.data()[1] == doctest::Approx(3.0).epsilon(1e-12));   // sigma = 2
}

TEST_CASE("training pass reaches every parameter of the active net only") {
  HybridModel m(hybrid_arch(32, 5), 3);
  Rng rng(4);
  Tensor x = random_image(rng, 2, 32);
  Tape tape;
  Tensor score = m.discriminate(&tape, x, true);
  tape.backward(reduce_mean(score));
  bool any = false;
  for (Variable* p : m.discriminator_params())
    for (real_t g : p->grad()) any = any || g != 0;
  CHECK(any);
  for (Variable* p : m.encoder_params())
    for (real_t g : p->grad()) CHECK(g == 0);
  for (Variable* p : m.generator_params())
    for (real_t g : p->grad()) CHECK(g == 0);
}

TEST_CASE("same seed builds identical models") {
  HybridModel a(hybrid_arch(32, 5), 21);
  HybridModel b(hybrid_arch(32, 5), 21);
  Rng rng(5);
  Tensor x = random_image(rng, 2, 32);
  CHECK(a.discriminate(nullptr, x, false).data() == b.discriminate(nullptr, x, false).data());
  HybridModel c(hybrid_arch(32, 5), 22);
  CHECK(a.discriminate(nullptr, x, false).data() != c.discriminate(nullptr, x, false).data());
}

TEST_CASE("noise sampling is deterministic per seed") {
  Rng a(9), b(9), c(10);
  CHECK(sample_noise(a, 3, 5).data() == sample_noise(b, 3, 5).data());
  CHECK(sample_noise(a, 3, 5).data() != sample_noise(c, 3, 5).data());
  CHECK(sample_noise(a, 4, 2).shape() == Shape{4, 2});
}

TEST_CASE("checkpoint round-trip is stable to the bit") {
  const char* path = "ckpt_models_test.bin";
  const char* path2 = "ckpt_models_test2.bin";
  HybridModel m(hybrid_arch(32, 5), 77);
  Rng rng(6);
  Tensor x = random_image(rng, 2, 32);
  Tensor y_fresh = m.generate(nullptr, sample_noise(rng, 2, 5), false);
  m.save(path);

  HybridModel l1 = HybridModel::load(path);
  CHECK(l1.z_dim() == 5);
  CHECK(l1.image_size() == 32);
  Rng rng_b(6);
  Tensor xb = random_image(rng_b, 2, 32);
  Tensor y1 = l1.generate(nullptr, sample_noise(rng_b, 2, 5), false);
  // quantized to 32-bit storage, so only approximately the fresh output
  for (std::size_t i = 0; i < y1.numel(); ++i)
    CHECK(y1.data()[i] == doctest::Approx(y_fresh.data()[i]).epsilon(1e-4));

  l1.save(path2);
  CHECK(slurp(path) == slurp(path2));  // byte-identical re-serialization

  HybridModel l2 = HybridModel::load(path2);
  Rng rng_c(6);
  (void)random_image(rng_c, 2, 32);
  Tensor y2 = l2.generate(nullptr, sample_noise(rng_c, 2, 5), false);
  CHECK(y1.data() == y2.data());  // exact

  std::remove(path);
  std::remove(path2);
}

TEST_CASE("checkpoint rejects damaged files") {
  const char* path = "ckpt_models_bad.bin";
  {
    std::ofstream f(path, std::ios::binary);
    f.write("NOPE", 4);
  }
  CHECK_THROWS_WITH_AS(HybridModel::load(path), doctest::Contains("bad magic"),
                       std::runtime_error);

  HybridModel m(hybrid_arch(32, 5), 1);
  m.save(path);
  {
    auto bytes = slurp(path);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  CHECK_THROWS_WITH_AS(HybridModel::load(path), doctest::Contains("truncated"),
                       std::runtime_error);

  {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write("DVGN", 4);
    std::uint32_t version = 9, z = 5;
    std::uint64_t h = 0;
    f.write(reinterpret_cast<char*>(&version), 4);
    f.write(reinterpret_cast<char*>(&z), 4);
    f.write(reinterpret_cast<char*>(&h), 8);
  }
  CHECK_THROWS_WITH_AS(HybridModel::load(path), doctest::Contains("version"), std::runtime_error);
  std::remove(path);
  CHECK_THROWS_AS(HybridModel::load("no_such_file.bin"), std::runtime_error);
}
