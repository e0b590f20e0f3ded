#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "davegan/descriptors.hpp"
#include "davegan/rng.hpp"
#include "doctest.h"

using namespace davegan;

namespace {

// Direct-space oracle: average over every position of the product with the
// periodically displaced field.
Grid brute_s2(const Grid& g) {
  Grid out(g.h, g.w);
  for (int di = 0; di < g.h; ++di)
    for (int dj = 0; dj < g.w; ++dj) {
      double acc = 0;
      for (int i = 0; i < g.h; ++i)
        for (int j = 0; j < g.w; ++j)
          acc += g.at(i, j) * g.at((i + di) % g.h, (j + dj) % g.w);
      out.at(di, dj) = acc / static_cast<double>(g.size());
    }
  return out;
}

Grid random_binary(Rng& rng, int h, int w, double p = 0.5) {
  Grid g(h, w);
  for (auto& v : g.v) v = rng.uniform() < p ? 1.0 : 0.0;
  return g;
}

Grid rolled(const Grid& g, int di, int dj) {
  Grid out(g.h, g.w);
  for (int i = 0; i < g.h; ++i)
    for (int j = 0; j < g.w; ++j) out.at((i + di) % g.h, (j + dj) % g.w) = g.at(i, j);
  return out;
}

}  // namespace

TEST_CASE("spectral correlation equals the direct-space sum") {
  Rng rng(61);
  for (int it = 0; it < 20; ++it) {
    Grid g = random_binary(rng, 16, 16, 0.3 + 0.4 * rng.uniform());
    Grid fast = s2(g);
    Grid slow = brute_s2(g);
    double worst = 0;
    for (std::size_t i = 0; i < fast.size(); ++i)
      worst = std::max(worst, std::fabs(fast.v[i] - slow.v[i]));
    CHECK(worst <= 1e-10);
  }
  // rectangular geometry goes through the same path
  Grid g = random_binary(rng, 8, 12);
  Grid fast = s2(g), slow = brute_s2(g);
  for (std::size_t i = 0; i < fast.size(); ++i)
    CHECK(std::fabs(fast.v[i] - slow.v[i]) <= 1e-10);
}

TEST_CASE("zero displacement recovers the volume fraction") {
  Rng rng(62);
  for (int it = 0; it < 10; ++it) {
    Grid g = random_binary(rng, 16, 16, 0.2 + 0.6 * rng.uniform());
    CHECK(std::fabs(s2(g).at(0, 0) - volume_fraction(g)) <= 1e-12);
  }
  Grid ones(4, 4, std::vector<double>(16, 1.0));
  CHECK(volume_fraction(ones) == 1.0);
  for (double v : s2(ones).v) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("correlation maps ignore periodic shifts") {
  Rng rng(63);
  Grid g = random_binary(rng, 12, 12);
  Grid sa = s2(g);
  Grid sb = s2(rolled(g, 5, 9));
  for (std::size_t i = 0; i < sa.size(); ++i) CHECK(std::fabs(sa.v[i] - sb.v[i]) <= 1e-12);
  CHECK(descriptor_error(sa, sb) <= 1e-12);
}

TEST_CASE("rounding snaps to the nearest level, midpoints downward") {
  Grid g(1, 6, {0.2, 0.8, 0.5, 0.49999, 1.2, -0.3});
  Grid r = round_to_indicator(g);
  CHECK(r.v == std::vector<double>{0, 1, 0, 0, 1, 0});

  Grid t(1, 5, {0.2, 0.3, 0.75, 0.25, 0.6});
  Grid r3 = round_to_indicator(t, {0.0, 0.5, 1.0});
  CHECK(r3.v == std::vector<double>{0, 0.5, 0.5, 0.0, 0.5});  // 0.25 and 0.75 tie down

  CHECK_THROWS_AS(round_to_indicator(g, {}), std::invalid_argument);
  CHECK_THROWS_AS(round_to_indicator(g, {1.0, 0.0}), std::invalid_argument);

  Grid ph = phase_indicator(r3, 0.5);
  CHECK(ph.v == std::vector<double>{0, 1, 1, 0, 1});
}

TEST_CASE("descriptor error is an RMS over displacements") {
  Grid a(2, 2, {1, 1, 1, 1});
  Grid b(2, 2, {1, 1, 1, 0});
  CHECK(descriptor_error(a, a) == 0.0);
  CHECK(descriptor_error(a, b) == doctest::Approx(std::sqrt(0.25 * 1.0)).epsilon(1e-12));
  CHECK(descriptor_error(a, b) == descriptor_error(b, a));
  CHECK_THROWS_AS(descriptor_error(a, Grid(3, 3)), std::invalid_argument);
}

TEST_CASE("set metrics behave at their fixed points") {
  Rng rng(64);
  std::vector<Grid> set;
  for (int i = 0; i < 4; ++i) set.push_back(random_binary(rng, 8, 8));

  CHECK(error_rec(set, set) == 0.0);
  CHECK(error_gen(set, set) == 0.0);  // every member finds itself

  std::vector<Grid> shifted;
  for (const Grid& g : set) shifted.push_back(rolled(g, 3, 1));
  CHECK(error_rec(set, shifted) <= 1e-12);  // shift-blind by construction

  std::vector<Grid> blank(4, Grid(8, 8));
  CHECK(error_rec(set, blank) > 0.0);

  // identical members leave no pairwise spread
  std::vector<Grid> clones(5, set[0]);
  CHECK(mean_pairwise_error(clones) <= 1e-15);
  CHECK(mean_pairwise_error(set) > 0.0);

  CHECK_THROWS_AS(error_rec(set, blank = {}), std::invalid_argument);
  CHECK_THROWS_AS(mean_pairwise_error({set[0]}), std::invalid_argument);
}

TEST_CASE("soft fields round before the metrics see them") {
  // raw values near 0.5 must collapse to clean indicators
  Grid soft(2, 2, {0.51, 0.49, 0.7, 0.2});
  Grid hard(2, 2, {1.0, 0.0, 1.0, 0.0});
  CHECK(error_rec({soft}, {hard}) == 0.0);
}
