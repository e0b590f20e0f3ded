#include "davegan/descriptors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>

namespace davegan {

Grid::Grid(int h_, int w_, std::vector<double> data) : h(h_), w(w_), v(std::move(data)) {
  if (h < 1 || w < 1 || v.size() != static_cast<std::size_t>(h) * w)
    throw std::invalid_argument("Grid: " + std::to_string(v.size()) + " values for " +
                                std::to_string(h) + "x" + std::to_string(w));
}

namespace {

// One set of FFTW buffers and plans per grid geometry, reused across calls.
// FFTW planning is not reentrant, hence the lock; execution happens on the
// cached buffers under the same lock.
struct FftPair {
  fftw_plan fwd = nullptr, inv = nullptr;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  int h = 0, w = 0;

  FftPair(int h_, int w_) : h(h_), w(w_) {
    const std::size_t nspec = static_cast<std::size_t>(h) * (w / 2 + 1);
    real = fftw_alloc_real(static_cast<std::size_t>(h) * w);
    spec = fftw_alloc_complex(nspec);
    fwd = fftw_plan_dft_r2c_2d(h, w, real, spec, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_2d(h, w, spec, real, FFTW_ESTIMATE);
    if (!fwd || !inv) throw std::runtime_error("s2: FFTW plan creation failed");
  }
  ~FftPair() {
    if (fwd) fftw_destroy_plan(fwd);
    if (inv) fftw_destroy_plan(inv);
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
  }
  FftPair(const FftPair&) = delete;
  FftPair& operator=(const FftPair&) = delete;
};

std::mutex g_fft_mutex;
std::map<std::pair<int, int>, std::unique_ptr<FftPair>>& fft_cache() {
  static std::map<std::pair<int, int>, std::unique_ptr<FftPair>> cache;
  return cache;
}

void check_grid(const char* op, const Grid& g) {
  if (g.h < 1 || g.w < 1 || g.v.size() != static_cast<std::size_t>(g.h) * g.w)
    throw std::invalid_argument(std::string(op) + ": malformed grid");
}

}  // namespace

Grid s2(const Grid& indicator) {
  check_grid("s2", indicator);
  const int H = indicator.h, W = indicator.w;
  const std::size_t n = indicator.size();
  const std::size_t nspec = static_cast<std::size_t>(H) * (W / 2 + 1);

  std::lock_guard<std::mutex> lock(g_fft_mutex);
  auto& slot = fft_cache()[{H, W}];
  if (!slot) slot = std::make_unique<FftPair>(H, W);
  FftPair& p = *slot;

  for (std::size_t i = 0; i < n; ++i) p.real[i] = indicator.v[i];
  fftw_execute(p.fwd);
  for (std::size_t k = 0; k < nspec; ++k) {
    const double re = p.spec[k][0], im = p.spec[k][1];
    p.spec[k][0] = re * re + im * im;
    p.spec[k][1] = 0.0;
  }
  fftw_execute(p.inv);

  // one 1/(H W) normalizes the unnormalized inverse transform, the other is
  // the correlation's own average over positions
  Grid out(H, W);
  const double scale = 1.0 / (static_cast<double>(n) * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i) out.v[i] = p.real[i] * scale;
  return out;
}

Grid round_to_indicator(const Grid& g, const std::vector<double>& levels) {
  check_grid("round_to_indicator", g);
  if (levels.empty()) throw std::invalid_argument("round_to_indicator: no levels");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (levels[i] <= levels[i - 1])
      throw std::invalid_argument("round_to_indicator: levels must be strictly ascending");
  Grid out(g.h, g.w);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double best = levels[0];
    double bestd = std::fabs(g.v[i] - levels[0]);
    for (std::size_t li = 1; li < levels.size(); ++li) {
      const double d = std::fabs(g.v[i] - levels[li]);
      if (d < bestd) {  // strict: an exact midpoint keeps the lower level
        bestd = d;
        best = levels[li];
      }
    }
    out.v[i] = best;
  }
  return out;
}

Grid phase_indicator(const Grid& rounded, double level) {
  check_grid("phase_indicator", rounded);
  Grid out(rounded.h, rounded.w);
  for (std::size_t i = 0; i < rounded.size(); ++i)
    out.v[i] = rounded.v[i] == level ? 1.0 : 0.0;
  return out;
}

double volume_fraction(const Grid& indicator) {
  check_grid("volume_fraction", indicator);
  double acc = 0;
  for (double v : indicator.v) acc += v;
  return acc / static_cast<double>(indicator.size());
}

double descriptor_error(const Grid& s2_a, const Grid& s2_b) {
  check_grid("descriptor_error", s2_a);
  if (s2_a.h != s2_b.h || s2_a.w != s2_b.w)
    throw std::invalid_argument("descriptor_error: map sizes differ");
  double acc = 0;
  for (std::size_t i = 0; i < s2_a.size(); ++i) {
    const double d = s2_a.v[i] - s2_b.v[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(s2_a.size()));
}

namespace {

std::vector<Grid> s2_of_each(const std::vector<Grid>& set, const std::vector<double>& levels,
                             double phase) {
  std::vector<Grid> out;
  out.reserve(set.size());
  for (const Grid& g : set) out.push_back(s2(phase_indicator(round_to_indicator(g, levels), phase)));
  return out;
}

}  // namespace

double error_rec(const std::vector<Grid>& originals, const std::vector<Grid>& reconstructions,
                 const std::vector<double>& levels, double phase) {
  if (originals.empty() || originals.size() != reconstructions.size())
    throw std::invalid_argument("error_rec: need equally sized non-empty sets, got " +
                                std::to_string(originals.size()) + " and " +
                                std::to_string(reconstructions.size()));
  std::vector<Grid> sa = s2_of_each(originals, levels, phase);
  std::vector<Grid> sb = s2_of_each(reconstructions, levels, phase);
  double acc = 0;
  for (std::size_t i = 0; i < sa.size(); ++i) acc += descriptor_error(sa[i], sb[i]);
  return acc / static_cast<double>(sa.size());
}

double error_gen(const std::vector<Grid>& training, const std::vector<Grid>& generated,
                 const std::vector<double>& levels, double phase) {
  if (training.empty() || generated.empty())
    throw std::invalid_argument("error_gen: both sets must be non-empty");
  std::vector<Grid> st = s2_of_each(training, levels, phase);
  std::vector<Grid> sg = s2_of_each(generated, levels, phase);
  double acc = 0;
  for (const Grid& g : sg) {
    double best = descriptor_error(g, st[0]);
    for (std::size_t i = 1; i < st.size(); ++i) best = std::min(best, descriptor_error(g, st[i]));
    acc += best;
  }
  return acc / static_cast<double>(sg.size());
}

double mean_pairwise_error(const std::vector<Grid>& set, const std::vector<double>& levels,
                           double phase) {
  if (set.size() < 2) throw std::invalid_argument("mean_pairwise_error: need at least two members");
  std::vector<Grid> ss = s2_of_each(set, levels, phase);
  double acc = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < ss.size(); ++i)
    for (std::size_t j = i + 1; j < ss.size(); ++j) {
      acc += descriptor_error(ss[i], ss[j]);
      ++pairs;
    }
  return acc / static_cast<double>(pairs);
}

}  // namespace davegan
