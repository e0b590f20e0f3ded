#pragma once

#include <vector>

namespace davegan {

// Dense row-major H x W field. Descriptor math always runs in double,
// independent of the training precision.
struct Grid {
  int h = 0, w = 0;
  std::vector<double> v;

  Grid() = default;
  Grid(int h_, int w_) : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, 0.0) {}
  Grid(int h_, int w_, std::vector<double> data);

  double& at(int i, int j) { return v[static_cast<std::size_t>(i) * w + j]; }
  double at(int i, int j) const { return v[static_cast<std::size_t>(i) * w + j]; }
  std::size_t size() const { return v.size(); }
};

// Periodic two-point correlation, computed spectrally:
// S2[r] = (1 / (H W)) * sum_x I(x) I(x + r), displacements wrapping around.
// For a 0/1 indicator S2[0][0] is the volume fraction.
Grid s2(const Grid& indicator);

// Snap each value to the nearest of the given phase levels (ascending);
// exact midpoints resolve to the lower level.
Grid round_to_indicator(const Grid& g, const std::vector<double>& levels = {0.0, 1.0});

// 1 where the rounded field equals `level`, else 0
Grid phase_indicator(const Grid& rounded, double level);

double volume_fraction(const Grid& indicator);

// Root-mean-square difference of two correlation maps over all H W
// displacements.
double descriptor_error(const Grid& s2_a, const Grid& s2_b);

// The set metrics below compare raw-valued structures: each is rounded to
// the given levels, reduced to the indicator of `phase`, and summarized by
// its correlation map.

// mean over corresponding pairs (originals[i], reconstructions[i])
double error_rec(const std::vector<Grid>& originals, const std::vector<Grid>& reconstructions,
                 const std::vector<double>& levels = {0.0, 1.0}, double phase = 1.0);

// mean over generated structures of the distance to their nearest training
// structure
double error_gen(const std::vector<Grid>& training, const std::vector<Grid>& generated,
                 const std::vector<double>& levels = {0.0, 1.0}, double phase = 1.0);

// mean over unordered pairs within one set; zero means every member carries
// an identical correlation map
double mean_pairwise_error(const std::vector<Grid>& set,
                           const std::vector<double>& levels = {0.0, 1.0}, double phase = 1.0);

}  // namespace davegan
