#pragma once

#include <string>
#include <vector>

#include "davegan/descriptors.hpp"
#include "davegan/rng.hpp"

namespace davegan {

// Single elliptical inclusion, fully described by five parameters.
// x1 runs along columns, x2 along rows; phi = 0 lays the a-axis horizontal.
struct EllipseParams {
  double a = 0.0, b = 0.0;  // semi-axes in pixels, a >= b
  double x1 = 0.0, x2 = 0.0;
  double phi = 0.0;
};

// Throws std::invalid_argument unless, for a size x size image:
//   b > 0, 1 <= a/b <= 4,
//   area fraction pi a b / size^2 inside (0.012, 0.19),
//   the rotated ellipse contained in [0, size] x [0, size].
void validate_ellipse(const EllipseParams& p, int size);

// Binary raster. Pixel (i, j) is 1 iff its center (j + 0.5, i + 0.5),
// rotated by -phi about (x1, x2), satisfies (dx/a)^2 + (dy/b)^2 <= 1.
Grid rasterize_ellipse(const EllipseParams& p, int size);

struct DataSet {
  std::vector<Grid> samples;
  int size = 0;
  std::vector<double> levels{0.0, 1.0};
};

// i.i.d. ellipse parameters via rejection: a, b ~ U[2, size/2], center
// uniform over the placements that keep the ellipse inside, phi ~ U[0, pi);
// draws violating the parameter bounds are discarded. Each sample runs on
// its own child stream derived from one draw of `rng`, so generation is
// order-independent. Throws std::runtime_error when a sample exhausts its
// attempt budget (size too small for the admissible region).
DataSet sample_ellipse_dataset(int n, int size, Rng& rng);

// Non-overlapping row-major tile x tile blocks; both image extents must be
// divisible by tile.
DataSet tile_micrograph(const Grid& image, int tile);

// Exact inverse of tiling: rows x cols equally sized tiles, row-major.
Grid reassemble_tiles(const std::vector<Grid>& tiles, int rows, int cols);

// Alternating 0/1 cells, top-left cell 1. cell must divide size.
Grid make_checkerboard(int size, int cell);

// Binary 8-bit graymap ("P5"). Reading maps byte k to k / maxval; writing
// scales [0, 1] by 255 and rounds half up. Parse failures throw with the
// byte offset in the message.
Grid read_image(const std::string& path);
void write_image(const Grid& g, const std::string& path);

// Plain-text manifest: one image path per line, relative to the manifest's
// own directory. read_manifest returns the resolved paths.
std::vector<std::string> read_manifest(const std::string& path);
void write_manifest(const std::string& path, const std::vector<std::string>& relative_names);

// Load every image named by `path`: either a manifest file or a directory,
// whose *.pgm entries are taken in name order. All images must be square
// and share one size.
DataSet load_dataset(const std::string& path);

}  // namespace davegan
