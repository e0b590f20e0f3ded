#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include "davegan/data.hpp"
#include "davegan/descriptors.hpp"
#include "davegan/rng.hpp"
#include "doctest.h"

using namespace davegan;

namespace {

int ones(const Grid& g) {
  int n = 0;
  for (double v : g.v) n += v == 1.0 ? 1 : 0;
  return n;
}

bool identical(const Grid& a, const Grid& b) {
  return a.h == b.h && a.w == b.w && a.v == b.v;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

template <class F>
bool throws_containing(F&& f, const std::string& fragment) {
  try {
    f();
  } catch (const std::exception& e) {
    return std::string(e.what()).find(fragment) != std::string::npos;
  }
  return false;
}

struct TempDir {
  std::filesystem::path dir;
  TempDir(const char* name) : dir(std::filesystem::temp_directory_path() / name) {
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
  }
  ~TempDir() { std::filesystem::remove_all(dir); }
  std::string operator/(const char* leaf) const { return (dir / leaf).string(); }
};

}  // namespace

TEST_CASE("ellipse parameter validation") {
  EllipseParams good{7.0, 3.0, 16.0, 16.0, 0.3};
  CHECK_NOTHROW(validate_ellipse(good, 32));

  EllipseParams swapped = good;
  std::swap(swapped.a, swapped.b);
  CHECK_THROWS_AS(validate_ellipse(swapped, 32), std::invalid_argument);

  EllipseParams elongated{9.0, 2.0, 16.0, 16.0, 0.0};  // ratio 4.5
  CHECK_THROWS_AS(validate_ellipse(elongated, 32), std::invalid_argument);

  EllipseParams tiny{2.0, 1.5, 16.0, 16.0, 0.0};  // fraction ~0.009
  CHECK_THROWS_AS(validate_ellipse(tiny, 32), std::invalid_argument);

  EllipseParams huge{14.0, 14.0, 16.0, 16.0, 0.0};  // fraction ~0.6
  CHECK_THROWS_AS(validate_ellipse(huge, 32), std::invalid_argument);

  EllipseParams outside = good;
  outside.x2 = 5.0;  // vertical half extent 7 > 5
  outside.phi = std::numbers::pi / 2;
  CHECK_THROWS_AS(validate_ellipse(outside, 32), std::invalid_argument);
}

TEST_CASE("disk raster pixel count tracks analytic area") {
  for (double r : {4.0, 5.0, 6.0}) {
    EllipseParams p{r, r, 16.0, 16.0, 0.0};
    Grid g = rasterize_ellipse(p, 32);
    double area = std::numbers::pi * r * r;
    CHECK(std::abs(ones(g) - area) <= 4.0 * r);
  }
}

TEST_CASE("reference ellipse rasters vertically") {
  // semi-axes 7 and 3, centered, rotated a quarter turn: the long axis
  // stands upright, spanning 14 pixels against 6
  EllipseParams p{7.0, 3.0, 16.0, 16.0, std::numbers::pi / 2};
  Grid g = rasterize_ellipse(p, 32);

  int col = 0, row = 0;
  for (int i = 0; i < 32; ++i) col += g.at(i, 15) == 1.0 ? 1 : 0;
  for (int j = 0; j < 32; ++j) row += g.at(15, j) == 1.0 ? 1 : 0;
  CHECK(col == 14);
  CHECK(row == 6);
  CHECK(col > row);

  for (double v : g.v) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("rotation by half a turn leaves the raster unchanged") {
  EllipseParams p{6.0, 2.5, 14.0, 17.0, 0.7};
  EllipseParams q = p;
  q.phi += std::numbers::pi;
  CHECK(identical(rasterize_ellipse(p, 32), rasterize_ellipse(q, 32)));
}

TEST_CASE("sampled datasets respect the area bounds and the seed") {
  Rng rng(42);
  DataSet set = sample_ellipse_dataset(12, 32, rng);
  REQUIRE(set.samples.size() == 12);
  CHECK(set.size == 32);

  double delta = 1.0 / 32.0;  // one pixel row of slack for rasterization
  for (const Grid& g : set.samples) {
    for (double v : g.v) CHECK((v == 0.0 || v == 1.0));
    double frac = volume_fraction(g);
    CHECK(frac > 0.012 - delta);
    CHECK(frac < 0.19 + delta);
  }

  Rng rng2(42);
  DataSet again = sample_ellipse_dataset(12, 32, rng2);
  for (std::size_t k = 0; k < set.samples.size(); ++k)
    CHECK(identical(set.samples[k], again.samples[k]));

  Rng rng3(43);
  DataSet other = sample_ellipse_dataset(12, 32, rng3);
  bool all_same = true;
  for (std::size_t k = 0; k < set.samples.size(); ++k)
    all_same = all_same && identical(set.samples[k], other.samples[k]);
  CHECK_FALSE(all_same);
}

TEST_CASE("tiling splits row-major and reassembly inverts it") {
  Grid img(8, 8);
  for (int k = 0; k < 64; ++k) img.v[k] = k;

  DataSet tiles = tile_micrograph(img, 4);
  REQUIRE(tiles.samples.size() == 4);
  CHECK(tiles.size == 4);
  CHECK(tiles.samples[0].at(0, 0) == 0.0);
  CHECK(tiles.samples[1].at(0, 0) == 4.0);   // second tile of the top row
  CHECK(tiles.samples[2].at(0, 0) == 32.0);  // first tile of the bottom row
  CHECK(tiles.samples[3].at(3, 3) == 63.0);

  Grid back = reassemble_tiles(tiles.samples, 2, 2);
  CHECK(identical(back, img));

  Grid big(256, 256);
  for (std::size_t k = 0; k < big.size(); ++k) big.v[k] = (k % 7) / 7.0;
  DataSet sixteen = tile_micrograph(big, 64);
  CHECK(sixteen.samples.size() == 16);
  CHECK(identical(reassemble_tiles(sixteen.samples, 4, 4), big));

  Grid small(128, 128);
  CHECK(tile_micrograph(small, 64).samples.size() == 4);

  CHECK_THROWS_AS(tile_micrograph(Grid(10, 10), 4), std::invalid_argument);
  CHECK_THROWS_AS(reassemble_tiles(tiles.samples, 3, 2), std::invalid_argument);
}

TEST_CASE("checkerboard layout") {
  Grid g = make_checkerboard(4, 2);
  std::vector<double> want = {1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1};
  CHECK(g.v == want);
  CHECK(volume_fraction(g) == 0.5);

  Grid c = make_checkerboard(32, 4);
  CHECK(volume_fraction(c) == 0.5);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 32; ++j) {
      CHECK(c.at(i, j) == c.at((i + 8) % 32, j));
      CHECK(c.at(i, j) == c.at(i, (j + 8) % 32));
    }

  CHECK_THROWS_AS(make_checkerboard(10, 3), std::invalid_argument);
}

TEST_CASE("graymap write/read round trip") {
  TempDir tmp("davegan_data_io");
  Grid board = make_checkerboard(8, 2);
  std::string p1 = tmp / "board.pgm";
  write_image(board, p1);
  Grid back = read_image(p1);
  CHECK(identical(back, board));

  // a second write of the read-back image reproduces the file byte for byte
  std::string p2 = tmp / "board2.pgm";
  write_image(back, p2);
  CHECK(slurp(p1) == slurp(p2));

  // mid-gray rounds half up on write
  Grid mid(1, 2);
  mid.v = {0.5, 1.0};
  std::string p3 = tmp / "mid.pgm";
  write_image(mid, p3);
  std::string bytes = slurp(p3);
  REQUIRE(bytes.size() >= 2);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 128);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 255);
}

TEST_CASE("graymap value scaling follows the stated max") {
  TempDir tmp("davegan_data_scale");
  std::string p = tmp / "half.pgm";
  {
    std::ofstream out(p, std::ios::binary);
    out << "P5\n2 1\n100\n";
    out.put(static_cast<char>(50));
    out.put(static_cast<char>(100));
  }
  Grid g = read_image(p);
  CHECK(g.v[0] == 0.5);
  CHECK(g.v[1] == 1.0);

  // comments between header fields are legal
  std::string pc = tmp / "comment.pgm";
  {
    std::ofstream out(pc, std::ios::binary);
    out << "P5\n# generated\n1 1\n255\n";
    out.put(static_cast<char>(255));
  }
  CHECK(read_image(pc).v[0] == 1.0);
}

TEST_CASE("malformed graymaps are rejected with the byte offset") {
  TempDir tmp("davegan_data_bad");

  std::string magic = tmp / "magic.pgm";
  { std::ofstream(magic, std::ios::binary) << "P6\n1 1\n255\nx"; }
  CHECK(throws_containing([&] { read_image(magic); }, "byte offset 0"));

  std::string trunc = tmp / "trunc.pgm";
  {
    std::ofstream out(trunc, std::ios::binary);
    out << "P5\n4 4\n255\n";
    out.put('\0');  // one of sixteen payload bytes
  }
  CHECK_THROWS_AS(read_image(trunc), std::runtime_error);
  CHECK(throws_containing([&] { read_image(trunc); }, "truncated"));
  CHECK(throws_containing([&] { read_image(trunc); }, "offset 12"));

  std::string wide = tmp / "wide.pgm";
  { std::ofstream(wide, std::ios::binary) << "P5\n1 1\n65535\n"; }
  CHECK(throws_containing([&] { read_image(wide); }, "unsupported max value"));

  std::string noheader = tmp / "noheader.pgm";
  { std::ofstream(noheader, std::ios::binary) << "P5\nab\n"; }
  CHECK_THROWS_AS(read_image(noheader), std::runtime_error);

  CHECK_THROWS_AS(read_image(tmp / "missing.pgm"), std::runtime_error);
}

TEST_CASE("manifests resolve relative to their own directory") {
  TempDir tmp("davegan_data_manifest");
  Grid a = make_checkerboard(4, 2);
  Grid b = make_checkerboard(4, 1);
  write_image(a, tmp / "a.pgm");
  write_image(b, tmp / "b.pgm");
  std::string man = tmp / "set.txt";
  write_manifest(man, {"a.pgm", "b.pgm"});

  std::vector<std::string> paths = read_manifest(man);
  REQUIRE(paths.size() == 2);
  CHECK(identical(read_image(paths[0]), a));

  DataSet from_manifest = load_dataset(man);
  REQUIRE(from_manifest.samples.size() == 2);
  CHECK(from_manifest.size == 4);
  CHECK(identical(from_manifest.samples[1], b));

  DataSet from_dir = load_dataset(tmp.dir.string());
  REQUIRE(from_dir.samples.size() == 2);  // set.txt skipped, order is by name
  CHECK(identical(from_dir.samples[0], a));

  write_image(make_checkerboard(8, 2), tmp / "c.pgm");
  CHECK_THROWS_AS(load_dataset(tmp.dir.string()), std::runtime_error);
}
