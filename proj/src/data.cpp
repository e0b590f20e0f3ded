#include "davegan/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace fs = std::filesystem;

namespace davegan {

namespace {

constexpr double kMinAreaFraction = 0.012;
constexpr double kMaxAreaFraction = 0.19;
constexpr double kMaxAxisRatio = 4.0;

// Half-extents of the axis-aligned bounding box of the rotated ellipse.
void bounding_half_extents(const EllipseParams& p, double& ex, double& ey) {
  double c = std::cos(p.phi), s = std::sin(p.phi);
  ex = std::sqrt(p.a * p.a * c * c + p.b * p.b * s * s);
  ey = std::sqrt(p.a * p.a * s * s + p.b * p.b * c * c);
}

}  // namespace

void validate_ellipse(const EllipseParams& p, int size) {
  if (size < 1) throw std::invalid_argument("validate_ellipse: size must be positive");
  if (!(p.b > 0.0) || !(p.a >= p.b))
    throw std::invalid_argument("validate_ellipse: semi-axes must satisfy a >= b > 0");
  if (p.a > kMaxAxisRatio * p.b)
    throw std::invalid_argument("validate_ellipse: aspect ratio a/b exceeds 4");
  double frac = std::numbers::pi * p.a * p.b / (static_cast<double>(size) * size);
  if (frac <= kMinAreaFraction || frac >= kMaxAreaFraction)
    throw std::invalid_argument("validate_ellipse: area fraction " + std::to_string(frac) +
                                " outside (0.012, 0.19)");
  double ex, ey;
  bounding_half_extents(p, ex, ey);
  if (p.x1 - ex < 0.0 || p.x1 + ex > size || p.x2 - ey < 0.0 || p.x2 + ey > size)
    throw std::invalid_argument("validate_ellipse: ellipse extends outside the image");
}

Grid rasterize_ellipse(const EllipseParams& p, int size) {
  validate_ellipse(p, size);
  double c = std::cos(p.phi), s = std::sin(p.phi);
  Grid g(size, size);
  for (int i = 0; i < size; ++i) {
    double dy = (i + 0.5) - p.x2;
    for (int j = 0; j < size; ++j) {
      double dx = (j + 0.5) - p.x1;
      // rotate the pixel center by -phi into the ellipse frame
      double rx = c * dx + s * dy;
      double ry = -s * dx + c * dy;
      double q = (rx / p.a) * (rx / p.a) + (ry / p.b) * (ry / p.b);
      g.at(i, j) = q <= 1.0 ? 1.0 : 0.0;
    }
  }
  return g;
}

DataSet sample_ellipse_dataset(int n, int size, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_ellipse_dataset: n must be >= 1");
  if (size < 1) throw std::invalid_argument("sample_ellipse_dataset: size must be positive");
  constexpr int kMaxAttempts = 100000;
  std::uint64_t base = rng.next_u64();
  DataSet set;
  set.size = size;
  set.samples.reserve(n);
  double half = size / 2.0;
  for (int k = 0; k < n; ++k) {
    Rng child = Rng::derive(base, static_cast<std::uint64_t>(k));
    EllipseParams p;
    bool ok = false;
    for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
      p.a = child.uniform(2.0, half);
      p.b = child.uniform(2.0, half);
      p.phi = child.uniform(0.0, std::numbers::pi);
      if (p.b > p.a || p.a > kMaxAxisRatio * p.b) continue;
      double frac = std::numbers::pi * p.a * p.b / (static_cast<double>(size) * size);
      if (frac <= kMinAreaFraction || frac >= kMaxAreaFraction) continue;
      double ex, ey;
      bounding_half_extents(p, ex, ey);
      if (2.0 * ex > size || 2.0 * ey > size) continue;
      p.x1 = child.uniform(ex, size - ex);
      p.x2 = child.uniform(ey, size - ey);
      ok = true;
    }
    if (!ok)
      throw std::runtime_error("sample_ellipse_dataset: no admissible ellipse for size " +
                               std::to_string(size) + " after " + std::to_string(kMaxAttempts) +
                               " attempts");
    set.samples.push_back(rasterize_ellipse(p, size));
  }
  return set;
}

DataSet tile_micrograph(const Grid& image, int tile) {
  if (tile < 1) throw std::invalid_argument("tile_micrograph: tile must be positive");
  if (image.h % tile != 0 || image.w % tile != 0)
    throw std::invalid_argument("tile_micrograph: image " + std::to_string(image.h) + "x" +
                                std::to_string(image.w) + " not divisible by tile " +
                                std::to_string(tile));
  DataSet set;
  set.size = tile;
  int rows = image.h / tile, cols = image.w / tile;
  set.samples.reserve(static_cast<std::size_t>(rows) * cols);
  for (int ti = 0; ti < rows; ++ti)
    for (int tj = 0; tj < cols; ++tj) {
      Grid t(tile, tile);
      for (int i = 0; i < tile; ++i)
        for (int j = 0; j < tile; ++j) t.at(i, j) = image.at(ti * tile + i, tj * tile + j);
      set.samples.push_back(std::move(t));
    }
  return set;
}

Grid reassemble_tiles(const std::vector<Grid>& tiles, int rows, int cols) {
  if (rows < 1 || cols < 1 || tiles.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("reassemble_tiles: need rows*cols tiles");
  int t = tiles.front().h;
  for (const Grid& g : tiles)
    if (g.h != t || g.w != t) throw std::invalid_argument("reassemble_tiles: unequal tile sizes");
  Grid out(rows * t, cols * t);
  for (int ti = 0; ti < rows; ++ti)
    for (int tj = 0; tj < cols; ++tj) {
      const Grid& g = tiles[static_cast<std::size_t>(ti) * cols + tj];
      for (int i = 0; i < t; ++i)
        for (int j = 0; j < t; ++j) out.at(ti * t + i, tj * t + j) = g.at(i, j);
    }
  return out;
}

Grid make_checkerboard(int size, int cell) {
  if (cell < 1 || size < 1 || size % cell != 0)
    throw std::invalid_argument("make_checkerboard: cell must divide size");
  Grid g(size, size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j) g.at(i, j) = ((i / cell + j / cell) % 2 == 0) ? 1.0 : 0.0;
  return g;
}

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t offset, const std::string& what) {
  throw std::runtime_error("read_image: " + what + " at byte offset " + std::to_string(offset) +
                           " in '" + path + "'");
}

// Whitespace and '#'-to-end-of-line comments between header tokens.
void skip_separators(const std::string& buf, std::size_t& pos) {
  while (pos < buf.size()) {
    char c = buf[pos];
    if (c == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
}

int parse_header_int(const std::string& buf, std::size_t& pos, const std::string& path,
                     const std::string& field) {
  skip_separators(buf, pos);
  std::size_t start = pos;
  long value = 0;
  while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
    value = value * 10 + (buf[pos] - '0');
    if (value > 1000000000L) parse_fail(path, start, field + " out of range");
    ++pos;
  }
  if (pos == start) parse_fail(path, pos, "expected " + field);
  return static_cast<int>(value);
}

}  // namespace

Grid read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_image: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string buf = ss.str();

  if (buf.size() < 2 || buf[0] != 'P' || buf[1] != '5')
    parse_fail(path, 0, "not a binary graymap (magic \"P5\")");
  std::size_t pos = 2;
  int w = parse_header_int(buf, pos, path, "width");
  int h = parse_header_int(buf, pos, path, "height");
  int maxval = parse_header_int(buf, pos, path, "max value");
  if (w < 1 || h < 1) parse_fail(path, pos, "non-positive dimensions");
  if (maxval < 1) parse_fail(path, pos, "non-positive max value");
  if (maxval > 255) parse_fail(path, pos, "unsupported max value " + std::to_string(maxval));
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos])))
    parse_fail(path, pos, "expected single whitespace before pixel data");
  ++pos;

  std::size_t need = static_cast<std::size_t>(w) * h;
  if (buf.size() - pos < need)
    parse_fail(path, buf.size(), "truncated pixel data, expected " + std::to_string(need) +
                                     " bytes from offset " + std::to_string(pos));
  Grid g(h, w);
  for (std::size_t k = 0; k < need; ++k)
    g.v[k] = static_cast<unsigned char>(buf[pos + k]) / static_cast<double>(maxval);
  return g;
}

void write_image(const Grid& g, const std::string& path) {
  if (g.h < 1 || g.w < 1) throw std::invalid_argument("write_image: empty raster");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("write_image: cannot open '" + path + "'");
  out << "P5\n" << g.w << " " << g.h << "\n255\n";
  std::string bytes(g.size(), '\0');
  for (std::size_t k = 0; k < g.size(); ++k) {
    double v = std::clamp(g.v[k], 0.0, 1.0);
    bytes[k] = static_cast<char>(static_cast<unsigned char>(std::floor(v * 255.0 + 0.5)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write_image: write failed for '" + path + "'");
}

std::vector<std::string> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_manifest: cannot open '" + path + "'");
  fs::path dir = fs::path(path).parent_path();
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    out.push_back((dir / line).string());
  }
  return out;
}

void write_manifest(const std::string& path, const std::vector<std::string>& relative_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_manifest: cannot open '" + path + "'");
  for (const std::string& name : relative_names) out << name << "\n";
  if (!out) throw std::runtime_error("write_manifest: write failed for '" + path + "'");
}

DataSet load_dataset(const std::string& path) {
  std::vector<std::string> files;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".pgm")
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
  } else {
    files = read_manifest(path);
  }
  if (files.empty()) throw std::runtime_error("load_dataset: no images under '" + path + "'");
  DataSet set;
  for (const std::string& f : files) {
    Grid g = read_image(f);
    if (g.h != g.w)
      throw std::runtime_error("load_dataset: '" + f + "' is not square (" + std::to_string(g.h) +
                               "x" + std::to_string(g.w) + ")");
    if (set.samples.empty())
      set.size = g.h;
    else if (g.h != set.size)
      throw std::runtime_error("load_dataset: '" + f + "' size " + std::to_string(g.h) +
                               " differs from first image size " + std::to_string(set.size));
    set.samples.push_back(std::move(g));
  }
  return set;
}

}  // namespace davegan
