#include "xtrl/heightfield.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

#include "xtrl/errors.hpp"
#include "xtrl/rng.hpp"

namespace xtrl {

HeightField::HeightField(double width_m, double depth_m, int nx, int ny, double fill,
                         double origin_x, double origin_y)
    : width_m_(width_m), depth_m_(depth_m), nx_(nx), ny_(ny), origin_x_(origin_x),
      origin_y_(origin_y), heights_(static_cast<size_t>(nx) * ny, fill) {
  if (nx < 2 || ny < 2) throw ConfigError("height field resolution must be at least 2x2");
  if (width_m <= 0.0 || depth_m <= 0.0) throw ConfigError("height field size must be positive");
}

double HeightField::min_height() const {
  return *std::min_element(heights_.begin(), heights_.end());
}

double HeightField::max_height() const {
  return *std::max_element(heights_.begin(), heights_.end());
}

double HeightField::sample_height(double x, double y) const {
  return sample_height(x, y, nullptr);
}

double HeightField::sample_height(double x, double y, Vec3* normal) const {
  if (!contains(x, y))
    throw RangeError("terrain query (" + std::to_string(x) + ", " + std::to_string(y) +
                     ") outside field bounds");
  double fx = (x - origin_x_) / dx();
  double fy = (y - origin_y_) / dy();
  int ix = std::min(static_cast<int>(fx), nx_ - 2);
  int iy = std::min(static_cast<int>(fy), ny_ - 2);
  double u = fx - ix;
  double v = fy - iy;

  double z00 = at(ix, iy);
  double z10 = at(ix + 1, iy);
  double z01 = at(ix, iy + 1);
  double z11 = at(ix + 1, iy + 1);

  // Diagonal runs from (ix, iy) to (ix+1, iy+1). u > v picks the lower-right
  // triangle, otherwise the upper-left one. On the diagonal both agree.
  double h;
  Vec3 e1, e2;
  if (u > v) {
    h = (1.0 - u) * z00 + (u - v) * z10 + v * z11;
    e1 = Vec3{dx(), 0.0, z10 - z00};
    e2 = Vec3{dx(), dy(), z11 - z00};
  } else {
    h = (1.0 - v) * z00 + u * z11 + (v - u) * z01;
    e1 = Vec3{dx(), dy(), z11 - z00};
    e2 = Vec3{0.0, dy(), z01 - z00};
  }
  if (normal) {
    Vec3 n = e1.cross(e2);
    if (n.z < 0.0) n = -n;
    *normal = n.normalized();
  }
  return h;
}

double HeightField::sample_height_clamped(double x, double y) const {
  double cx = std::clamp(x, origin_x_, max_x());
  double cy = std::clamp(y, origin_y_, max_y());
  return sample_height(cx, cy);
}

HeightField HeightField::recentered() const {
  HeightField out = *this;
  out.origin_x_ = -width_m_ / 2.0;
  out.origin_y_ = -depth_m_ / 2.0;
  return out;
}

namespace {

// Classic 2D gradient noise with a seeded permutation table.
class PerlinNoise {
 public:
  explicit PerlinNoise(uint64_t seed) {
    for (int i = 0; i < 256; ++i) perm_[i] = i;
    Rng rng(seed);
    for (int i = 255; i > 0; --i) {
      int j = static_cast<int>(rng.uniform_index(static_cast<uint64_t>(i) + 1));
      std::swap(perm_[i], perm_[j]);
    }
    for (int i = 0; i < 256; ++i) perm_[256 + i] = perm_[i];
  }

  double noise(double x, double y) const {
    int xi = static_cast<int>(std::floor(x)) & 255;
    int yi = static_cast<int>(std::floor(y)) & 255;
    double xf = x - std::floor(x);
    double yf = y - std::floor(y);
    double u = fade(xf);
    double v = fade(yf);

    double n00 = grad(perm_[perm_[xi] + yi], xf, yf);
    double n10 = grad(perm_[perm_[xi + 1] + yi], xf - 1, yf);
    double n01 = grad(perm_[perm_[xi] + yi + 1], xf, yf - 1);
    double n11 = grad(perm_[perm_[xi + 1] + yi + 1], xf - 1, yf - 1);

    double nx0 = lerp(n00, n10, u);
    double nx1 = lerp(n01, n11, u);
    return lerp(nx0, nx1, v);  // in [-1, 1] roughly
  }

 private:
  static double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }
  static double lerp(double a, double b, double t) { return a + t * (b - a); }
  static double grad(int hash, double x, double y) {
    switch (hash & 7) {
      case 0: return x + y;
      case 1: return x - y;
      case 2: return -x + y;
      case 3: return -x - y;
      case 4: return x;
      case 5: return -x;
      case 6: return y;
      default: return -y;
    }
  }
  int perm_[512];
};

constexpr double kMaxProceduralRange = 5.0;  // m, max-min cap for generated fields

}  // namespace

HeightField generate_perlin(uint64_t seed, const PerlinParams& p) {
  if (p.resolution < 2) throw ConfigError("perlin: resolution must be >= 2");
  if (p.size_m <= 0.0) throw ConfigError("perlin: size must be positive");
  if (p.amplitude_m < 0.0) throw ConfigError("perlin: amplitude must be non-negative");
  if (p.octaves < 1) throw ConfigError("perlin: octaves must be >= 1");

  HeightField hf(p.size_m, p.size_m, p.resolution, p.resolution, 0.0, -p.size_m / 2.0,
                 -p.size_m / 2.0);
  if (p.amplitude_m == 0.0) return hf;

  PerlinNoise noise(seed);
  for (int iy = 0; iy < hf.ny(); ++iy) {
    double y = hf.origin_y() + iy * hf.dy();
    for (int ix = 0; ix < hf.nx(); ++ix) {
      double x = hf.origin_x() + ix * hf.dx();
      double amp = p.amplitude_m;
      double freq = p.frequency;
      double h = 0.0;
      for (int o = 0; o < p.octaves; ++o) {
        // Offset octaves so their lattice corners do not coincide.
        h += amp * noise.noise(x * freq + 31.7 * o, y * freq + 17.3 * o);
        amp *= p.persistence;
        freq *= p.lacunarity;
      }
      hf.at(ix, iy) = h;
    }
  }

  double range = hf.max_height() - hf.min_height();
  if (range > kMaxProceduralRange) {
    double scale = kMaxProceduralRange / range;
    for (auto& h : hf.heights()) h *= scale;
  }
  return hf;
}

HeightField add_ellipsoids(const HeightField& hf, int n, uint64_t rng_seed, const Rect& region,
                           double size_min, double size_max, double height_min, double height_max,
                           std::vector<Vec3>* apexes_out) {
  if (n < 0) throw ConfigError("add_ellipsoids: n must be non-negative");
  if (!hf.contains(region.x_min, region.y_min) || !hf.contains(region.x_max, region.y_max))
    throw ConfigError("add_ellipsoids: region outside field bounds");

  HeightField out = hf;
  Rng rng(rng_seed);
  for (int k = 0; k < n; ++k) {
    double cx = rng.uniform(region.x_min, region.x_max);
    double cy = rng.uniform(region.y_min, region.y_max);
    double a = rng.uniform(size_min, size_max) / 2.0;  // semi-axes from full extents
    double b = rng.uniform(size_min, size_max) / 2.0;
    double c = rng.uniform(height_min, height_max);
    double base = hf.sample_height_clamped(cx, cy);
    if (apexes_out) apexes_out->push_back({cx, cy, base + c});

    int ix0 = std::max(0, static_cast<int>((cx - a - hf.origin_x()) / hf.dx()));
    int ix1 = std::min(hf.nx() - 1, static_cast<int>((cx + a - hf.origin_x()) / hf.dx()) + 1);
    int iy0 = std::max(0, static_cast<int>((cy - b - hf.origin_y()) / hf.dy()));
    int iy1 = std::min(hf.ny() - 1, static_cast<int>((cy + b - hf.origin_y()) / hf.dy()) + 1);
    for (int iy = iy0; iy <= iy1; ++iy) {
      double y = hf.origin_y() + iy * hf.dy();
      for (int ix = ix0; ix <= ix1; ++ix) {
        double x = hf.origin_x() + ix * hf.dx();
        double q = 1.0 - ((x - cx) * (x - cx)) / (a * a) - ((y - cy) * (y - cy)) / (b * b);
        if (q <= 0.0) continue;
        double z = base + c * std::sqrt(q);
        out.at(ix, iy) = std::max(out.at(ix, iy), z);
      }
    }
  }
  return out;
}

HeightField make_slope(double angle_deg, double size_m, int resolution) {
  if (angle_deg < 0.0 || angle_deg >= 90.0) throw ConfigError("make_slope: angle must be in [0, 90)");
  HeightField hf(size_m, size_m, resolution, resolution, 0.0, -size_m / 2.0, -size_m / 2.0);
  double g = std::tan(deg2rad(angle_deg));
  for (int iy = 0; iy < hf.ny(); ++iy)
    for (int ix = 0; ix < hf.nx(); ++ix)
      hf.at(ix, iy) = g * (hf.origin_x() + ix * hf.dx());
  return hf;
}

HeightField gaussian_bump(double height_m, double sigma_m, double size_m, int resolution) {
  if (height_m < 0.0) throw ConfigError("gaussian_bump: height must be non-negative");
  HeightField hf(size_m, size_m, resolution, resolution, 0.0, -size_m / 2.0, -size_m / 2.0);
  if (height_m == 0.0) return hf;
  for (int iy = 0; iy < hf.ny(); ++iy) {
    double y = hf.origin_y() + iy * hf.dy();
    for (int ix = 0; ix < hf.nx(); ++ix) {
      double x = hf.origin_x() + ix * hf.dx();
      hf.at(ix, iy) = height_m * std::exp(-(x * x + y * y) / (2.0 * sigma_m * sigma_m));
    }
  }
  return hf;
}

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

// Multi-source BFS fill: every NODATA cell takes the height of its nearest
// valid neighbour (4-connected distance, deterministic scan order).
void fill_nodata(std::vector<double>& h, std::vector<char>& valid, int nx, int ny) {
  std::deque<std::pair<int, int>> queue;
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      if (valid[iy * nx + ix]) queue.emplace_back(ix, iy);
  if (queue.empty()) throw ParseError("DEM contains no valid cells");
  const int dx4[4] = {1, -1, 0, 0};
  const int dy4[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    auto [ix, iy] = queue.front();
    queue.pop_front();
    for (int d = 0; d < 4; ++d) {
      int jx = ix + dx4[d], jy = iy + dy4[d];
      if (jx < 0 || jx >= nx || jy < 0 || jy >= ny) continue;
      if (valid[jy * nx + jx]) continue;
      h[jy * nx + jx] = h[iy * nx + ix];
      valid[jy * nx + jx] = 1;
      queue.emplace_back(jx, jy);
    }
  }
}

}  // namespace

HeightField load_dem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open DEM file: " + path);

  long ncols = -1, nrows = -1;
  double xll = 0.0, yll = 0.0, cellsize = -1.0, nodata = -9999.0;
  bool has_nodata = false;

  int line_no = 0;
  std::string line;
  // Header: key value pairs until the first line starting with a number.
  std::streampos data_start = in.tellg();
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) { data_start = in.tellg(); continue; }
    std::string lk = lower(key);
    if (lk == "ncols" || lk == "nrows" || lk == "xllcorner" || lk == "yllcorner" ||
        lk == "xllcenter" || lk == "yllcenter" || lk == "cellsize" || lk == "nodata_value") {
      double value;
      if (!(ls >> value)) throw ParseError("malformed DEM header entry '" + key + "'", line_no);
      if (lk == "ncols") ncols = static_cast<long>(value);
      else if (lk == "nrows") nrows = static_cast<long>(value);
      else if (lk == "xllcorner" || lk == "xllcenter") xll = value;
      else if (lk == "yllcorner" || lk == "yllcenter") yll = value;
      else if (lk == "cellsize") cellsize = value;
      else { nodata = value; has_nodata = true; }
      data_start = in.tellg();
    } else {
      break;  // first data row
    }
  }
  if (ncols < 2 || nrows < 2) throw ParseError("DEM header missing or invalid ncols/nrows", line_no);
  if (cellsize <= 0.0) throw ParseError("DEM header missing or invalid cellsize", line_no);

  in.clear();
  in.seekg(data_start);
  line_no -= 1;  // re-read from the first data row

  const int nx = static_cast<int>(ncols);
  const int ny = static_cast<int>(nrows);
  std::vector<double> h(static_cast<size_t>(nx) * ny, 0.0);
  std::vector<char> valid(static_cast<size_t>(nx) * ny, 0);

  // Rows arrive north first; our iy axis grows toward +y (north).
  for (int row = 0; row < ny; ++row) {
    if (!std::getline(in, line)) throw ParseError("DEM truncated: expected " +
                                                  std::to_string(ny) + " data rows", line_no + 1);
    ++line_no;
    std::istringstream ls(line);
    int iy = ny - 1 - row;
    for (int ix = 0; ix < nx; ++ix) {
      double value;
      if (!(ls >> value)) {
        std::string token;
        std::istringstream rs(line);
        for (int k = 0; k <= ix && (rs >> token); ++k) {}
        throw ParseError("DEM row has " + std::to_string(ix) + " values, expected " +
                         std::to_string(nx), line_no);
      }
      bool is_nodata = has_nodata && value == nodata;
      h[static_cast<size_t>(iy) * nx + ix] = is_nodata ? 0.0 : value;
      valid[static_cast<size_t>(iy) * nx + ix] = is_nodata ? 0 : 1;
    }
    double extra;
    if (ls >> extra)
      throw ParseError("DEM row has more than " + std::to_string(nx) + " values", line_no);
  }

  bool any_hole = false;
  for (char v : valid)
    if (!v) { any_hole = true; break; }
  if (any_hole) fill_nodata(h, valid, nx, ny);

  HeightField hf((nx - 1) * cellsize, (ny - 1) * cellsize, nx, ny, 0.0, xll, yll);
  hf.heights() = std::move(h);
  return hf;
}

LocalMap local_height_map(const HeightField& hf, double x, double y, double heading,
                          double reference_height) {
  LocalMap map;
  map.origin_x = x;
  map.origin_y = y;
  map.heading = heading;

  const double cell = LocalMap::kLengthM / LocalMap::kLon;  // 0.5 m, same laterally
  const double behind = LocalMap::kLengthM - LocalMap::kAheadM;
  double ch = std::cos(heading), sh = std::sin(heading);
  for (int i = 0; i < LocalMap::kLon; ++i) {
    double u = -behind + (i + 0.5) * cell;  // cell centers, -5..+10 m
    for (int j = 0; j < LocalMap::kLat; ++j) {
      double v = -LocalMap::kWidthM / 2.0 + (j + 0.5) * cell;
      double wx = x + ch * u - sh * v;
      double wy = y + sh * u + ch * v;
      double h = hf.sample_height_clamped(wx, wy);
      double scaled = (h - reference_height + LocalMap::kHeightScale) /
                      (2.0 * LocalMap::kHeightScale);
      map.values[i * LocalMap::kLat + j] = std::clamp(scaled, 0.0, 1.0);
    }
  }
  return map;
}

}  // namespace xtrl
