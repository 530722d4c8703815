#pragma once

#include <array>
#include <string>
#include <vector>

#include "xtrl/math.hpp"

namespace xtrl {

// Regular grid of terrain elevations. The grid covers
// [origin_x, origin_x + width] x [origin_y, origin_y + depth] with nx x ny
// nodes; spacing is width/(nx-1). Immutable after construction: generators
// return new fields.
class HeightField {
 public:
  HeightField() = default;
  HeightField(double width_m, double depth_m, int nx, int ny, double fill = 0.0,
              double origin_x = 0.0, double origin_y = 0.0);

  double width() const { return width_m_; }
  double depth() const { return depth_m_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double dx() const { return width_m_ / (nx_ - 1); }
  double dy() const { return depth_m_ / (ny_ - 1); }
  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }
  double max_x() const { return origin_x_ + width_m_; }
  double max_y() const { return origin_y_ + depth_m_; }

  double at(int ix, int iy) const { return heights_[iy * nx_ + ix]; }
  double& at(int ix, int iy) { return heights_[iy * nx_ + ix]; }
  const std::vector<double>& heights() const { return heights_; }
  std::vector<double>& heights() { return heights_; }

  double min_height() const;
  double max_height() const;

  bool contains(double x, double y) const {
    return x >= origin_x_ && x <= max_x() && y >= origin_y_ && y <= max_y();
  }

  // Piecewise planar interpolation. Every cell is split along the fixed
  // diagonal from its lower-left to its upper-right node. Throws RangeError
  // outside the field.
  double sample_height(double x, double y) const;
  double sample_height(double x, double y, Vec3* normal) const;

  // As sample_height but clamps the query point onto the field boundary, so
  // out-of-terrain queries take the nearest edge height.
  double sample_height_clamped(double x, double y) const;

  // Field translated so its center sits at (0, 0).
  HeightField recentered() const;

 private:
  double width_m_ = 0.0, depth_m_ = 0.0;
  int nx_ = 0, ny_ = 0;
  double origin_x_ = 0.0, origin_y_ = 0.0;
  std::vector<double> heights_;
};

// Vehicle-centric height patch: kLon x kLat samples over a
// kLengthM x kWidthM footprint that follows translation and heading only.
struct LocalMap {
  static constexpr int kLon = 30;           // samples along the vehicle x axis
  static constexpr int kLat = 20;           // samples along the vehicle y axis
  static constexpr double kLengthM = 15.0;  // longitudinal extent
  static constexpr double kWidthM = 10.0;   // lateral extent
  static constexpr double kAheadM = 10.0;   // extent in front of the reference frame
  static constexpr double kHeightScale = 5.0;  // +-5 m maps to [0, 1]

  std::array<double, kLon * kLat> values{};  // row-major, longitudinal major
  double origin_x = 0.0, origin_y = 0.0, heading = 0.0;

  double at(int i_lon, int i_lat) const { return values[i_lon * kLat + i_lat]; }
};

struct Rect {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
};

struct PerlinParams {
  double amplitude_m = 0.5;   // amplitude of the base octave
  double frequency = 0.05;    // 1/m, base octave
  int octaves = 4;
  double persistence = 0.5;
  double lacunarity = 2.0;
  double size_m = 70.0;
  int resolution = 700;
};

// Procedural terrain from seeded gradient noise. Deterministic per seed; the
// result is rescaled (not truncated) whenever max-min would exceed 5 m.
HeightField generate_perlin(uint64_t seed, const PerlinParams& params);

// n semi-ellipsoid bumps composed with the base field by pointwise max.
// Horizontal full extents are uniform in size_range, apex heights uniform in
// height_range, centers uniform in region. Each bump sits on the base terrain
// height under its center.
HeightField add_ellipsoids(const HeightField& hf, int n, uint64_t rng_seed, const Rect& region,
                           double size_min = 0.5, double size_max = 3.5, double height_min = 0.25,
                           double height_max = 1.75,
                           std::vector<Vec3>* apexes_out = nullptr);

// Planar terrain, gradient tan(angle) along +x, zero height at the center.
HeightField make_slope(double angle_deg, double size_m, int resolution);

// height * exp(-(x^2+y^2)/(2 sigma^2)) centered in the field.
HeightField gaussian_bump(double height_m, double sigma_m, double size_m, int resolution);

// ESRI ASCII grid loader. NODATA cells are filled with the nearest valid
// neighbour. Throws ParseError with the offending line number.
HeightField load_dem(const std::string& path);

// Samples the local patch. reference_height is the terrain height under the
// reference frame; cells are clamp((h - reference_height + H) / (2H), 0, 1).
LocalMap local_height_map(const HeightField& hf, double x, double y, double heading,
                          double reference_height);

}  // namespace xtrl
