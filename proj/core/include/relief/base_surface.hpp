#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "relief/cloud.hpp"

namespace relief {

/// Regular grid of base heights sampled at origin + (i, j) * cell.
struct HeightGrid {
  Vec2 origin = Vec2::Zero();
  double cell = 1.0;
  int nx = 0;
  int ny = 0;
  std::vector<double> z;  // row-major, z[j * nx + i]
};

/// Carrier surface z_b(x, y) the relief rests on, in view-aligned XY.
class BaseSurface {
 public:
  enum class Kind { Plane, FoldedPlane, Wave, Heightfield };

  BaseSurface() = default;

  static BaseSurface plane(double z0 = 0.0);
  /// z = s1 (x - x0) for x < x0, s2 (x - x0) otherwise.
  static BaseSurface folded(double x0, double s1, double s2);
  /// z = amp * sin(freq * x) (axis 'x') or amp * sin(freq * y) (axis 'y').
  static BaseSurface wave(double amp, double freq, char axis);
  /// Bilinear interpolation, clamped to the grid outside its extent.
  static BaseSurface heightfield(HeightGrid grid);

  /// Parses "plane[:z0]", "fold:x0,s1,s2" or "wave:amp,freq,axis".
  static BaseSurface parse(std::string_view text);
  /// Inverse of parse for the parametric kinds.
  std::string to_string() const;

  Kind kind() const noexcept { return kind_; }
  double operator()(double x, double y) const;
  double operator()(const Vec2& p) const { return (*this)(p.x(), p.y()); }

  bool operator==(const BaseSurface& other) const;

 private:
  Kind kind_ = Kind::Plane;
  double a_ = 0.0;  // z0 | x0 | amp
  double b_ = 0.0;  // s1 | freq
  double c_ = 0.0;  // s2
  char axis_ = 'x';
  std::shared_ptr<const HeightGrid> grid_;
};

}  // namespace relief
