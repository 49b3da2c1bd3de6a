#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "relief/cloud.hpp"

namespace relief {

/// Rotation R = R_y(theta_y) * R_x(theta_x) that maps the view direction
/// onto +Z. theta_x zeroes the direction's Y component, theta_y then
/// removes the remaining X component.
struct ViewFrame {
  double theta_x = 0.0;
  double theta_y = 0.0;
  Mat3 rotation = Mat3::Identity();
};

ViewFrame view_frame_for(const Vec3& view_direction);

/// Rotates positions and normals by the frame that maps `view_direction`
/// to +Z. Throws ZeroDirection for a zero (or non-finite) direction.
std::pair<PointCloud, ViewFrame> align_view(const PointCloud& cloud, const Vec3& view_direction);

/// Dense XY cell grid. Cells are aligned to integer multiples of `cell`
/// in absolute coordinates, so any subset of a point set lands in the
/// same cells; `first_x`/`first_y` index the grid's first column and row.
struct CellGrid {
  Vec2 origin = Vec2::Zero();
  std::int64_t first_x = 0;
  std::int64_t first_y = 0;
  double cell = 1.0;
  int nx = 0;
  int ny = 0;

  std::size_t cell_count() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  std::size_t flat(int ix, int iy) const { return static_cast<std::size_t>(iy) * nx + ix; }
  bool contains(int ix, int iy) const { return ix >= 0 && iy >= 0 && ix < nx && iy < ny; }
  Vec2 centre(int ix, int iy) const { return origin + cell * Vec2(ix + 0.5, iy + 0.5); }
  std::pair<int, int> locate(const Vec2& p) const;

  static CellGrid covering(const std::vector<Vec2>& xy, double cell);
};

/// Points that survive the per-cell depth test. `indices` is ascending
/// and indexes the aligned cloud; `cells` and `xy` run parallel to it.
struct VisibleSet {
  std::vector<std::uint32_t> indices;
  std::vector<std::pair<int, int>> cells;
  std::vector<Vec2> xy;
  CellGrid grid;
  /// Per-cell maximum z over all cloud points; -inf for empty cells.
  std::vector<double> cell_max_z;

  std::size_t size() const noexcept { return indices.size(); }
};

/// A point is visible iff (cell max z - z) < 2 rho in its 2 rho x 2 rho
/// XY cell. The cloud must already be view-aligned.
VisibleSet detect_visible(const PointCloud& aligned, SamplingDensity rho);

/// Boundary flags and XY distance to the nearest boundary point, both
/// parallel to VisibleSet::indices.
struct BoundaryInfo {
  std::vector<std::uint8_t> is_boundary;
  std::vector<double> dist;

  std::size_t boundary_count() const;
};

/// Boundary = visible points whose cell has an empty cell among its 8
/// neighbours. Distances come from a vector-propagation sweep over the
/// grid refined by exact distances to the candidate sources.
BoundaryInfo detect_boundary(const VisibleSet& vis, SamplingDensity rho);

}  // namespace relief
