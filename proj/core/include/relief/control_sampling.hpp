#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relief/cloud.hpp"
#include "relief/curvature.hpp"
#include "relief/viewprep.hpp"

namespace relief {

/// Directed k-nearest-neighbour graph in XY, k entries per node.
struct NeighborGraph {
  int k = 0;
  std::vector<std::uint32_t> adjacency;

  std::size_t node_count() const noexcept { return k > 0 ? adjacency.size() / k : 0; }
  std::span<const std::uint32_t> of(std::size_t i) const {
    return {adjacency.data() + i * k, static_cast<std::size_t>(k)};
  }
};

/// k = min(k_max, n - 1) nearest neighbours of each site, ties broken by
/// index. Self is never a neighbour.
NeighborGraph build_neighbor_graph(std::span<const Vec2> xy, int k_max = 6);

struct ControlSet {
  /// Indices into the VisibleSet, ascending.
  std::vector<std::uint32_t> indices;
  NeighborGraph graph;
  std::vector<std::uint8_t> is_boundary;
  std::vector<double> dist;
  std::vector<double> k_norm;
  std::vector<Vec2> xy;
  std::vector<double> z;
  std::vector<Vec3> normals;
  double delta = 0.0;
  /// Suppression radius from the area rule sqrt(n1/n2) * r1, and the
  /// radius actually used after count calibration.
  double r1 = 0.0;
  double r2_rule = 0.0;
  double r2 = 0.0;

  std::size_t size() const noexcept { return indices.size(); }
};

/// Greedy region growing over the visible points in raster cell order.
/// Boundary points are taken first and never suppressed; every other
/// selected point suppresses unselected points closer than r2 in XY.
std::vector<std::uint32_t> region_grow(const VisibleSet& vis, const BoundaryInfo& bnd, double r2);

/// Selects about `target_count` controls and builds their 6-NN graph.
/// r2 starts at the area rule and is rescaled until the count lands
/// within 10% of the target (or the iteration budget runs out).
ControlSet sample_controls(const PointCloud& aligned, const VisibleSet& vis, const BoundaryInfo& bnd,
                           const CurvatureField& curv, SamplingDensity rho, std::size_t target_count);

/// Every visible point as a control, for inputs at or below the target.
ControlSet all_visible_controls(const PointCloud& aligned, const VisibleSet& vis, const BoundaryInfo& bnd,
                                const CurvatureField& curv, SamplingDensity rho);

}  // namespace relief
