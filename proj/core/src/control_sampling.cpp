#include "relief/control_sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "relief/error.hpp"
#include "relief/spatial.hpp"

namespace relief {

NeighborGraph build_neighbor_graph(std::span<const Vec2> xy, int k_max) {
  NeighborGraph g;
  const std::size_t n = xy.size();
  if (n < 2) return g;
  g.k = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(k_max), n - 1));

  Eigen::AlignedBox2d box;
  for (const Vec2& p : xy) box.extend(p);
  const double area = std::max(box.sizes().prod(), 1e-300);
  double cell = std::sqrt(area * g.k / static_cast<double>(n));
  if (!(cell > 0.0)) cell = std::max(box.sizes().maxCoeff() / std::sqrt(static_cast<double>(n)), 1e-12);
  GridIndex2 index(xy, cell);

  g.adjacency.resize(n * g.k);
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic, 512)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto nn = index.k_nearest(xy[i], g.k, static_cast<std::uint32_t>(i));
    std::copy(nn.begin(), nn.end(), g.adjacency.begin() + i * g.k);
  }
  return g;
}

std::vector<std::uint32_t> region_grow(const VisibleSet& vis, const BoundaryInfo& bnd, double r2) {
  const std::size_t n = vis.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto& ca = vis.cells[a];
    const auto& cb = vis.cells[b];
    return ca.second != cb.second ? ca.second < cb.second : ca.first < cb.first;
  });

  const double reach = r2 * (1.0 - 1e-3);
  const double reach2 = reach * reach;
  GridIndex2 index(vis.xy, std::max(r2, 1e-12));
  std::vector<std::uint8_t> state(n, 0);  // 0 free, 1 suppressed, 2 selected
  auto take = [&](std::uint32_t i) {
    state[i] = 2;
    index.for_each_in_radius(vis.xy[i], reach, [&](std::uint32_t j, double d2) {
      if (d2 < reach2 && state[j] == 0) state[j] = 1;
    });
  };
  for (std::uint32_t i : order) {
    if (bnd.is_boundary[i]) take(i);
  }
  for (std::uint32_t i : order) {
    if (state[i] == 0) take(i);
  }
  std::vector<std::uint32_t> selected;
  for (std::uint32_t i = 0; i < n; ++i) {
    if (state[i] == 2) selected.push_back(i);
  }
  return selected;
}

namespace {

void fill_controls(ControlSet& cs, const PointCloud& aligned, const VisibleSet& vis, const BoundaryInfo& bnd,
                   const CurvatureField& curv, std::vector<std::uint32_t> indices) {
  cs.indices = std::move(indices);
  const std::size_t m = cs.indices.size();
  cs.is_boundary.resize(m);
  cs.dist.resize(m);
  cs.k_norm.resize(m);
  cs.xy.resize(m);
  cs.z.resize(m);
  cs.normals.resize(m);
  for (std::size_t c = 0; c < m; ++c) {
    const std::uint32_t v = cs.indices[c];
    cs.is_boundary[c] = bnd.is_boundary[v];
    cs.dist[c] = bnd.dist[v];
    cs.k_norm[c] = curv.k_norm[v];
    cs.xy[c] = vis.xy[v];
    cs.z[c] = aligned.points()[vis.indices[v]].z();
    cs.normals[c] = aligned.normals()[vis.indices[v]];
  }
  cs.delta = population_stddev(cs.k_norm);
  cs.graph = build_neighbor_graph(cs.xy, 6);
}

}  // namespace

ControlSet all_visible_controls(const PointCloud& aligned, const VisibleSet& vis, const BoundaryInfo& bnd,
                                const CurvatureField& curv, SamplingDensity rho) {
  ControlSet cs;
  cs.r1 = cs.r2_rule = cs.r2 = rho.rho;
  std::vector<std::uint32_t> all(vis.size());
  std::iota(all.begin(), all.end(), 0u);
  fill_controls(cs, aligned, vis, bnd, curv, std::move(all));
  return cs;
}

ControlSet sample_controls(const PointCloud& aligned, const VisibleSet& vis, const BoundaryInfo& bnd,
                           const CurvatureField& curv, SamplingDensity rho, std::size_t target_count) {
  if (target_count < 100) throw Error(ErrorCode::TargetTooSmall, "control target must be at least 100");
  if (target_count > vis.size()) {
    throw Error(ErrorCode::TargetExceedsInput, "control target exceeds the visible point count");
  }
  if (curv.k_norm.size() != vis.size() || bnd.is_boundary.size() != vis.size()) {
    throw Error(ErrorCode::InvalidArgument, "curvature/boundary fields do not match the visible set");
  }

  ControlSet cs;
  cs.r1 = rho.rho;
  cs.r2_rule = std::sqrt(static_cast<double>(vis.size()) / static_cast<double>(target_count)) * rho.rho;

  const double target = static_cast<double>(target_count);
  // Boundary points are never suppressed, so they bound the count from below.
  const double floor_count = static_cast<double>(bnd.boundary_count());
  double r2 = cs.r2_rule;
  std::vector<std::uint32_t> best;
  double best_r2 = r2;
  double best_err = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < 8; ++iter) {
    auto sel = region_grow(vis, bnd, r2);
    const double count = static_cast<double>(sel.size());
    const double err = std::abs(count - target) / target;
    if (err < best_err) {
      best_err = err;
      best = std::move(sel);
      best_r2 = r2;
    }
    if (best_err <= 0.1) break;
    if (count > target && count <= floor_count * 1.01) break;
    // Count scales roughly with 1 / r2^2.
    r2 *= std::sqrt(std::max(count / target, 1e-3));
  }
  cs.r2 = best_r2;
  fill_controls(cs, aligned, vis, bnd, curv, std::move(best));
  return cs;
}

}  // namespace relief
