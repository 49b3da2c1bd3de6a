#include "relief/viewprep.hpp"

#include <cmath>
#include <limits>
#include <queue>

#include "relief/error.hpp"

namespace relief {

namespace {

Mat3 rot_x(double t) {
  Mat3 r;
  r << 1, 0, 0, 0, std::cos(t), -std::sin(t), 0, std::sin(t), std::cos(t);
  return r;
}

Mat3 rot_y(double t) {
  Mat3 r;
  r << std::cos(t), 0, std::sin(t), 0, 1, 0, -std::sin(t), 0, std::cos(t);
  return r;
}

constexpr std::size_t kMaxGridCells = std::size_t{1} << 27;

}  // namespace

ViewFrame view_frame_for(const Vec3& view_direction) {
  if (!view_direction.allFinite() || !(view_direction.norm() > 0.0)) {
    throw Error(ErrorCode::ZeroDirection, "view direction must be non-zero");
  }
  const Vec3 v = view_direction.normalized();
  ViewFrame f;
  f.theta_x = std::atan2(v.y(), v.z());
  const double z_after_x = std::hypot(v.y(), v.z());
  f.theta_y = std::atan2(-v.x(), z_after_x);
  f.rotation = rot_y(f.theta_y) * rot_x(f.theta_x);
  return f;
}

std::pair<PointCloud, ViewFrame> align_view(const PointCloud& cloud, const Vec3& view_direction) {
  ViewFrame frame = view_frame_for(view_direction);
  std::vector<Vec3> pts(cloud.size());
  std::vector<Vec3> nrm(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    pts[i] = frame.rotation * cloud.points()[i];
    nrm[i] = frame.rotation * cloud.normals()[i];
  }
  return {PointCloud(std::move(pts), std::move(nrm)), frame};
}

std::pair<int, int> CellGrid::locate(const Vec2& p) const {
  const int ix = static_cast<int>(static_cast<std::int64_t>(std::floor(p.x() / cell)) - first_x);
  const int iy = static_cast<int>(static_cast<std::int64_t>(std::floor(p.y() / cell)) - first_y);
  return {ix, iy};
}

CellGrid CellGrid::covering(const std::vector<Vec2>& xy, double cell) {
  if (!(cell > 0.0)) throw Error(ErrorCode::InvalidArgument, "grid cell size must be positive");
  Eigen::AlignedBox2d box;
  for (const Vec2& p : xy) box.extend(p);
  CellGrid g;
  g.cell = cell;
  g.first_x = static_cast<std::int64_t>(std::floor(box.min().x() / cell));
  g.first_y = static_cast<std::int64_t>(std::floor(box.min().y() / cell));
  g.origin = cell * Vec2(static_cast<double>(g.first_x), static_cast<double>(g.first_y));
  const std::int64_t nx = static_cast<std::int64_t>(std::floor(box.max().x() / cell)) - g.first_x + 1;
  const std::int64_t ny = static_cast<std::int64_t>(std::floor(box.max().y() / cell)) - g.first_y + 1;
  if (nx <= 0 || ny <= 0 || static_cast<double>(nx) * static_cast<double>(ny) > kMaxGridCells) {
    throw Error(ErrorCode::InvalidArgument, "XY extent is too large for the sampling density");
  }
  g.nx = static_cast<int>(nx);
  g.ny = static_cast<int>(ny);
  return g;
}

VisibleSet detect_visible(const PointCloud& aligned, SamplingDensity rho) {
  if (!(rho.rho > 0.0)) throw Error(ErrorCode::InvalidArgument, "sampling density must be positive");
  const double cell = 2.0 * rho.rho;
  std::vector<Vec2> xy(aligned.size());
  for (std::size_t i = 0; i < aligned.size(); ++i) xy[i] = aligned.points()[i].head<2>();

  VisibleSet vis;
  vis.grid = CellGrid::covering(xy, cell);
  vis.cell_max_z.assign(vis.grid.cell_count(), -std::numeric_limits<double>::infinity());
  std::vector<std::pair<int, int>> cell_of(aligned.size());
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    cell_of[i] = vis.grid.locate(xy[i]);
    double& m = vis.cell_max_z[vis.grid.flat(cell_of[i].first, cell_of[i].second)];
    m = std::max(m, aligned.points()[i].z());
  }
  for (std::size_t i = 0; i < aligned.size(); ++i) {
    const double top = vis.cell_max_z[vis.grid.flat(cell_of[i].first, cell_of[i].second)];
    if (top - aligned.points()[i].z() < cell) {
      vis.indices.push_back(static_cast<std::uint32_t>(i));
      vis.cells.push_back(cell_of[i]);
      vis.xy.push_back(xy[i]);
    }
  }
  return vis;
}

std::size_t BoundaryInfo::boundary_count() const {
  std::size_t n = 0;
  for (auto f : is_boundary) n += f ? 1 : 0;
  return n;
}

BoundaryInfo detect_boundary(const VisibleSet& vis, SamplingDensity rho) {
  (void)rho;  // cell side already encodes 2 rho
  const CellGrid& g = vis.grid;
  const std::size_t n = vis.size();
  BoundaryInfo out;
  out.is_boundary.assign(n, 0);
  out.dist.assign(n, 0.0);
  if (n == 0) return out;

  std::vector<std::uint8_t> occupied(g.cell_count(), 0);
  for (const auto& [ix, iy] : vis.cells) occupied[g.flat(ix, iy)] = 1;

  const auto has_empty_neighbour = [&](int ix, int iy) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx == 0 && dy == 0) continue;
        const int jx = ix + dx, jy = iy + dy;
        if (!g.contains(jx, jy) || !occupied[g.flat(jx, jy)]) return true;
      }
    }
    return false;
  };
  for (std::size_t i = 0; i < n; ++i) {
    out.is_boundary[i] = has_empty_neighbour(vis.cells[i].first, vis.cells[i].second) ? 1 : 0;
  }

  // Multi-source propagation: every cell keeps the boundary point closest
  // to its centre found so far.
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();
  std::vector<std::uint32_t> source(g.cell_count(), kNone);
  std::vector<double> best(g.cell_count(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
  for (std::size_t i = 0; i < n; ++i) {
    if (!out.is_boundary[i]) continue;
    const auto [ix, iy] = vis.cells[i];
    const std::size_t c = g.flat(ix, iy);
    const double d = (g.centre(ix, iy) - vis.xy[i]).norm();
    if (d < best[c]) {
      best[c] = d;
      source[c] = static_cast<std::uint32_t>(i);
    }
  }
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    if (source[c] != kNone) heap.emplace(best[c], c);
  }
  while (!heap.empty()) {
    const auto [d, c] = heap.top();
    heap.pop();
    if (d > best[c]) continue;
    const int ix = static_cast<int>(c % g.nx);
    const int iy = static_cast<int>(c / g.nx);
    const Vec2& src = vis.xy[source[c]];
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int jx = ix + dx, jy = iy + dy;
        if ((dx == 0 && dy == 0) || !g.contains(jx, jy)) continue;
        const std::size_t nc = g.flat(jx, jy);
        const double nd = (g.centre(jx, jy) - src).norm();
        if (nd < best[nc]) {
          best[nc] = nd;
          source[nc] = source[c];
          heap.emplace(nd, nc);
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (out.is_boundary[i]) continue;
    const auto [ix, iy] = vis.cells[i];
    double d = std::numeric_limits<double>::infinity();
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int jx = ix + dx, jy = iy + dy;
        if (!g.contains(jx, jy)) continue;
        const std::uint32_t s = source[g.flat(jx, jy)];
        if (s != kNone) d = std::min(d, (vis.xy[s] - vis.xy[i]).norm());
      }
    }
    // Coincident XY with a boundary point still counts as interior.
    out.dist[i] = std::max(d, 1e-12 * g.cell);
  }
  return out;
}

}  // namespace relief
