#include "relief/triangulation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "relief/error.hpp"
#include "relief/predicates.hpp"

namespace relief {

namespace {

constexpr std::uint32_t kGhost = std::numeric_limits<std::uint32_t>::max();
constexpr std::uint32_t kNoTri = std::numeric_limits<std::uint32_t>::max();

std::uint64_t hilbert_index(std::uint32_t x, std::uint32_t y, int order) {
  std::uint64_t d = 0;
  for (std::uint32_t s = 1u << (order - 1); s > 0; s >>= 1) {
    const std::uint32_t rx = (x & s) ? 1 : 0;
    const std::uint32_t ry = (y & s) ? 1 : 0;
    d += static_cast<std::uint64_t>(s) * s * ((3 * rx) ^ ry);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - x;
        y = s - 1 - y;
      }
      std::swap(x, y);
    }
  }
  return d;
}

std::vector<std::uint32_t> hilbert_order(std::span<const Vec2> xy) {
  Eigen::AlignedBox2d box;
  for (const Vec2& p : xy) box.extend(p);
  const Vec2 ext = box.sizes().cwiseMax(1e-300);
  constexpr int kOrder = 16;
  constexpr double kMax = (1 << kOrder) - 1;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> keys(xy.size());
  for (std::size_t i = 0; i < xy.size(); ++i) {
    const auto qx = static_cast<std::uint32_t>((xy[i].x() - box.min().x()) / ext.x() * kMax);
    const auto qy = static_cast<std::uint32_t>((xy[i].y() - box.min().y()) / ext.y() * kMax);
    keys[i] = {hilbert_index(qx, qy, kOrder), static_cast<std::uint32_t>(i)};
  }
  std::sort(keys.begin(), keys.end());
  std::vector<std::uint32_t> order(xy.size());
  for (std::size_t i = 0; i < keys.size(); ++i) order[i] = keys[i].second;
  return order;
}

// Incremental Bowyer-Watson over a triangulation closed by ghost
// triangles: every hull edge a -> b of a real triangle faces a ghost
// (b, a, G), so the whole plane is covered and outside insertions need
// no special casing.
class Delaunay {
 public:
  explicit Delaunay(std::span<const Vec2> xy) : p_(xy) {}

  std::vector<Triangle> run();

 private:
  struct Tri {
    std::array<std::uint32_t, 3> v;
    std::array<std::uint32_t, 3> n;  // n[i] lies across the edge opposite v[i]
    bool alive;
  };

  bool is_ghost(std::uint32_t t) const { return tris_[t].v[2] == kGhost; }
  bool in_conflict(std::uint32_t t, const Vec2& q) const;
  std::uint32_t locate(const Vec2& q) const;
  std::uint32_t new_tri(std::uint32_t a, std::uint32_t b, std::uint32_t c);
  void insert(std::uint32_t vi);
  void seed(std::uint32_t a, std::uint32_t b, std::uint32_t c);

  std::span<const Vec2> p_;
  std::vector<Tri> tris_;
  std::vector<std::uint32_t> free_;
  std::vector<std::uint32_t> mark_;
  std::uint32_t stamp_ = 0;
  std::uint32_t last_ = 0;

  // Scratch for insert().
  std::vector<std::uint32_t> stack_;
  std::vector<std::uint32_t> dead_;
  struct Edge {
    std::uint32_t u, v, out, out_idx;
  };
  std::vector<Edge> rim_;
  std::unordered_map<std::uint32_t, std::uint32_t> by_start_;
};

bool Delaunay::in_conflict(std::uint32_t t, const Vec2& q) const {
  const Tri& tr = tris_[t];
  if (tr.v[2] != kGhost) return incircle(p_[tr.v[0]], p_[tr.v[1]], p_[tr.v[2]], q) > 0;
  const Vec2& a = p_[tr.v[0]];
  const Vec2& b = p_[tr.v[1]];
  const int o = orient2d(a, b, q);
  if (o != 0) return o > 0;
  // On the hull line: conflicts only strictly inside the segment.
  if (a.x() != b.x()) return (q.x() > std::min(a.x(), b.x())) && (q.x() < std::max(a.x(), b.x()));
  return (q.y() > std::min(a.y(), b.y())) && (q.y() < std::max(a.y(), b.y()));
}

std::uint32_t Delaunay::locate(const Vec2& q) const {
  std::uint32_t t = last_;
  if (!tris_[t].alive) {
    t = 0;
    while (!tris_[t].alive) ++t;
  }
  if (is_ghost(t)) t = tris_[t].n[2];
  const std::size_t limit = 4 * tris_.size() + 64;
  std::uint32_t rot = 0;
  for (std::size_t step = 0; step < limit; ++step) {
    const Tri& tr = tris_[t];
    bool moved = false;
    for (int e = 0; e < 3; ++e) {
      const int i = static_cast<int>((rot + e) % 3);
      if (orient2d(p_[tr.v[(i + 1) % 3]], p_[tr.v[(i + 2) % 3]], q) < 0) {
        t = tr.n[i];
        moved = true;
        break;
      }
    }
    ++rot;
    if (!moved || is_ghost(t)) return t;
  }
  // The walk should always terminate on a Delaunay triangulation; fall
  // back to a scan rather than loop.
  for (std::uint32_t s = 0; s < tris_.size(); ++s) {
    if (tris_[s].alive && in_conflict(s, q)) return s;
  }
  return kNoTri;
}

std::uint32_t Delaunay::new_tri(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
  Tri tr{{a, b, c}, {kNoTri, kNoTri, kNoTri}, true};
  if (!free_.empty()) {
    const std::uint32_t t = free_.back();
    free_.pop_back();
    tris_[t] = tr;
    return t;
  }
  tris_.push_back(tr);
  mark_.push_back(0);
  return static_cast<std::uint32_t>(tris_.size() - 1);
}

void Delaunay::seed(std::uint32_t a, std::uint32_t b, std::uint32_t c) {
  if (orient2d(p_[a], p_[b], p_[c]) < 0) std::swap(b, c);
  const std::uint32_t r = new_tri(a, b, c);
  const std::array<std::uint32_t, 3> v{a, b, c};
  std::array<std::uint32_t, 3> g{};
  for (int i = 0; i < 3; ++i) {
    // Ghost across the edge opposite v[i], i.e. across v[i+1] -> v[i+2].
    g[i] = new_tri(v[(i + 2) % 3], v[(i + 1) % 3], kGhost);
    tris_[r].n[i] = g[i];
    tris_[g[i]].n[2] = r;
  }
  // Ghost (y, x, G) meets the ghost starting at x across x -> G.
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      if (tris_[g[i]].v[1] == tris_[g[j]].v[0]) {
        tris_[g[i]].n[0] = g[j];
        tris_[g[j]].n[1] = g[i];
      }
    }
  }
  last_ = r;
}

void Delaunay::insert(std::uint32_t vi) {
  const Vec2& q = p_[vi];
  const std::uint32_t start = locate(q);
  if (start == kNoTri) return;
  if (!is_ghost(start)) {
    const Tri& tr = tris_[start];
    for (std::uint32_t v : tr.v) {
      if (p_[v] == q) return;  // repeated XY position
    }
  }
  if (!in_conflict(start, q)) return;

  ++stamp_;
  stack_.assign(1, start);
  mark_[start] = stamp_;
  dead_.clear();
  rim_.clear();
  while (!stack_.empty()) {
    const std::uint32_t t = stack_.back();
    stack_.pop_back();
    dead_.push_back(t);
    for (int i = 0; i < 3; ++i) {
      const std::uint32_t nb = tris_[t].n[i];
      if (mark_[nb] == stamp_) continue;
      if (in_conflict(nb, q)) {
        mark_[nb] = stamp_;
        stack_.push_back(nb);
      } else {
        const Tri& o = tris_[nb];
        const std::uint32_t back = static_cast<std::uint32_t>(
            std::find(o.n.begin(), o.n.end(), t) - o.n.begin());
        rim_.push_back({tris_[t].v[(i + 1) % 3], tris_[t].v[(i + 2) % 3], nb, back});
      }
    }
  }
  for (std::uint32_t t : dead_) {
    tris_[t].alive = false;
    free_.push_back(t);
  }

  by_start_.clear();
  std::vector<std::uint32_t> created;
  created.reserve(rim_.size());
  for (const Edge& e : rim_) {
    const std::uint32_t t = new_tri(e.u, e.v, vi);
    tris_[t].n[2] = e.out;
    tris_[e.out].n[e.out_idx] = t;
    by_start_[e.u] = t;
    created.push_back(t);
  }
  for (std::uint32_t t : created) {
    // (u, v, q): across v -> q lies the new triangle starting at v.
    const std::uint32_t other = by_start_.at(tris_[t].v[1]);
    tris_[t].n[0] = other;
    tris_[other].n[1] = t;
  }
  for (std::uint32_t t : created) {
    Tri& tr = tris_[t];
    while (tr.v[2] != kGhost && (tr.v[0] == kGhost || tr.v[1] == kGhost)) {
      std::rotate(tr.v.begin(), tr.v.begin() + 1, tr.v.end());
      std::rotate(tr.n.begin(), tr.n.begin() + 1, tr.n.end());
    }
  }
  last_ = created.back();
  if (is_ghost(last_)) last_ = tris_[last_].n[2];
}

std::vector<Triangle> Delaunay::run() {
  const auto order = hilbert_order(p_);
  const std::size_t n = order.size();
  std::size_t i1 = 1;
  while (i1 < n && p_[order[i1]] == p_[order[0]]) ++i1;
  std::size_t i2 = i1 + 1;
  while (i2 < n && orient2d(p_[order[0]], p_[order[i1]], p_[order[i2]]) == 0) ++i2;
  if (i1 >= n || i2 >= n) throw Error(ErrorCode::DegenerateInput, "points are collinear or coincident in XY");

  tris_.reserve(2 * n + 8);
  mark_.reserve(2 * n + 8);
  seed(order[0], order[i1], order[i2]);
  for (std::size_t k = 1; k < n; ++k) {
    if (k == i1 || k == i2) continue;
    insert(order[k]);
  }

  std::vector<Triangle> out;
  out.reserve(n * 2);
  for (const Tri& tr : tris_) {
    if (tr.alive && tr.v[2] != kGhost) out.push_back({tr.v[0], tr.v[1], tr.v[2]});
  }
  // Deterministic, order-independent listing.
  for (Triangle& t : out) std::rotate(t.begin(), std::min_element(t.begin(), t.end()), t.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

std::vector<Triangle> delaunay_xy(std::span<const Vec2> xy) {
  if (xy.size() < 3) throw Error(ErrorCode::DegenerateInput, "triangulation needs at least three points");
  for (const Vec2& p : xy) {
    if (!p.allFinite()) throw Error(ErrorCode::DegenerateInput, "non-finite point in triangulation input");
  }
  return Delaunay(xy).run();
}

MeshTopology make_topology(std::size_t vertex_count, std::vector<Triangle> triangles) {
  MeshTopology topo;
  topo.vertex_count = vertex_count;
  topo.triangles = std::move(triangles);
  topo.face_offsets.assign(vertex_count + 1, 0);
  for (const Triangle& t : topo.triangles) {
    for (std::uint32_t v : t) ++topo.face_offsets[v + 1];
  }
  std::partial_sum(topo.face_offsets.begin(), topo.face_offsets.end(), topo.face_offsets.begin());
  topo.faces.resize(topo.face_offsets.back());
  std::vector<std::uint32_t> fill(topo.face_offsets.begin(), topo.face_offsets.end() - 1);
  for (std::size_t f = 0; f < topo.triangles.size(); ++f) {
    for (std::uint32_t v : topo.triangles[f]) topo.faces[fill[v]++] = static_cast<std::uint32_t>(f);
  }
  return topo;
}

MeshTopology triangulate_xy(std::span<const Vec2> xy, double max_edge) {
  std::vector<Triangle> tris = delaunay_xy(xy);
  const double limit2 = max_edge * max_edge;
  std::erase_if(tris, [&](const Triangle& t) {
    return (xy[t[0]] - xy[t[1]]).squaredNorm() > limit2 || (xy[t[1]] - xy[t[2]]).squaredNorm() > limit2 ||
           (xy[t[2]] - xy[t[0]]).squaredNorm() > limit2;
  });
  return make_topology(xy.size(), std::move(tris));
}

std::vector<Vec3> update_normals(const MeshTopology& topo, std::span<const Vec2> xy, std::span<const double> z) {
  if (xy.size() != topo.vertex_count || z.size() != topo.vertex_count) {
    throw Error(ErrorCode::InvalidArgument, "vertex data does not match the mesh topology");
  }
  const std::ptrdiff_t nf = static_cast<std::ptrdiff_t>(topo.triangles.size());
  std::vector<Vec3> face(topo.triangles.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t f = 0; f < nf; ++f) {
    const Triangle& t = topo.triangles[f];
    const Vec3 a(xy[t[0]].x(), xy[t[0]].y(), z[t[0]]);
    const Vec3 b(xy[t[1]].x(), xy[t[1]].y(), z[t[1]]);
    const Vec3 c(xy[t[2]].x(), xy[t[2]].y(), z[t[2]]);
    Vec3 n = (b - a).cross(c - a);
    if (n.z() < 0.0) n = -n;
    const double len = n.norm();
    face[f] = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
  }
  const std::ptrdiff_t nv = static_cast<std::ptrdiff_t>(topo.vertex_count);
  std::vector<Vec3> out(topo.vertex_count);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t v = 0; v < nv; ++v) {
    Vec3 acc = Vec3::Zero();
    for (std::uint32_t f : topo.faces_of(static_cast<std::size_t>(v))) acc += face[f];
    const double len = acc.norm();
    out[v] = len > 0.0 ? Vec3(acc / len) : Vec3::UnitZ();
  }
  return out;
}

}  // namespace relief
