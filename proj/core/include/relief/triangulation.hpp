#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relief/cloud.hpp"
#include "relief/mesh.hpp"

namespace relief {

/// Delaunay triangulation of the XY points, counter-clockwise triangles.
/// Points repeating an earlier XY position are left out (they end up
/// isolated). Throws DegenerateInput when fewer than three distinct,
/// non-collinear points exist.
std::vector<Triangle> delaunay_xy(std::span<const Vec2> xy);

/// Triangle set plus the vertex -> incident-face table used for normal
/// updates. Built once; only z changes afterwards.
struct MeshTopology {
  std::size_t vertex_count = 0;
  std::vector<Triangle> triangles;
  std::vector<std::uint32_t> face_offsets;  // vertex_count + 1 entries
  std::vector<std::uint32_t> faces;

  std::span<const std::uint32_t> faces_of(std::size_t v) const {
    return {faces.data() + face_offsets[v], face_offsets[v + 1] - face_offsets[v]};
  }
};

MeshTopology make_topology(std::size_t vertex_count, std::vector<Triangle> triangles);

/// Delaunay, then drop every triangle with an XY edge longer than
/// `max_edge` so separate objects are not webbed together.
MeshTopology triangulate_xy(std::span<const Vec2> xy, double max_edge);

/// Unit face normals from edge cross products (n_z > 0), averaged per
/// vertex and renormalized. Vertices without faces get (0, 0, 1).
std::vector<Vec3> update_normals(const MeshTopology& topo, std::span<const Vec2> xy, std::span<const double> z);

}  // namespace relief
