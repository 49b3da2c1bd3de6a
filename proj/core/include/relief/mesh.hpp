#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "relief/cloud.hpp"

namespace relief {

using Triangle = std::array<std::uint32_t, 3>;

/// Relief surface: vertices carry x, y from the visible cloud and the
/// current relief height as z. Triangles are counter-clockwise in XY.
struct ReliefMesh {
  std::vector<Vec3> vertices;
  std::vector<Vec3> normals;
  std::vector<Triangle> triangles;
};

}  // namespace relief
