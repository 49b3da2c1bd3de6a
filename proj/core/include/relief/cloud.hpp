#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace relief {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Oriented point set with unit normals. Construction renormalizes the
/// normals and rejects non-finite data or fewer than four points.
class PointCloud {
 public:
  PointCloud() = default;
  PointCloud(std::vector<Vec3> points, std::vector<Vec3> normals);

  std::size_t size() const noexcept { return points_.size(); }
  const std::vector<Vec3>& points() const noexcept { return points_; }
  const std::vector<Vec3>& normals() const noexcept { return normals_; }
  const Eigen::AlignedBox3d& bbox() const noexcept { return bbox_; }

  /// Length of the bounding-box diagonal (L_d).
  double diagonal() const noexcept { return diagonal_; }

 private:
  std::vector<Vec3> points_;
  std::vector<Vec3> normals_;
  Eigen::AlignedBox3d bbox_;
  double diagonal_ = 0.0;
};

/// Average sampling density: mean nearest-neighbour distance, model units.
struct SamplingDensity {
  double rho = 0.0;
};

SamplingDensity estimate_density(const std::vector<Vec3>& points);
inline SamplingDensity estimate_density(const PointCloud& cloud) {
  return estimate_density(cloud.points());
}

}  // namespace relief
