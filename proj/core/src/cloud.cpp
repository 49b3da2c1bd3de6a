#include "relief/cloud.hpp"

#include <algorithm>
#include <cmath>

#include "relief/error.hpp"
#include "relief/spatial.hpp"

namespace relief {

PointCloud::PointCloud(std::vector<Vec3> points, std::vector<Vec3> normals)
    : points_(std::move(points)), normals_(std::move(normals)) {
  if (points_.size() != normals_.size()) {
    throw Error(ErrorCode::MalformedFile, "point and normal counts differ");
  }
  if (points_.size() < 4) {
    throw Error(ErrorCode::TooFewPoints, "a cloud needs at least 4 points, got " +
                                             std::to_string(points_.size()));
  }
  bbox_.setEmpty();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (!points_[i].allFinite() || !normals_[i].allFinite()) {
      throw Error(ErrorCode::MalformedFile, "non-finite value at vertex " + std::to_string(i));
    }
    const double len = normals_[i].norm();
    if (!(len > 0.0)) {
      throw Error(ErrorCode::MalformedFile, "zero-length normal at vertex " + std::to_string(i));
    }
    normals_[i] /= len;
    bbox_.extend(points_[i]);
  }
  diagonal_ = bbox_.diagonal().norm();
  if (!(diagonal_ > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "all points coincide");
  }
}

namespace {

double mean_nn_distance(const std::vector<Vec3>& points, double cell, std::size_t stride) {
  GridIndex3 index(points, cell);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < points.size(); i += stride) {
    const auto nn = index.k_nearest(points[i], 1, static_cast<std::uint32_t>(i));
    sum += (points[nn.front()] - points[i]).norm();
    ++count;
  }
  return sum / static_cast<double>(count);
}

}  // namespace

SamplingDensity estimate_density(const std::vector<Vec3>& points) {
  if (points.size() < 2) {
    throw Error(ErrorCode::TooFewPoints, "density needs at least 2 points");
  }
  Eigen::AlignedBox3d box;
  for (const Vec3& p : points) box.extend(p);
  const double diag = box.diagonal().norm();
  if (!(diag > 0.0)) throw Error(ErrorCode::DegenerateInput, "all points coincide");

  // Coarse cell from the bounding box, assuming a surface-like sample.
  const double coarse_cell = diag / std::sqrt(static_cast<double>(points.size()));
  const std::size_t stride = std::max<std::size_t>(1, points.size() / 2048);
  double rho = mean_nn_distance(points, coarse_cell, stride);
  if (!(rho > 0.0)) rho = coarse_cell;
  rho = mean_nn_distance(points, rho, 1);
  if (!(rho > 0.0)) {
    throw Error(ErrorCode::DegenerateInput, "every point has a coincident duplicate");
  }
  return {rho};
}

}  // namespace relief
