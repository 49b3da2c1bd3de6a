#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relief/cloud.hpp"

namespace relief {

/// Neighbourhood and kernel for the MLS implicit surface. The Gaussian
/// weight is exp(-|y - q|^2 / gauss_sigma^2).
struct MLSConfig {
  double neighbor_radius = 0.0;
  double gauss_sigma = 0.0;
  int min_neighbors = 8;

  /// 6 rho support with a 2 rho kernel.
  static MLSConfig for_density(SamplingDensity rho);
  void validate() const;
};

/// Value, gradient and Hessian of the MLS implicit function g at a point.
struct MlsJet {
  double g = 0.0;
  Vec3 grad = Vec3::Zero();
  Mat3 hess = Mat3::Zero();
  /// False when the weighted normal average vanished.
  bool valid = false;
};

/// Evaluates g(x) = n(x)^T de(y, n(x))/dy |_{y=x} with
/// e(y, n) = sum_q ((y - q)^T n)^2 theta(y, q), where n(x) is the
/// Gaussian-weighted mean of the neighbour normals. Derivatives are exact
/// and include the dependence of n(x) on x.
MlsJet mls_implicit(const Vec3& x, std::span<const Vec3> neighbors,
                    std::span<const Vec3> neighbor_normals, double gauss_sigma);

/// Mean curvature (average of principal curvatures) of the level set of g
/// through x, from its gradient and Hessian.
double implicit_mean_curvature(const Vec3& grad, const Mat3& hess);

struct RawCurvature {
  std::vector<double> k_mean;
  /// 1 where the neighbourhood was too small or the gradient vanished;
  /// such points carry k_mean = 0.
  std::vector<std::uint8_t> degenerate;
};

/// Signed mean curvature at each of `eval` (indices into `cloud`), using
/// all cloud points within neighbor_radius whose normals face the same
/// side as the evaluated point's normal.
RawCurvature mean_curvature_field(const PointCloud& cloud, std::span<const std::uint32_t> eval,
                                  const MLSConfig& cfg);

struct CurvatureField {
  std::vector<double> k_mean;
  std::vector<double> k_norm;
  std::vector<std::uint8_t> degenerate;
  double delta = 0.0;
  double p99 = 1.0;
};

/// k_norm = min(|k|, p99) / p99 and delta = population std of k_norm.
CurvatureField normalize_curvature(RawCurvature raw);

/// 99th percentile of |k| as used by normalize_curvature; 1 for an
/// all-zero field.
double curvature_percentile_99(std::span<const double> k_mean);

double population_stddev(std::span<const double> values);

}  // namespace relief
