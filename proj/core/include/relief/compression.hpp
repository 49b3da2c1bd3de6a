#pragma once

#include <span>
#include <vector>

#include "relief/base_surface.hpp"
#include "relief/cloud.hpp"

namespace relief {

struct ControlSet;

/// The three user knobs plus the carrier surface.
struct ReliefParams {
  double alpha = 4.0;
  double beta = 0.01;
  double gamma = 0.02;
  BaseSurface base;

  /// Rejects negative or non-finite knobs and gamma >= 1. alpha = 0 is
  /// accepted and treated as kMinAlpha.
  void validate() const;
  bool operator==(const ReliefParams&) const = default;
};

inline constexpr double kMinAlpha = 1e-6;
inline constexpr double kNormalZFloor = 0.05;

/// w_k = 1 - exp(-(k_norm / (alpha delta))^beta), with 0^0 = 1 and
/// w_k = 1 when delta = 0.
double curvature_weight(double k_norm, double alpha, double beta, double delta);

/// w_b = 1 - exp(-(dist / (2 rho))^2).
double boundary_weight(double dist, double rho);

/// w n + (1 - w) (0, 0, 1), renormalized, with n_z floored at
/// kNormalZFloor by shrinking the XY part. Normals facing away from the
/// viewer are flipped first.
Vec3 blend_normal(const Vec3& n, double w);

/// Expected normals for every control at the given parameters.
std::vector<Vec3> compress_normals(const ControlSet& controls, const ReliefParams& params, double rho);

}  // namespace relief
