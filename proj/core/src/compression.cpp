#include "relief/compression.hpp"

#include <cmath>

#include "relief/control_sampling.hpp"
#include "relief/error.hpp"

namespace relief {

void ReliefParams::validate() const {
  if (!std::isfinite(alpha) || alpha < 0.0) throw Error(ErrorCode::InvalidArgument, "alpha must be >= 0");
  if (!std::isfinite(beta) || beta < 0.0) throw Error(ErrorCode::InvalidArgument, "beta must be >= 0");
  if (!std::isfinite(gamma) || gamma < 0.0 || gamma >= 1.0) {
    throw Error(ErrorCode::InvalidArgument, "gamma must lie in [0, 1)");
  }
}

double curvature_weight(double k_norm, double alpha, double beta, double delta) {
  if (!(delta > 0.0)) return 1.0;
  const double a = alpha > 0.0 ? alpha : kMinAlpha;
  const double x = k_norm / (a * delta);
  const double p = beta == 0.0 ? 1.0 : std::pow(x, beta);
  return 1.0 - std::exp(-p);
}

double boundary_weight(double dist, double rho) {
  const double t = dist / (2.0 * rho);
  return 1.0 - std::exp(-t * t);
}

Vec3 blend_normal(const Vec3& n_in, double w) {
  const Vec3 n = n_in.z() < 0.0 ? Vec3(-n_in) : n_in;
  Vec3 m(w * n.x(), w * n.y(), w * n.z() + (1.0 - w));
  const double len = m.norm();
  if (!(len > 0.0)) return Vec3::UnitZ();
  m /= len;
  if (m.z() < kNormalZFloor) {
    const double xy = std::hypot(m.x(), m.y());
    if (!(xy > 0.0)) return Vec3::UnitZ();
    const double s = std::sqrt(1.0 - kNormalZFloor * kNormalZFloor) / xy;
    m = Vec3(s * m.x(), s * m.y(), kNormalZFloor);
  }
  return m;
}

std::vector<Vec3> compress_normals(const ControlSet& controls, const ReliefParams& params, double rho) {
  params.validate();
  const std::size_t m = controls.size();
  std::vector<Vec3> out(m);
  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < count; ++c) {
    const double wk = curvature_weight(controls.k_norm[c], params.alpha, params.beta, controls.delta);
    const double wb = controls.is_boundary[c] ? 0.0 : boundary_weight(controls.dist[c], rho);
    out[c] = blend_normal(controls.normals[c], wk * wb);
  }
  return out;
}

}  // namespace relief
