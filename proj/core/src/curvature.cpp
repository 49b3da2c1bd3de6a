#include "relief/curvature.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "relief/error.hpp"
#include "relief/spatial.hpp"

namespace relief {

MLSConfig MLSConfig::for_density(SamplingDensity rho) {
  MLSConfig cfg;
  cfg.neighbor_radius = 6.0 * rho.rho;
  cfg.gauss_sigma = 2.0 * rho.rho;
  return cfg;
}

void MLSConfig::validate() const {
  if (!(neighbor_radius > 0.0) || !(gauss_sigma > 0.0) || min_neighbors <= 0) {
    throw Error(ErrorCode::InvalidArgument, "MLS radius, sigma and neighbour count must be positive");
  }
  if (neighbor_radius < gauss_sigma) {
    throw Error(ErrorCode::InvalidArgument, "MLS neighbour radius must be at least the kernel width");
  }
}

MlsJet mls_implicit(const Vec3& x, std::span<const Vec3> neighbors,
                    std::span<const Vec3> neighbor_normals, double gauss_sigma) {
  const double c = 1.0 / (gauss_sigma * gauss_sigma);
  const std::size_t count = neighbors.size();

  // Weighted normal sum m(x) with first and second derivatives.
  Vec3 m = Vec3::Zero();
  Mat3 jm = Mat3::Zero();                 // jm(i, j) = dm_i / dx_j
  std::array<Mat3, 3> hm{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};  // hm[i](j, k)
  for (std::size_t q = 0; q < count; ++q) {
    const Vec3 u = x - neighbors[q];
    const double theta = std::exp(-c * u.squaredNorm());
    const Vec3& nq = neighbor_normals[q];
    m += theta * nq;
    jm.noalias() += (-2.0 * c * theta) * nq * u.transpose();
    const Mat3 kernel_hess = theta * (4.0 * c * c * u * u.transpose() - 2.0 * c * Mat3::Identity());
    for (int i = 0; i < 3; ++i) hm[i] += nq[i] * kernel_hess;
  }

  MlsJet out;
  const double len = m.norm();
  if (!(len > 1e-300)) return out;
  const Vec3 n = m / len;
  const Vec3 a = jm.transpose() * n;                 // a_j = dL/dx_j
  const Mat3 dn = (jm - n * a.transpose()) / len;    // dn(i, j) = dn_i/dx_j

  // hn[i](j, k) = d^2 n_i / dx_j dx_k
  Mat3 n_dot_hm = Mat3::Zero();
  for (int i = 0; i < 3; ++i) n_dot_hm += n[i] * hm[i];
  const Mat3 dn_t_jm = dn.transpose() * jm;          // (k, j) = sum_l dn(l,k) jm(l,j)
  std::array<Mat3, 3> hn;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        const double numer_dk = hm[i](j, k) - dn(i, k) * a[j] - n[i] * (dn_t_jm(k, j) + n_dot_hm(j, k));
        const double numer = jm(i, j) - n[i] * a[j];
        hn[i](j, k) = numer_dk / len - numer * a[k] / (len * len);
      }
    }
  }
  for (int i = 0; i < 3; ++i) hn[i] = 0.5 * (hn[i] + hn[i].transpose());
  const Mat3 dn_sym = dn + dn.transpose();

  for (std::size_t q = 0; q < count; ++q) {
    const Vec3 u = x - neighbors[q];
    const double theta = std::exp(-c * u.squaredNorm());
    const double d = u.dot(n);
    const double f = 2.0 * d - 2.0 * c * d * d * d;
    const double f1 = 2.0 * (1.0 - 3.0 * c * d * d);
    const double f2 = -12.0 * c * d;
    const Vec3 dd = n + dn.transpose() * u;
    Mat3 ddd = dn_sym;
    for (int i = 0; i < 3; ++i) ddd += u[i] * hn[i];
    const Vec3 dtheta = (-2.0 * c * theta) * u;
    const Mat3 ddtheta = theta * (4.0 * c * c * u * u.transpose() - 2.0 * c * Mat3::Identity());

    out.g += theta * f;
    out.grad += dtheta * f + (theta * f1) * dd;
    const Mat3 cross = dtheta * dd.transpose();
    out.hess += ddtheta * f + f1 * (cross + cross.transpose()) + (theta * f2) * dd * dd.transpose() +
                (theta * f1) * ddd;
  }
  out.valid = true;
  return out;
}

double implicit_mean_curvature(const Vec3& grad, const Mat3& hess) {
  const double gn = grad.norm();
  return (grad.dot(hess * grad) - gn * gn * hess.trace()) / (2.0 * gn * gn * gn);
}

RawCurvature mean_curvature_field(const PointCloud& cloud, std::span<const std::uint32_t> eval,
                                  const MLSConfig& cfg) {
  cfg.validate();
  const auto& pts = cloud.points();
  const auto& nrm = cloud.normals();
  GridIndex3 index(pts, cfg.neighbor_radius);

  RawCurvature out;
  out.k_mean.assign(eval.size(), 0.0);
  out.degenerate.assign(eval.size(), 0);

  const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(eval.size());
#pragma omp parallel
  {
    std::vector<Vec3> nb;
    std::vector<Vec3> nb_normals;
#pragma omp for schedule(dynamic, 256)
    for (std::ptrdiff_t e = 0; e < count; ++e) {
      const std::uint32_t i = eval[e];
      const Vec3& x = pts[i];
      const Vec3& own = nrm[i];
      nb.clear();
      nb_normals.clear();
      index.for_each_in_radius(x, cfg.neighbor_radius, [&](std::uint32_t j, double) {
        if (nrm[j].dot(own) > 0.0) {
          nb.push_back(pts[j]);
          nb_normals.push_back(nrm[j]);
        }
      });
      if (static_cast<int>(nb.size()) < cfg.min_neighbors) {
        out.degenerate[e] = 1;
        continue;
      }
      const MlsJet jet = mls_implicit(x, nb, nb_normals, cfg.gauss_sigma);
      if (!jet.valid || !(jet.grad.norm() >= 1e-9)) {
        out.degenerate[e] = 1;
        continue;
      }
      const double k = implicit_mean_curvature(jet.grad, jet.hess);
      if (!std::isfinite(k)) {
        out.degenerate[e] = 1;
        continue;
      }
      out.k_mean[e] = k;
    }
  }
  return out;
}

double curvature_percentile_99(std::span<const double> k_mean) {
  if (k_mean.empty()) return 1.0;
  std::vector<double> mags(k_mean.size());
  std::transform(k_mean.begin(), k_mean.end(), mags.begin(), [](double k) { return std::abs(k); });
  const std::size_t n = mags.size();
  // Smallest rank with at most 1% of the samples strictly above it.
  const std::size_t rank = std::min(n - 1, static_cast<std::size_t>(std::ceil(0.99 * static_cast<double>(n))));
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(rank), mags.end());
  double p = mags[rank];
  if (!(p > 0.0)) p = *std::max_element(mags.begin(), mags.end());
  return p > 0.0 ? p : 1.0;
}

double population_stddev(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(values.size()));
}

CurvatureField normalize_curvature(RawCurvature raw) {
  if (raw.k_mean.empty()) throw Error(ErrorCode::InvalidArgument, "empty curvature field");
  CurvatureField f;
  f.k_mean = std::move(raw.k_mean);
  f.degenerate = std::move(raw.degenerate);
  if (f.degenerate.size() != f.k_mean.size()) f.degenerate.assign(f.k_mean.size(), 0);
  f.p99 = curvature_percentile_99(f.k_mean);
  f.k_norm.resize(f.k_mean.size());
  for (std::size_t i = 0; i < f.k_mean.size(); ++i) {
    f.k_norm[i] = std::min(std::abs(f.k_mean[i]), f.p99) / f.p99;
  }
  f.delta = population_stddev(f.k_norm);
  return f;
}

}  // namespace relief
