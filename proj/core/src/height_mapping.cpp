#include "relief/height_mapping.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "relief/compression.hpp"
#include "relief/error.hpp"

namespace relief {

ReferenceRelief build_reference(const LinearSystem& visible_sys, std::span<const Vec3> visible_normals,
                                const BoundaryInfo& bnd, const BaseSurface& base, double rho) {
  const std::size_t n = visible_sys.node_count();
  if (visible_normals.size() != n || bnd.dist.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "reference inputs do not match the visible system");
  }
  std::vector<Vec3> nt(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double wb = bnd.is_boundary[i] ? 0.0 : boundary_weight(bnd.dist[i], rho);
    nt[i] = blend_normal(visible_normals[i], wb);
  }
  HeightSolution sol = solve_heights(visible_sys, nt, base);
  return ReferenceRelief{std::move(sol.z), sol.span};
}

namespace {

inline std::array<double, 4> cubic_basis(double u) {
  const double u2 = u * u;
  const double u3 = u2 * u;
  const double v = 1.0 - u;
  return {v * v * v / 6.0, (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0, (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
          u3 / 6.0};
}

struct CellPos {
  int i;
  int j;
  double s;
  double t;
};

inline CellPos locate(const Vec2& p, const Vec2& origin, const Vec2& size, int mx, int my) {
  const double u = (p.x() - origin.x()) / size.x() * mx;
  const double v = (p.y() - origin.y()) / size.y() * my;
  const int i = std::clamp(static_cast<int>(std::floor(u)), 0, mx - 1);
  const int j = std::clamp(static_cast<int>(std::floor(v)), 0, my - 1);
  return {i, j, std::clamp(u - i, 0.0, 1.0), std::clamp(v - j, 0.0, 1.0)};
}

// Knot insertion: the lattice with twice the cells describing the same
// function.
RatioField::Lattice refine(const RatioField::Lattice& c) {
  RatioField::Lattice f;
  f.mx = 2 * c.mx;
  f.my = 2 * c.my;
  const int cw = c.mx + 3;
  const int fw = f.mx + 3;
  // Rows first (x direction), then columns.
  std::vector<double> tmp(static_cast<std::size_t>(fw) * (c.my + 3));
  for (int row = 0; row < c.my + 3; ++row) {
    const double* src = &c.phi[static_cast<std::size_t>(row) * cw];
    double* dst = &tmp[static_cast<std::size_t>(row) * fw];
    for (int fi = -1; fi <= f.mx + 1; ++fi) {
      double v;
      if ((fi & 1) == 0) {
        const int i = fi / 2;
        v = (src[i - 1 + 1] + 6.0 * src[i + 1] + src[i + 1 + 1]) / 8.0;
      } else {
        const int i = (fi - 1) / 2;
        v = (src[i + 1] + src[i + 1 + 1]) / 2.0;
      }
      dst[fi + 1] = v;
    }
  }
  f.phi.assign(static_cast<std::size_t>(fw) * (f.my + 3), 0.0);
  for (int fj = -1; fj <= f.my + 1; ++fj) {
    for (int col = 0; col < fw; ++col) {
      const auto at = [&](int j) { return tmp[static_cast<std::size_t>(j + 1) * fw + col]; };
      double v;
      if ((fj & 1) == 0) {
        const int j = fj / 2;
        v = (at(j - 1) + 6.0 * at(j) + at(j + 1)) / 8.0;
      } else {
        const int j = (fj - 1) / 2;
        v = (at(j) + at(j + 1)) / 2.0;
      }
      f.phi[static_cast<std::size_t>(fj + 1) * fw + col] = v;
    }
  }
  return f;
}

}  // namespace

double RatioField::eval_lattice(const Lattice& lat, const Vec2& p) const {
  const CellPos c = locate(p, origin_, size_, lat.mx, lat.my);
  const auto bs = cubic_basis(c.s);
  const auto bt = cubic_basis(c.t);
  const int w = lat.mx + 3;
  double acc = 0.0;
  for (int l = 0; l < 4; ++l) {
    const double* row = &lat.phi[static_cast<std::size_t>(c.j + l) * w + c.i];
    acc += bt[l] * (bs[0] * row[0] + bs[1] * row[1] + bs[2] * row[2] + bs[3] * row[3]);
  }
  return acc;
}

RatioField RatioField::constant(double value, const Eigen::AlignedBox2d& domain) {
  RatioField f;
  f.origin_ = domain.min();
  f.size_ = domain.sizes().cwiseMax(1e-300);
  f.offset_ = value;
  f.collapsed_ = Lattice{1, 1, std::vector<double>(16, 0.0)};
  return f;
}

RatioField RatioField::fit(std::span<const Vec2> sites, std::span<const double> values,
                           const Eigen::AlignedBox2d& domain, int levels) {
  if (sites.size() != values.size()) throw Error(ErrorCode::InvalidArgument, "site/value count mismatch");
  if (levels < 1 || levels > 16) throw Error(ErrorCode::InvalidArgument, "level count must lie in [1, 16]");
  if (domain.isEmpty() || !(domain.sizes().minCoeff() > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "ratio field domain must have positive extent");
  }
  if (sites.empty()) return constant(1.0, domain);

  RatioField f;
  f.origin_ = domain.min();
  f.size_ = domain.sizes();
  const std::size_t n = sites.size();
  double mean = 0.0;
  for (double v : values) mean += v;
  f.offset_ = mean / static_cast<double>(n);

  std::vector<double> residual(n);
  for (std::size_t s = 0; s < n; ++s) residual[s] = values[s] - f.offset_;
  auto record = [&] {
    double mx = 0.0;
    double sq = 0.0;
    for (double r : residual) {
      mx = std::max(mx, std::abs(r));
      sq += r * r;
    }
    f.max_residual_.push_back(mx);
    f.rms_residual_.push_back(std::sqrt(sq / static_cast<double>(n)));
  };
  record();

  std::vector<CellPos> pos(n);
  for (int level = 0; level < levels; ++level) {
    const int m = 1 << level;
    Lattice lat{m, m, {}};
    const int w = m + 3;
    const std::size_t cells = static_cast<std::size_t>(w) * w;
    std::vector<double> delta(cells, 0.0);
    std::vector<double> omega(cells, 0.0);
    for (std::size_t s = 0; s < n; ++s) {
      const CellPos c = locate(sites[s], f.origin_, f.size_, m, m);
      pos[s] = c;
      const auto bs = cubic_basis(c.s);
      const auto bt = cubic_basis(c.t);
      double sum2 = 0.0;
      for (int l = 0; l < 4; ++l) {
        for (int k = 0; k < 4; ++k) sum2 += (bs[k] * bt[l]) * (bs[k] * bt[l]);
      }
      for (int l = 0; l < 4; ++l) {
        for (int k = 0; k < 4; ++k) {
          const double wkl = bs[k] * bt[l];
          const double phi = wkl * residual[s] / sum2;
          const std::size_t idx = static_cast<std::size_t>(c.j + l) * w + (c.i + k);
          delta[idx] += wkl * wkl * phi;
          omega[idx] += wkl * wkl;
        }
      }
    }
    lat.phi.resize(cells);
    for (std::size_t i = 0; i < cells; ++i) lat.phi[i] = omega[i] > 0.0 ? delta[i] / omega[i] : 0.0;
    for (std::size_t s = 0; s < n; ++s) residual[s] -= f.eval_lattice(lat, sites[s]);
    record();

    if (level == 0) {
      f.collapsed_ = lat;
    } else {
      Lattice up = refine(f.collapsed_);
      for (std::size_t i = 0; i < cells; ++i) up.phi[i] += lat.phi[i];
      f.collapsed_ = std::move(up);
    }
    f.levels_.push_back(std::move(lat));
  }
  return f;
}

double RatioField::operator()(const Vec2& p) const { return offset_ + eval_lattice(collapsed_, p); }

double RatioField::evaluate_by_levels(const Vec2& p) const {
  double acc = offset_;
  for (const Lattice& lat : levels_) acc += eval_lattice(lat, p);
  return acc;
}

RatioSamples control_ratios(const ControlSet& controls, std::span<const double> z_hat,
                            std::span<const double> z_ref_at_controls, const BaseSurface& base, double h_ref) {
  const std::size_t m = controls.size();
  if (z_hat.size() != m || z_ref_at_controls.size() != m) {
    throw Error(ErrorCode::InvalidArgument, "ratio inputs do not match the control set");
  }
  RatioSamples out;
  const double tiny = 1e-6 * h_ref;
  for (std::size_t c = 0; c < m; ++c) {
    if (controls.is_boundary[c]) continue;
    const double zb = base(controls.xy[c]);
    const double den = z_ref_at_controls[c] - zb;
    if (!(std::abs(den) > tiny)) continue;
    out.sites.push_back(controls.xy[c]);
    out.values.push_back(std::clamp((z_hat[c] - zb) / den, 0.0, kRatioClampMax));
  }
  return out;
}

Eigen::AlignedBox2d ratio_domain(std::span<const Vec2> xy, double margin) {
  Eigen::AlignedBox2d box;
  for (const Vec2& p : xy) box.extend(p);
  if (box.isEmpty()) box.extend(Vec2::Zero());
  box.min().array() -= margin;
  box.max().array() += margin;
  return box;
}

std::vector<double> map_heights(std::span<const Vec2> xy, std::span<const double> z_ref, const RatioField& field,
                                const BaseSurface& base) {
  if (xy.size() != z_ref.size()) throw Error(ErrorCode::InvalidArgument, "mapping inputs differ in length");
  std::vector<double> out(xy.size());
  const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(xy.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const double zb = base(xy[i]);
    const double r = std::clamp(field(xy[i]), 0.0, kRatioClampMax);
    out[i] = zb + r * (z_ref[i] - zb);
  }
  return out;
}

std::vector<double> enhance_details(std::span<const double> z, std::span<const double> k_norm,
                                    std::span<const std::uint8_t> degenerate, double gamma, double h) {
  if (z.size() != k_norm.size() || (!degenerate.empty() && degenerate.size() != z.size())) {
    throw Error(ErrorCode::InvalidArgument, "detail inputs differ in length");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorCode::InvalidArgument, "gamma must lie in [0, 1)");
  std::vector<double> out(z.begin(), z.end());
  if (gamma == 0.0) return out;
  const double scale = gamma * std::max(h, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!degenerate.empty() && degenerate[i]) continue;
    out[i] += scale * k_norm[i];
  }
  return out;
}

}  // namespace relief
