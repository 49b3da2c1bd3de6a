#pragma once

#include <span>
#include <vector>

#include <Eigen/Geometry>

#include "relief/base_surface.hpp"
#include "relief/cloud.hpp"
#include "relief/control_sampling.hpp"
#include "relief/solver.hpp"
#include "relief/viewprep.hpp"

namespace relief {

/// Full-resolution relief with curvature compression switched off: only
/// the boundary blend flattens the normals. Removes depth jumps once so
/// per-frame ratios are smooth.
struct ReferenceRelief {
  std::vector<double> z_ref;
  double h_ref = 0.0;
};

/// `visible_sys` must be assembled over all visible points (in VisibleSet
/// order) and `visible_normals` runs parallel to it.
ReferenceRelief build_reference(const LinearSystem& visible_sys, std::span<const Vec3> visible_normals,
                                const BoundaryInfo& bnd, const BaseSurface& base, double rho);

/// Multilevel uniform cubic B-spline approximation of scattered values.
/// Level 0 has one cell (a 4 x 4 control lattice), each further level
/// doubles the cells per axis and fits the residual left by the levels
/// before it. Values are fitted about their mean so constants are
/// reproduced exactly.
class RatioField {
 public:
  RatioField() = default;

  static RatioField fit(std::span<const Vec2> sites, std::span<const double> values,
                        const Eigen::AlignedBox2d& domain, int levels);
  /// Field with no sites: evaluates to `value` everywhere.
  static RatioField constant(double value, const Eigen::AlignedBox2d& domain);

  /// Evaluates the single lattice obtained by refining every level onto
  /// the finest one and summing.
  double operator()(const Vec2& p) const;
  /// Evaluates the per-level lattices separately and sums them.
  double evaluate_by_levels(const Vec2& p) const;

  int levels() const noexcept { return static_cast<int>(levels_.size()); }
  double offset() const noexcept { return offset_; }
  /// Max-abs and RMS site residual before level 0 (index 0) and after
  /// each level (index l + 1).
  const std::vector<double>& max_residuals() const noexcept { return max_residual_; }
  const std::vector<double>& rms_residuals() const noexcept { return rms_residual_; }

  struct Lattice {
    int mx = 0;
    int my = 0;
    std::vector<double> phi;  // (mx + 3) x (my + 3), row-major in y
  };

 private:
  double eval_lattice(const Lattice& lat, const Vec2& p) const;

  Vec2 origin_ = Vec2::Zero();
  Vec2 size_ = Vec2::Ones();
  double offset_ = 0.0;
  std::vector<Lattice> levels_;
  Lattice collapsed_;
  std::vector<double> max_residual_;
  std::vector<double> rms_residual_;
};

/// Scattered ratios (z_hat - z_b) / (z_ref - z_b) at non-boundary
/// controls whose denominator is not degenerate.
struct RatioSamples {
  std::vector<Vec2> sites;
  std::vector<double> values;
};

inline constexpr double kRatioClampMax = 1.5;

RatioSamples control_ratios(const ControlSet& controls, std::span<const double> z_hat,
                            std::span<const double> z_ref_at_controls, const BaseSurface& base, double h_ref);

/// XY box of the points expanded by `margin` on every side.
Eigen::AlignedBox2d ratio_domain(std::span<const Vec2> xy, double margin);

/// z_b + clamp(field, 0, 1.5) * (z_ref - z_b) per point.
std::vector<double> map_heights(std::span<const Vec2> xy, std::span<const double> z_ref, const RatioField& field,
                                const BaseSurface& base);

/// z + gamma * k_norm * h, skipping points whose curvature is degenerate.
std::vector<double> enhance_details(std::span<const double> z, std::span<const double> k_norm,
                                    std::span<const std::uint8_t> degenerate, double gamma, double h);

}  // namespace relief
