#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "expect.hpp"
#include "models.hpp"
#include "relief/compression.hpp"
#include "relief/height_mapping.hpp"
#include "stages.hpp"

using namespace relief;
namespace rt = relief::testing;

namespace {

double franke(double x, double y) {
  return 0.75 * std::exp(-(std::pow(9 * x - 2, 2) + std::pow(9 * y - 2, 2)) / 4) +
         0.75 * std::exp(-std::pow(9 * x + 1, 2) / 49 - (9 * y + 1) / 10) +
         0.5 * std::exp(-(std::pow(9 * x - 7, 2) + std::pow(9 * y - 3, 2)) / 4) -
         0.2 * std::exp(-std::pow(9 * x - 4, 2) - std::pow(9 * y - 7, 2));
}

Eigen::AlignedBox2d unit_box(double margin) {
  return Eigen::AlignedBox2d(Vec2::Constant(-margin), Vec2::Constant(1 + margin));
}

struct Reference {
  rt::Staged st;
  LinearSystem sys;
  std::vector<Vec3> normals;
  ReferenceRelief ref;
};

Reference reference_for(const PointCloud& cloud, const BaseSurface& base = BaseSurface::plane()) {
  Reference r;
  r.st = rt::stage(cloud);
  r.sys = assemble_system(r.st.vis.xy, build_neighbor_graph(r.st.vis.xy, 6), r.st.bnd.is_boundary);
  for (std::uint32_t i : r.st.vis.indices) r.normals.push_back(r.st.aligned.normals()[i]);
  r.ref = build_reference(r.sys, r.normals, r.st.bnd, base, r.st.rho.rho);
  return r;
}

double max_edge_jump(const LinearSystem& sys, std::span<const double> z) {
  double worst = 0.0;
  for (std::size_t r = 0; r < sys.row_p.size(); ++r) worst = std::max(worst, std::abs(z[sys.row_p[r]] - z[sys.row_q[r]]));
  return worst;
}

}  // namespace

TEST(RatioField, ConstantIsReproduced) {
  const auto sites = rt::random_square(2000, 3);
  const std::vector<double> values(sites.size(), 0.7321);
  const RatioField f = RatioField::fit(sites, values, unit_box(0.02), 8);
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-0.02, 1.02);
  for (int t = 0; t < 2000; ++t) EXPECT_NEAR(f(Vec2(u(rng), u(rng))), 0.7321, 1e-9);
  const RatioField c = RatioField::constant(0.25, unit_box(0.0));
  EXPECT_EQ(c(Vec2(0.3, 0.9)), 0.25);
}

// Quasi-uniform sites, like the controls the field is fitted to in a
// session.
TEST(RatioField, BilinearRampAtFiveThousandSites) {
  const auto sites = rt::halton_square(5000);
  std::vector<double> v;
  for (const Vec2& p : sites) v.push_back(0.2 + 0.5 * p.x() + 0.3 * p.y() + 0.4 * p.x() * p.y());
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  const RatioField f = RatioField::fit(sites, v, unit_box(0.02), 8);
  double worst = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i) worst = std::max(worst, std::abs(f(sites[i]) - v[i]));
  EXPECT_LE(worst, 1e-3 * range);
  EXPECT_NEAR(f.max_residuals().back(), worst, 1e-12);
}

TEST(RatioField, FrankeResidualsShrinkWithLevels) {
  const auto sites = rt::halton_square(5000, 100);
  std::vector<double> v;
  for (const Vec2& p : sites) v.push_back(franke(p.x(), p.y()));
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const RatioField f = RatioField::fit(sites, v, unit_box(0.02), 8);
  ASSERT_EQ(f.rms_residuals().size(), 9u);
  EXPECT_LE(f.max_residuals().back(), 1e-3 * (*hi - *lo));
  for (std::size_t l = 1; l < f.rms_residuals().size(); ++l) {
    EXPECT_LE(f.rms_residuals()[l], f.rms_residuals()[l - 1] * (1 + 1e-12)) << "level " << l;
  }
}

// Clustered random sites leave the finest levels with overlapping
// supports; the 8-level residual lands around 1e-3 of the range there.
TEST(RatioField, RandomSitesStayNearTheBound) {
  for (std::uint32_t seed = 1; seed <= 6; ++seed) {
    const auto sites = rt::random_square(5000, seed);
    std::vector<double> v;
    for (const Vec2& p : sites) v.push_back(franke(p.x(), p.y()));
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const RatioField f = RatioField::fit(sites, v, unit_box(0.02), 8);
    EXPECT_LE(f.max_residuals().back(), 2e-3 * (*hi - *lo)) << seed;
  }
}

TEST(RatioField, CollapsedLatticeMatchesLevelSum) {
  const auto sites = rt::random_square(3000, 2);
  std::vector<double> v;
  for (const Vec2& p : sites) v.push_back(std::sin(4 * p.x()) * std::cos(3 * p.y()));
  const RatioField f = RatioField::fit(sites, v, unit_box(0.05), 7);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-0.05, 1.05);
  for (int t = 0; t < 1000; ++t) {
    const Vec2 p(u(rng), u(rng));
    EXPECT_NEAR(f(p), f.evaluate_by_levels(p), 1e-12);
  }
}

// Cubic B-splines are C2: the one-sided slopes at a cell border agree up
// to O(h) and the gap shrinks linearly with the step.
TEST(RatioField, FirstDerivativeContinuousAcrossCellBorders) {
  const auto sites = rt::random_square(800, 6);
  std::vector<double> v;
  for (const Vec2& p : sites) v.push_back(std::sin(6 * p.x()) + p.y() * p.y());
  const RatioField f = RatioField::fit(sites, v, unit_box(0.0), 4);
  const double border = 3.0 / 8.0;  // a cell edge of the 8 x 8 finest lattice
  auto gap = [&](double h) {
    const Vec2 c(border, 0.41);
    const double left = (f(c) - f(c - Vec2(h, 0))) / h;
    const double right = (f(c + Vec2(h, 0)) - f(c)) / h;
    return std::abs(right - left);
  };
  const double g1 = gap(1e-3), g2 = gap(1e-4);
  EXPECT_LT(g2, 0.2 * g1 + 1e-7);
}

TEST(MapHeights, ConstantFields) {
  const std::vector<Vec2> xy = {Vec2(0, 0), Vec2(0.5, 0.5), Vec2(1, 1)};
  const std::vector<double> z_ref = {1.0, 2.0, 3.0};
  const BaseSurface base = BaseSurface::plane(0.5);
  const auto one = map_heights(xy, z_ref, RatioField::constant(1.0, unit_box(0)), base);
  const auto zero = map_heights(xy, z_ref, RatioField::constant(0.0, unit_box(0)), base);
  const auto clamped = map_heights(xy, z_ref, RatioField::constant(9.0, unit_box(0)), base);
  for (std::size_t i = 0; i < xy.size(); ++i) {
    EXPECT_EQ(one[i], z_ref[i]);
    EXPECT_EQ(zero[i], 0.5);
    EXPECT_DOUBLE_EQ(clamped[i], 0.5 + kRatioClampMax * (z_ref[i] - 0.5));
  }
}

TEST(MapHeights, HalfRatioHalvesTheHemisphereSpan) {
  const Reference r = reference_for(rt::hemisphere_dome(20000).cloud());
  const RatioField half = RatioField::constant(0.5, ratio_domain(r.st.vis.xy, 2 * r.st.rho.rho));
  const auto z = map_heights(r.st.vis.xy, r.ref.z_ref, half, BaseSurface::plane());
  EXPECT_NEAR(height_span(z, r.st.vis.xy, BaseSurface::plane()), 0.5 * r.ref.h_ref, 1e-12);
}

TEST(BuildReference, StepSceneHasNoJump) {
  const auto s = rt::overlapping_planes(0.01, 0.3, 0.5);
  const Reference r = reference_for(s.cloud());
  // The input itself jumps by the full offset across x = 0.5.
  std::vector<double> z_in;
  for (std::uint32_t i : r.st.vis.indices) z_in.push_back(r.st.aligned.points()[i].z());
  const double in_jump = max_edge_jump(r.sys, z_in);
  EXPECT_GT(in_jump, 0.25 * r.st.aligned.diagonal());
  EXPECT_LE(max_edge_jump(r.sys, r.ref.z_ref), 0.1 * r.ref.h_ref);
}

TEST(BuildReference, HemisphereShapeAwayFromTheRim) {
  const Reference r = reference_for(rt::hemisphere_dome(40000).cloud());
  // Rim blending lowers the whole dome by a constant; compare shape.
  std::vector<double> diff;
  const double band = 8.0 * r.st.rho.rho;
  for (std::size_t k = 0; k < r.st.vis.size(); ++k) {
    if (r.st.bnd.dist[k] < band) continue;
    const double truth = std::sqrt(std::max(0.0, 1.0 - r.st.vis.xy[k].squaredNorm()));
    diff.push_back(r.ref.z_ref[k] - truth);
  }
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= diff.size();
  double rms = 0.0;
  for (double d : diff) rms += (d - mean) * (d - mean);
  rms = std::sqrt(rms / diff.size());
  EXPECT_LE(rms, 0.02 * r.ref.h_ref);

  for (std::size_t k = 0; k < r.st.vis.size(); ++k) {
    if (r.st.bnd.is_boundary[k]) EXPECT_LE(std::abs(r.ref.z_ref[k]), 0.01 * r.ref.h_ref);
  }
}

TEST(ControlRatios, SkipsRimAndClamps) {
  ControlSet cs;
  cs.xy = {Vec2(0, 0), Vec2(1, 0), Vec2(2, 0), Vec2(3, 0), Vec2(4, 0)};
  cs.is_boundary = {1, 0, 0, 0, 0};
  cs.indices = {0, 1, 2, 3, 4};
  const std::vector<double> z_hat = {0.0, 0.5, 3.0, -1.0, 0.4};
  const std::vector<double> z_ref = {0.0, 1.0, 1.0, 1.0, 1e-9};
  const RatioSamples rs = control_ratios(cs, z_hat, z_ref, BaseSurface::plane(), 1.0);
  ASSERT_EQ(rs.values.size(), 3u);
  EXPECT_EQ(rs.values[0], 0.5);
  EXPECT_EQ(rs.values[1], kRatioClampMax);
  EXPECT_EQ(rs.values[2], 0.0);
  EXPECT_EQ(rs.sites[2], Vec2(3, 0));
}

TEST(EnhanceDetails, Arithmetic) {
  const std::vector<double> z = {1.0, 2.0, 3.0};
  const std::vector<double> k = {0.5, 1.0, 0.25};
  const std::vector<std::uint8_t> deg = {0, 0, 1};
  const auto out = enhance_details(z, k, deg, 0.02, 10.0);
  EXPECT_NEAR(out[0] - z[0], 0.1, 1e-15);
  EXPECT_NEAR(out[1] - z[1], 0.2, 1e-15);
  EXPECT_EQ(out[2], z[2]);
}

TEST(EnhanceDetails, BoundsAndLinearity) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> z(5000), k(5000);
  std::vector<std::uint8_t> deg(5000);
  for (std::size_t i = 0; i < z.size(); ++i) {
    z[i] = u(rng) - 0.5;
    k[i] = i % 97 == 0 ? 1.0 : u(rng);
    deg[i] = i % 31 == 0;
  }
  const double h = 2.5;
  const auto same = enhance_details(z, k, deg, 0.0, h);
  EXPECT_EQ(same, z);
  const auto a = enhance_details(z, k, deg, 0.05, h);
  const auto b = enhance_details(z, k, deg, 0.10, h);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double da = a[i] - z[i], db = b[i] - z[i];
    EXPECT_GE(da, 0.0);
    EXPECT_LE(da, 0.05 * h + 1e-15);
    EXPECT_NEAR(db, 2 * da, 1e-14);
    if (k[i] == 1.0 && !deg[i]) EXPECT_NEAR(db, 0.10 * h, 1e-15);
  }
}
