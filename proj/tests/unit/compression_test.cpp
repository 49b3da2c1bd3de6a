#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "expect.hpp"
#include "models.hpp"
#include "relief/compression.hpp"
#include "relief/control_sampling.hpp"
#include "stages.hpp"

using namespace relief;
namespace rt = relief::testing;

namespace {
const double kOneMinusInvE = 1.0 - std::exp(-1.0);
}

TEST(CurvatureWeight, UnitArgumentForAnyBeta) {
  for (double beta : {0.01, 0.5, 1.0, 10.0}) {
    for (double alpha : {0.25, 4.0}) {
      const double delta = 0.2;
      EXPECT_NEAR(curvature_weight(alpha * delta, alpha, beta, delta), kOneMinusInvE, 1e-12);
    }
  }
}

TEST(CurvatureWeight, BetaZeroIsUniform) {
  for (double k : {0.0, 0.1, 0.7, 1.0}) EXPECT_NEAR(curvature_weight(k, 4.0, 0.0, 0.3), kOneMinusInvE, 1e-15);
}

TEST(CurvatureWeight, AlphaToZeroMeansNoCompression) {
  EXPECT_NEAR(curvature_weight(0.5, 1e-9, 1.0, 0.3), 1.0, 1e-12);
  EXPECT_NEAR(curvature_weight(0.5, 0.0, 1.0, 0.3), 1.0, 1e-12);
  EXPECT_EQ(curvature_weight(0.5, 4.0, 1.0, 0.0), 1.0);
}

TEST(CurvatureWeight, Monotonicity) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const double k1 = u(rng), k2 = u(rng), a1 = 0.01 + 10 * u(rng), a2 = 0.01 + 10 * u(rng);
    const double beta = 0.01 + 3 * u(rng), delta = 0.05 + u(rng);
    const auto w = [&](double k, double a) { return curvature_weight(k, a, beta, delta); };
    EXPECT_LE(w(std::min(k1, k2), a1), w(std::max(k1, k2), a1));
    EXPECT_GE(w(k1, std::min(a1, a2)), w(k1, std::max(a1, a2)));
  }
}

TEST(BoundaryWeight, ClosedForm) {
  const double rho = 0.37;
  EXPECT_EQ(boundary_weight(0.0, rho), 0.0);
  EXPECT_NEAR(boundary_weight(2 * rho, rho), kOneMinusInvE, 1e-12);
  EXPECT_NEAR(boundary_weight(10 * rho, rho), 1.0 - std::exp(-25.0), 1e-15);
  double prev = 0.0;
  for (double d = 0.0; d < 20.0 * rho; d += 0.01) {
    const double w = boundary_weight(d, rho);
    EXPECT_GE(w, prev);
    EXPECT_LT(w, 1.0 + 1e-15);
    prev = w;
  }
}

TEST(BlendNormal, Limits) {
  const Vec3 n = Vec3(0.6, 0.0, 0.8);
  EXPECT_EQ(blend_normal(n, 0.0), Vec3::UnitZ());
  EXPECT_LE((blend_normal(n, 1.0) - n).norm(), 1e-15);
}

TEST(BlendNormal, HalfWeightArithmetic) {
  const Vec3 raw(0.3, 0.0, 0.9);
  const Vec3 out = blend_normal(Vec3(0.6, 0.0, 0.8), 0.5);
  EXPECT_LE((out - raw / raw.norm()).norm(), 1e-15);
  EXPECT_NEAR(out.x(), 0.3162, 1e-4);
  EXPECT_NEAR(out.z(), 0.9487, 1e-4);
}

TEST(BlendNormal, FlipsAndFloors) {
  const Vec3 back = blend_normal(Vec3(0.0, 0.6, -0.8), 1.0);
  EXPECT_NEAR(back.z(), 0.8, 1e-15);
  const Vec3 grazing = blend_normal(Vec3(1.0, 0.0, 0.0), 1.0);
  EXPECT_NEAR(grazing.z(), kNormalZFloor, 1e-15);
  EXPECT_NEAR(grazing.norm(), 1.0, 1e-15);
}

TEST(BlendNormal, ZNeverDropsBelowInput) {
  std::mt19937 rng(1);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    Vec3 n(g(rng), g(rng), std::abs(g(rng)));
    n.normalize();
    const double w = u(rng);
    const Vec3 out = blend_normal(n, w);
    EXPECT_NEAR(out.norm(), 1.0, 1e-12);
    EXPECT_GE(out.z(), n.z() - 1e-12);
    EXPECT_GT(out.z(), 0.0);
  }
}

TEST(ReliefParams, Validation) {
  ReliefParams p;
  EXPECT_EQ(p.alpha, 4.0);
  EXPECT_EQ(p.beta, 0.01);
  EXPECT_EQ(p.gamma, 0.02);
  EXPECT_NO_THROW(p.validate());
  p.alpha = 0.0;
  EXPECT_NO_THROW(p.validate());
  p.gamma = 1.0;
  EXPECT_RELIEF_ERROR(p.validate(), ErrorCode::InvalidArgument);
  p = {};
  p.beta = -1.0;
  EXPECT_RELIEF_ERROR(p.validate(), ErrorCode::InvalidArgument);
  p = {};
  p.alpha = NAN;
  EXPECT_RELIEF_ERROR(p.validate(), ErrorCode::InvalidArgument);
}

TEST(CompressNormals, MatchesPerControlFormula) {
  const auto s = rt::stage(rt::hemisphere_dome(6000).cloud());
  const ControlSet cs = rt::controls_for(s, 1000);
  ReliefParams p;
  const auto out = compress_normals(cs, p, s.rho.rho);
  ASSERT_EQ(out.size(), cs.size());
  for (std::size_t c = 0; c < cs.size(); ++c) {
    EXPECT_NEAR(out[c].norm(), 1.0, 1e-12);
    EXPECT_GT(out[c].z(), 0.0);
    if (cs.is_boundary[c]) {
      EXPECT_EQ(out[c], Vec3::UnitZ());
      continue;
    }
    const double w = curvature_weight(cs.k_norm[c], p.alpha, p.beta, cs.delta) * boundary_weight(cs.dist[c], s.rho.rho);
    Vec3 n = cs.normals[c];
    if (n.z() < 0) n = -n;
    Vec3 raw = w * n + (1 - w) * Vec3::UnitZ();
    raw.normalize();
    if (raw.z() < kNormalZFloor) {
      const double s_xy = std::sqrt(1 - kNormalZFloor * kNormalZFloor) / raw.head<2>().norm();
      raw = Vec3(raw.x() * s_xy, raw.y() * s_xy, kNormalZFloor);
    }
    EXPECT_LE((out[c] - raw).norm(), 1e-12);
  }
}
