#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "expect.hpp"
#include "models.hpp"
#include "relief/height_target.hpp"
#include "relief/session.hpp"

using namespace relief;
namespace rt = relief::testing;

namespace {

// Span proportional to the mean curvature weight of a fixed k_norm sample:
// the same monotone structure as a real control solve, at no cost.
struct ToyRelief {
  std::vector<double> k;
  double delta = 0.0;
  double scale = 2.0;
  int calls = 0;

  ToyRelief() {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 400; ++i) k.push_back(i % 50 == 0 ? 1.0 : u(rng) * u(rng));
    delta = population_stddev(k);
  }
  double operator()(const ReliefParams& p) {
    ++calls;
    double s = 0.0;
    for (double v : k) s += curvature_weight(v, std::max(p.alpha, kMinAlpha), p.beta, delta);
    return scale * s / static_cast<double>(k.size());
  }
};

ReliefParams no_detail() {
  ReliefParams p;
  p.gamma = 0.0;
  return p;
}

}  // namespace

TEST(SolveForHeight, AlreadyConvergedReturnsImmediately) {
  ToyRelief toy;
  const double h = toy(no_detail());
  const TargetResult r = solve_for_height(std::ref(toy), no_detail(), {h}, toy.delta);
  EXPECT_LE(r.solves, 2);
  EXPECT_EQ(r.alpha, 4.0);
  EXPECT_EQ(r.beta, 0.01);
}

TEST(SolveForHeight, ReachesTargetsWithinOnePercent) {
  ToyRelief toy;
  ReliefParams tall = no_detail();
  tall.alpha = kMinAlpha;
  tall.beta = 1.0;
  const double h_max = toy(tall);
  for (double frac : {0.95, 0.8, 0.7, 0.5, 0.3, 0.1}) {
    ToyRelief f;
    const TargetResult r = solve_for_height(std::ref(f), no_detail(), {frac * h_max}, f.delta);
    EXPECT_LE(std::abs(r.span - frac * h_max), 0.01 * frac * h_max) << frac;
    EXPECT_LE(r.solves, 60) << frac;
    EXPECT_EQ(r.solves, f.calls);
    // Replaying the reported parameters reproduces the span exactly.
    ReliefParams replay = no_detail();
    replay.alpha = r.alpha;
    replay.beta = r.beta;
    EXPECT_EQ(f(replay), r.span);
  }
}

TEST(SolveForHeight, DetailBudgetLowersTheControlTarget) {
  ToyRelief toy;
  ReliefParams start = no_detail();
  start.gamma = 0.1;
  const TargetResult r = solve_for_height(std::ref(toy), start, {1.0}, toy.delta);
  EXPECT_DOUBLE_EQ(r.target_span, 0.9);
  EXPECT_LE(std::abs(r.span - 0.9), 0.009);
}

TEST(SolveForHeight, UnreachableTargets) {
  ToyRelief toy;
  EXPECT_RELIEF_ERROR(solve_for_height(std::ref(toy), no_detail(), {10.0 * toy.scale}, toy.delta),
                      ErrorCode::TargetUnreachable);
  ToyRelief tight;
  EXPECT_RELIEF_ERROR(solve_for_height(std::ref(tight), no_detail(), {0.3, 3}, tight.delta),
                      ErrorCode::TargetUnreachable);
  EXPECT_LE(tight.calls, 3);
  EXPECT_RELIEF_ERROR(solve_for_height(std::ref(toy), no_detail(), {-1.0}), ErrorCode::InvalidArgument);
}

TEST(SolveForHeight, ReportsProgressPerSolve) {
  ToyRelief toy;
  std::vector<TargetProgress> seen;
  const TargetResult r =
      solve_for_height(std::ref(toy), no_detail(), {0.4}, toy.delta, [&](const TargetProgress& p) { seen.push_back(p); });
  ASSERT_EQ(static_cast<int>(seen.size()), r.solves);
  for (std::size_t i = 0; i < seen.size(); ++i) EXPECT_EQ(seen[i].solves, static_cast<int>(i + 1));
}

TEST(SolveForHeight, HemisphereSession) {
  SessionConfig cfg;
  cfg.params.gamma = 0.0;
  cfg.control_target = 3000;
  const auto session = Session::prepare(rt::hemisphere_dome(30000).cloud(), Vec3::UnitZ(), cfg);
  const double ld = session->diagonal();
  for (double frac : {0.1, 0.05}) {
    const TargetResult r = solve_for_height(*session, cfg.params, {frac * ld});
    EXPECT_LE(std::abs(r.span - frac * ld), 0.01 * frac * ld);
    EXPECT_LE(r.solves, 60);
    ReliefParams replay = cfg.params;
    replay.alpha = r.alpha;
    replay.beta = r.beta;
    EXPECT_EQ(session->solve_controls(replay).heights.span, r.span);
  }
  EXPECT_RELIEF_ERROR(solve_for_height(*session, cfg.params, {10.0 * ld}), ErrorCode::TargetUnreachable);
}
