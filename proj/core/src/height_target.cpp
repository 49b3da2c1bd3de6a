#include "relief/height_target.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

#include "relief/error.hpp"
#include "relief/session.hpp"

namespace relief {

namespace {

constexpr double kTolerance = 0.01;
constexpr double kStallTolerance = 0.001;
constexpr double kAlphaStart = 0.001;
constexpr double kBetaStart = 1e-5;
constexpr int kMaxBetaSteps = 20;  // beta up to about 10

class Search {
 public:
  Search(const SpanFunction& f, const ReliefParams& start, const TargetRequest& req, const ProgressFunction& p)
      : f_(f), params_(start), req_(req), progress_(p), target_((1.0 - start.gamma) * req.h0) {}

  TargetResult run();

 private:
  double solve(double alpha, double beta) {
    if (solves_ >= req_.max_solves) fail("solve budget exhausted");
    params_.alpha = alpha;
    params_.beta = beta;
    const double h = f_(params_);
    ++solves_;
    const double err = std::abs(h - target_);
    if (err < best_err_) {
      best_err_ = err;
      best_ = {alpha, beta, h, target_, solves_};
    }
    if (progress_) progress_({solves_, alpha, beta, h});
    return h;
  }
  bool close(double h) const { return std::abs(h - target_) / target_ <= kTolerance; }
  [[noreturn]] void fail(const std::string& why) const {
    std::ostringstream msg;
    msg << why << " after " << solves_ << " solves; best alpha=" << best_.alpha << " beta=" << best_.beta
        << " span=" << best_.span << " for target " << target_;
    throw Error(ErrorCode::TargetUnreachable, msg.str());
  }
  static double beta_at(int k) { return std::ldexp(kBetaStart, k); }

  double span_cached(double alpha, int k) {
    const auto key = std::make_pair(alpha, k);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    const double h = solve(alpha, beta_at(k));
    cache_.emplace(key, h);
    return h;
  }

  bool feasible(int k) {
    const double h_low_alpha = span_cached(kAlphaStart, k);
    if (close(h_low_alpha)) throw Done{};
    if (h_low_alpha < target_) return false;
    const double h_cap = span_cached(alpha_cap_, k);
    if (close(h_cap)) throw Done{};
    return h_cap < target_;
  }

  TargetResult done() {
    best_.solves = solves_;
    return best_;
  }

  const SpanFunction& f_;
  ReliefParams params_;
  TargetRequest req_;
  const ProgressFunction& progress_;
  double target_;
  int solves_ = 0;
  double best_err_ = std::numeric_limits<double>::infinity();
  TargetResult best_;
  double delta_ = 0.0;
  double alpha_cap_ = 0.0;
  std::map<std::pair<double, int>, double> cache_;

 public:
  struct Done {};
  void set_delta(double d) { delta_ = d; }
  TargetResult finish() { return done(); }
};

TargetResult Search::run() {
  const double h_start = solve(params_.alpha, params_.beta);
  if (close(h_start)) return done();

  if (h_start < target_) {
    // Nearly uncompressed curvature weights give the tallest relief.
    const double h_max = solve(kMinAlpha, 1.0);
    if (h_max < target_ * (1.0 - kTolerance)) fail("target exceeds the tallest reachable relief");
    if (close(h_max)) return done();
  }

  // Past alpha_cap every k_norm / (alpha delta) is below 1e-3, so further
  // doubling only creeps along the x^beta tail.
  alpha_cap_ = delta_ > 0.0 ? 1e3 / delta_ : 1e3;

  // The beta schedule is 1e-5 * 2^k. Find its first element whose alpha
  // range [0.001, alpha_cap] straddles the target; the spans at the two
  // ends move apart as beta grows, so feasibility is monotone in k.
  int k_hi = kMaxBetaSteps;
  if (!feasible(k_hi)) fail("no beta in the schedule reaches the target");
  int k_lo = -1;  // infeasible (or unknown below 0)
  while (k_hi - k_lo > 1) {
    const int mid = (k_lo + k_hi) / 2;
    if (feasible(mid)) {
      k_hi = mid;
    } else {
      k_lo = mid;
    }
  }

  for (int k = k_hi; k <= kMaxBetaSteps; ++k) {
    const double beta = beta_at(k);
    double alpha = kAlphaStart;
    double h = span_cached(alpha, k);
    if (close(h)) return done();
    if (h < target_) continue;

    // Doubling phase: find alpha' with span(alpha') < target. At a
    // feasible beta the bracket lies below alpha_cap, so no stall guard
    // here: small alphas can leave the span flat before it starts to drop.
    bool bracketed = false;
    while (alpha <= alpha_cap_) {
      alpha *= 2.0;
      h = solve(alpha, beta);
      if (close(h)) return done();
      if (h < target_) {
        bracketed = true;
        break;
      }
    }
    if (!bracketed) continue;

    // span(lo) >= target > span(hi).
    double lo = alpha / 2.0;
    double hi = alpha;
    double prev = h;
    while (true) {
      const double mid = 0.5 * (lo + hi);
      h = solve(mid, beta);
      if (close(h)) return done();
      if (h < target_) {
        hi = mid;
      } else {
        lo = mid;
      }
      if (std::abs(h - prev) / req_.h0 <= kStallTolerance) break;
      prev = h;
    }
  }
  fail("beta schedule exhausted");
}

}  // namespace

TargetResult solve_for_height(const SpanFunction& span_of, const ReliefParams& start, const TargetRequest& req,
                              const ProgressFunction& progress) {
  return solve_for_height(span_of, start, req, 0.0, progress);
}

TargetResult solve_for_height(const SpanFunction& span_of, const ReliefParams& start, const TargetRequest& req,
                              double delta, const ProgressFunction& progress) {
  start.validate();
  if (!(req.h0 > 0.0) || !std::isfinite(req.h0)) {
    throw Error(ErrorCode::InvalidArgument, "target height must be positive");
  }
  if (req.max_solves < 1) throw Error(ErrorCode::InvalidArgument, "max_solves must be positive");
  Search search(span_of, start, req, progress);
  search.set_delta(delta);
  try {
    return search.run();
  } catch (const Search::Done&) {
    return search.finish();
  }
}

TargetResult solve_for_height(const Session& session, const ReliefParams& start, const TargetRequest& req,
                              const ProgressFunction& progress) {
  return solve_for_height([&](const ReliefParams& p) { return session.solve_controls(p).heights.span; }, start,
                          req, session.controls().delta, progress);
}

}  // namespace relief
