#pragma once

#include <functional>

#include "relief/compression.hpp"

namespace relief {

class Session;

struct TargetRequest {
  /// Desired final span; the control solve aims at (1 - gamma) h0 so the
  /// detail pass can add the rest.
  double h0 = 0.0;
  int max_solves = 200;
};

struct TargetProgress {
  int solves = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double span = 0.0;
};

struct TargetResult {
  double alpha = 0.0;
  double beta = 0.0;
  /// Control-solve span at (alpha, beta) and the span aimed for.
  double span = 0.0;
  double target_span = 0.0;
  int solves = 0;
};

using SpanFunction = std::function<double(const ReliefParams&)>;
using ProgressFunction = std::function<void(const TargetProgress&)>;

/// Doubles alpha from 0.001 until the span drops below the target, then
/// bisects between the last two alphas; an outer loop doubles beta from
/// 1e-5 until the span lands within 1% of the target. `start` supplies
/// gamma and the base, and is returned as-is when already within 1%.
/// Throws TargetUnreachable when no alpha can reach the target or the
/// solve budget runs out.
TargetResult solve_for_height(const SpanFunction& span_of, const ReliefParams& start, const TargetRequest& req,
                              const ProgressFunction& progress = {});

/// `delta` is the curvature spread the weights are scaled by; it sets the
/// largest alpha worth trying (0 when unknown).
TargetResult solve_for_height(const SpanFunction& span_of, const ReliefParams& start, const TargetRequest& req,
                              double delta, const ProgressFunction& progress = {});

TargetResult solve_for_height(const Session& session, const ReliefParams& start, const TargetRequest& req,
                              const ProgressFunction& progress = {});

}  // namespace relief
