#pragma once

#include "bqr/blocks.hpp"
#include "bqr/socp.hpp"

#include <string>
#include <vector>

namespace bqr {

struct CcpOptions {
  Order q = 2.0;
  int max_iterations = 20;
  // Stop when the relative change of ||v||_{2,q} falls below this.
  double tolerance = 1e-6;
  // t0 = 1 / (slack * ||x0||_{2,1}).
  double t0_slack = 100.0;
  // Floor on block norms in the linearization when 1 < q < 2.
  double smoothing = 1e-10;
  SplittingOptions subproblem;
};

enum class RecoveryStatus { Converged, MaxIterations, Degenerate, SubproblemFailure };
std::string to_string(RecoveryStatus status);

struct SubproblemSummary {
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIterations;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
};

struct RecoveryResult {
  Vector x;
  Vector initial;             // block basis pursuit initializer
  std::vector<double> trace;  // ||v||_{2,q} per outer iteration, starting at the initializer
  std::vector<SubproblemSummary> subproblems;
  int iterations = 0;
  double t0 = 0.0;  // in the internal units where ||y||_2 = 1
  RecoveryStatus status = RecoveryStatus::MaxIterations;
};

// Gradient of v -> ||v||_{2,q} for 1 < q < inf; for q = inf the unit
// direction of the largest block (lowest index on ties). Blocks below
// `smoothing` are floored when 1 < q < 2. Throws for v = 0.
Vector l2q_gradient(const BlockPartition& p, const ConstVectorRef& v, Order q,
                    double smoothing = 1e-10);

// 1 / (slack * ||x0||_{2,1}).
double choose_t0(const BlockPartition& p, const ConstVectorRef& x0, double slack);

// Minimizes the block q-ratio sparsity over the measurement-feasible set by
// the convex-concave procedure on the (v, t) reformulation, started from the
// block basis pursuit solution.
RecoveryResult ccp_recover(const Problem& problem, const CcpOptions& opts = {});

}  // namespace bqr
