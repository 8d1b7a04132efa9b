#pragma once

#include "bqr/blocks.hpp"
#include "bqr/socp.hpp"

#include <vector>

namespace bqr {

struct GroupLassoOptions {
  int max_iterations = 100000;
  // Stop when the KKT residual is below tolerance * ||A^T y||_{2,inf}.
  double tolerance = 1e-6;
  // Geometric continuation from ||A^T y||_{2,inf} down to lambda.
  double continuation_factor = 0.5;
};

// Reweighting and DCA compare objective values across successive solves, so
// their subproblems run to tighter residuals than the conic defaults.
inline SplittingOptions tight_subproblem() {
  SplittingOptions o;
  o.abs_tol = 1e-10;
  o.rel_tol = 1e-8;
  o.max_iterations = 50000;
  return o;
}

struct IrlsOptions {
  int iterations = 10;
  // Initial smoothing, relative to ||z0||_{2,inf}.
  double epsilon0 = 1.0;
  double epsilon_decay = 10.0;
  double epsilon_min = 1e-8;
  SplittingOptions subproblem = tight_subproblem();
};

struct DcaOptions {
  int max_iterations = 50;
  // Stop when ||z_{k+1} - z_k||_2 <= tolerance * ||z_k||_2.
  double tolerance = 1e-6;
  SplittingOptions subproblem = tight_subproblem();
};

struct BaselineResult {
  Vector z;
  int iterations = 0;
  bool converged = false;
  // Per-iteration objective: group lasso final value only; l2/lp the smoothed
  // sum_j (||z_j|| / ||z0||_{2,inf} + eps_k)^p; DCA ||z||_{2,1} - ||z||_2.
  std::vector<double> trace;
  double residual = 0.0;  // group lasso KKT residual; constraint violation otherwise
};

// min 1/2 ||y - A z||^2 + lambda ||z||_{2,1} by FISTA with adaptive restart.
BaselineResult group_lasso(const Matrix& A, const Vector& y, const BlockPartition& p,
                           double lambda, const GroupLassoOptions& opts = {});

double group_lasso_objective(const Matrix& A, const Vector& y, const BlockPartition& p,
                             double lambda, const ConstVectorRef& z);

// max over blocks of the distance of -A^T(Az - y) to lambda * subdiff ||z_j||.
double group_lasso_kkt(const Matrix& A, const Vector& y, const BlockPartition& p, double lambda,
                       const ConstVectorRef& z);

// Approximate min ||z||_{2,p}^p over the feasible set by reweighted l2,1.
BaselineResult l2lp_recover(const Problem& problem, double p, const IrlsOptions& opts = {});

// DCA for min ||z||_{2,1} - ||z||_2 over the feasible set, started from block BP.
BaselineResult l2_l1m2_recover(const Problem& problem, const DcaOptions& opts = {});

}  // namespace bqr
