#include "bqr/baselines.hpp"

#include "bqr/prox.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bqr {

namespace {

double spectral_norm_squared(const Matrix& A) {
  const bool wide = A.rows() < A.cols();
  const Matrix gram = wide ? Matrix(A * A.transpose()) : Matrix(A.transpose() * A);
  Vector v = Vector::LinSpaced(gram.rows(), 1.0, 2.0).normalized();
  double lambda = 0.0;
  for (int it = 0; it < 500; ++it) {
    Vector next = gram * v;
    const double nrm = next.norm();
    if (nrm == 0.0) return 0.0;
    const double updated = v.dot(next);
    v = next / nrm;
    if (std::abs(updated - lambda) <= 1e-12 * updated) return updated;
    lambda = updated;
  }
  return lambda;
}

}  // namespace

double group_lasso_objective(const Matrix& A, const Vector& y, const BlockPartition& p,
                             double lambda, const ConstVectorRef& z) {
  return 0.5 * (y - A * z).squaredNorm() + lambda * mixed_norm(p, z, 1.0);
}

double group_lasso_kkt(const Matrix& A, const Vector& y, const BlockPartition& p, double lambda,
                       const ConstVectorRef& z) {
  const Vector grad = A.transpose() * (A * z - y);
  double worst = 0.0;
  for (int j = 0; j < p.num_blocks(); ++j) {
    const auto zj = z.segment(p.offset(j), p.dim(j));
    const auto gj = grad.segment(p.offset(j), p.dim(j));
    const double nz = zj.norm();
    const double r = nz > 0.0 ? (gj + (lambda / nz) * zj).norm()
                              : std::max(0.0, gj.norm() - lambda);
    worst = std::max(worst, r);
  }
  return worst;
}

BaselineResult group_lasso(const Matrix& A, const Vector& y, const BlockPartition& p,
                           double lambda, const GroupLassoOptions& opts) {
  if (!(lambda > 0.0)) throw std::invalid_argument("group lasso needs lambda > 0");
  if (A.cols() != p.size() || A.rows() != y.size()) {
    throw std::invalid_argument("group lasso: dimension mismatch");
  }
  BaselineResult out;
  out.z = Vector::Zero(p.size());
  const Vector aty = A.transpose() * y;
  const double top = p.block_norms(aty).maxCoeff();
  if (lambda >= top) {
    out.converged = true;
    out.trace.push_back(group_lasso_objective(A, y, p, lambda, out.z));
    return out;
  }

  const double lipschitz = spectral_norm_squared(A);
  const double step = 1.0 / lipschitz;
  const double tol = opts.tolerance * top;
  const Matrix gram = A.transpose() * A;

  Vector z = out.z, prev = z, u = z, grad(p.size());
  double stage = std::max(lambda, top * opts.continuation_factor);
  int it = 0;
  for (;;) {
    double momentum = 1.0;
    const bool last_stage = stage == lambda;
    const double stage_tol = last_stage ? tol : std::max(tol, 1e-3 * stage);
    while (it < opts.max_iterations) {
      ++it;
      grad.noalias() = gram * u - aty;
      prev = z;
      z = block_soft_threshold(p, u - step * grad, step * stage);
      const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      // Gradient-based adaptive restart.
      if ((u - z).dot(z - prev) > 0.0) {
        momentum = 1.0;
        u = z;
      } else {
        u = z + ((momentum - 1.0) / next_momentum) * (z - prev);
        momentum = next_momentum;
      }
      if (it % 10 == 0 && group_lasso_kkt(A, y, p, stage, z) <= stage_tol) break;
    }
    if (last_stage || it >= opts.max_iterations) break;
    stage = std::max(lambda, stage * opts.continuation_factor);
  }

  out.z = z;
  out.iterations = it;
  out.residual = group_lasso_kkt(A, y, p, lambda, z);
  out.converged = out.residual <= tol;
  out.trace.push_back(group_lasso_objective(A, y, p, lambda, z));
  return out;
}

BaselineResult l2lp_recover(const Problem& problem, double pexp, const IrlsOptions& opts) {
  if (!(pexp > 0.0 && pexp < 1.0)) throw std::invalid_argument("l2/lp needs p in (0, 1)");
  if (opts.iterations < 1 || !(opts.epsilon0 > 0.0) || !(opts.epsilon_decay >= 1.0) ||
      !(opts.epsilon_min > 0.0)) {
    throw std::invalid_argument("invalid reweighting schedule");
  }
  const BlockPartition& p = problem.partition;
  BlockBpSolver solver(problem.A, problem.y, p, problem.noise, opts.subproblem);
  BaselineResult out;
  out.z = solver.solve().z;
  const double top = p.block_norms(out.z).maxCoeff();
  if (!(top > 0.0)) {
    out.converged = true;
    return out;
  }

  const Vector zero = Vector::Zero(p.size());
  double eps = opts.epsilon0;
  // Smoothed objective sum_j (||z_j|| / top + eps)^p, non-increasing along the iterations.
  auto smoothed = [&](const Vector& z, double e) {
    return (p.block_norms(z).array() / top + e).pow(pexp).sum();
  };
  out.trace.push_back(smoothed(out.z, eps));
  out.converged = true;
  for (int k = 0; k < opts.iterations; ++k) {
    const Vector norms = p.block_norms(out.z);
    Vector weights = (norms.array() / top + eps).pow(pexp - 1.0).matrix();
    weights /= weights.minCoeff();
    const BpSolution sol = solver.solve(weights, zero);
    if (sol.report.status == SolveStatus::InfeasibleSuspected) {
      out.converged = false;
      break;
    }
    out.z = sol.z;
    out.iterations = k + 1;
    out.trace.push_back(smoothed(out.z, eps));
    eps = std::max(eps / opts.epsilon_decay, opts.epsilon_min);
  }
  out.residual = solver.constraint_violation(out.z);
  return out;
}

BaselineResult l2_l1m2_recover(const Problem& problem, const DcaOptions& opts) {
  if (opts.max_iterations < 1 || !(opts.tolerance > 0.0)) {
    throw std::invalid_argument("invalid DCA options");
  }
  const BlockPartition& p = problem.partition;
  BlockBpSolver solver(problem.A, problem.y, p, problem.noise, opts.subproblem);
  BaselineResult out;
  out.z = solver.solve().z;
  auto objective = [&](const Vector& z) { return mixed_norm(p, z, 1.0) - z.norm(); };
  out.trace.push_back(objective(out.z));

  const Vector ones = Vector::Ones(p.num_blocks());
  for (int k = 0; k < opts.max_iterations; ++k) {
    const double nz = out.z.norm();
    if (nz == 0.0) {
      out.converged = true;
      break;
    }
    const BpSolution sol = solver.solve(ones, out.z / nz);
    if (sol.report.status == SolveStatus::InfeasibleSuspected) break;
    const double change = (sol.z - out.z).norm();
    out.z = sol.z;
    out.iterations = k + 1;
    out.trace.push_back(objective(out.z));
    if (change <= opts.tolerance * nz) {
      out.converged = true;
      break;
    }
  }
  out.residual = solver.constraint_violation(out.z);
  return out;
}

}  // namespace bqr
