#include "bqr/ccp.hpp"

#include <cmath>
#include <stdexcept>

namespace bqr {

std::string to_string(RecoveryStatus status) {
  switch (status) {
    case RecoveryStatus::Converged: return "converged";
    case RecoveryStatus::MaxIterations: return "max_iterations";
    case RecoveryStatus::Degenerate: return "degenerate";
    case RecoveryStatus::SubproblemFailure: return "subproblem_failure";
  }
  return "unknown";
}

Vector l2q_gradient(const BlockPartition& p, const ConstVectorRef& v, Order q, double smoothing) {
  if (!q.is_infinite() && !(q.value() > 1.0)) {
    throw std::invalid_argument("l2q_gradient needs q > 1");
  }
  const Vector norms = p.block_norms(v);
  if (!(norms.maxCoeff() > 0.0)) throw std::domain_error("l2q_gradient is undefined at v = 0");

  Vector grad = Vector::Zero(v.size());
  if (q.is_infinite()) {
    Eigen::Index top = 0;
    norms.maxCoeff(&top);
    const int j = static_cast<int>(top);
    grad.segment(p.offset(j), p.dim(j)) = v.segment(p.offset(j), p.dim(j)) / norms[j];
    return grad;
  }

  const double qv = q.value();
  const double total = mixed_norm(p, v, q);
  for (int j = 0; j < p.num_blocks(); ++j) {
    if (norms[j] == 0.0) continue;
    const double nj = qv < 2.0 ? std::max(norms[j], smoothing) : norms[j];
    // ||v||^{1-q} ||v_j||^{q-2} v_j, written as ratios to stay finite for large q.
    const double factor = std::pow(nj / total, qv - 2.0) / total;
    grad.segment(p.offset(j), p.dim(j)) = factor * v.segment(p.offset(j), p.dim(j));
  }
  return grad;
}

double choose_t0(const BlockPartition& p, const ConstVectorRef& x0, double slack) {
  if (!(slack > 1.0)) throw std::invalid_argument("t0 slack must exceed 1");
  const double l21 = mixed_norm(p, x0, 1.0);
  if (!(l21 > 0.0)) throw std::domain_error("choose_t0 needs a nonzero initializer");
  return 1.0 / (slack * l21);
}

namespace {

void validate(const CcpOptions& opts) {
  if (!opts.q.is_infinite() && !(opts.q.value() > 1.0)) {
    throw std::invalid_argument("CCP requires q > 1");
  }
  if (opts.max_iterations < 1) throw std::invalid_argument("max_iterations must be positive");
  if (!(opts.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (!(opts.smoothing > 0.0)) throw std::invalid_argument("smoothing must be positive");
  if (!(opts.t0_slack > 1.0)) throw std::invalid_argument("t0 slack must exceed 1");
}

}  // namespace

RecoveryResult ccp_recover(const Problem& problem, const CcpOptions& opts) {
  validate(opts);
  const BlockPartition& p = problem.partition;
  if (!(problem.noise.level >= 0.0)) throw std::invalid_argument("noise level must be nonnegative");

  RecoveryResult result;
  const double scale = problem.y.norm();
  if (scale == 0.0) {
    if (problem.A.cols() != p.size()) throw std::invalid_argument("matrix/partition mismatch");
    result.x = Vector::Zero(p.size());
    result.initial = result.x;
    result.status = RecoveryStatus::Degenerate;
    return result;
  }

  const Vector y = problem.y / scale;
  NoiseModel noise = problem.noise;
  noise.level /= scale;

  BlockBpSolver bp(problem.A, y, p, noise, opts.subproblem);
  const BpSolution init = bp.solve();
  result.initial = init.z * scale;
  const double l21 = mixed_norm(p, init.z, 1.0);
  if (!(l21 > 0.0)) {
    result.x = Vector::Zero(p.size());
    result.status = RecoveryStatus::Degenerate;
    return result;
  }

  Vector v = init.z / l21;
  double t = 1.0 / l21;
  result.t0 = choose_t0(p, init.z, opts.t0_slack);

  CcpSubproblemSolver sub(problem.A, y, p, noise, result.t0, opts.subproblem);
  sub.warm_start(v, t);

  double value = mixed_norm(p, v, opts.q);
  result.trace.push_back(value);
  result.status = RecoveryStatus::MaxIterations;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Vector grad = l2q_gradient(p, v, opts.q, opts.smoothing);
    const ConicSolution sol = sub.solve(grad);
    result.subproblems.push_back(
        {sol.iterations, sol.status, sol.primal_residual, sol.dual_residual, sol.objective});
    result.iterations = it;
    if (sol.status == SolveStatus::InfeasibleSuspected) {
      result.status = RecoveryStatus::SubproblemFailure;
      break;
    }
    v = sol.v;
    t = sol.t;
    const double next = mixed_norm(p, v, opts.q);
    result.trace.push_back(next);
    const bool settled = std::abs(next - value) <= opts.tolerance * std::abs(value);
    value = next;
    if (settled) {
      result.status = RecoveryStatus::Converged;
      break;
    }
  }

  result.x = (v / t) * scale;
  return result;
}

}  // namespace bqr
