#include "bqr/socp.hpp"

#include "bqr/prox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace bqr {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::None: return "none";
    case NoiseKind::L2: return "l2";
    case NoiseKind::L2Inf: return "l2inf";
  }
  return "unknown";
}

NoiseKind noise_kind_from_string(const std::string& name) {
  if (name == "none") return NoiseKind::None;
  if (name == "l2") return NoiseKind::L2;
  if (name == "l2inf") return NoiseKind::L2Inf;
  throw std::invalid_argument("unknown noise kind '" + name + "' (expected none|l2|l2inf)");
}

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max_iterations";
    case SolveStatus::InfeasibleSuspected: return "infeasible_suspected";
  }
  return "unknown";
}

namespace {

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double top_eigenvalue(const Matrix& gram) {
  const Eigen::Index n = gram.rows();
  if (n == 0) return 0.0;
  Vector v = Vector::LinSpaced(n, 1.0, 2.0);
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    Vector next = gram * v;
    const double nrm = next.norm();
    if (nrm == 0.0) return 0.0;
    const double updated = v.dot(next);
    v = next / nrm;
    if (std::abs(updated - lambda) <= 1e-10 * std::abs(updated)) return updated;
    lambda = updated;
  }
  return lambda;
}

double joint_norm(const Vector& a, const Vector& b) {
  return std::sqrt(a.squaredNorm() + b.squaredNorm());
}

void validate_problem(const Matrix& A, const Vector& y, const BlockPartition& p,
                      NoiseModel noise) {
  if (A.cols() != p.size()) {
    throw std::invalid_argument("measurement matrix has " + std::to_string(A.cols()) +
                                " columns but the partition covers " + std::to_string(p.size()));
  }
  if (A.rows() != y.size()) throw std::invalid_argument("measurement vector length mismatch");
  if (!(noise.level >= 0.0)) throw std::invalid_argument("noise level must be nonnegative");
  if (!A.allFinite() || !y.allFinite()) throw std::invalid_argument("non-finite problem data");
}

// Moves z along d = A^+ (b - A z) by the smallest step that brings the
// residual r = b - A z inside the measurement set at `level`. Along d the
// range part of r shrinks linearly and A^T r scales by (1 - step).
void restore_feasibility(const Matrix& A, const Eigen::CompleteOrthogonalDecomposition<Matrix>& pinv,
                         const BlockPartition& p, NoiseKind kind, const Vector& b, double level,
                         Vector& z) {
  const Vector r = b - A * z;
  double step = 1.0;
  switch (kind) {
    case NoiseKind::None:
      break;
    case NoiseKind::L2: {
      const double nr = r.norm();
      if (nr <= level) return;
      const Vector pr = A * pinv.solve(r);
      const double npr = pr.norm();
      if (npr == 0.0) return;
      const double room = level * level - (r - pr).squaredNorm();
      step = 1.0 - std::sqrt(std::max(room, 0.0)) / npr;
      break;
    }
    case NoiseKind::L2Inf: {
      const double worst = p.block_norms(A.transpose() * r).maxCoeff();
      if (worst <= level) return;
      step = 1.0 - level / worst;
      break;
    }
  }
  z += std::clamp(step, 0.0, 1.0) * pinv.solve(r);
}

}  // namespace

// ---------------------------------------------------------------------------
// GraphSplitting

GraphSplitting::GraphSplitting(Matrix coupling) : k_(std::move(coupling)) {
  wide_ = k_.rows() < k_.cols();
  Matrix gram = wide_ ? Matrix(k_ * k_.transpose()) : Matrix(k_.transpose() * k_);
  const double top = top_eigenvalue(gram);
  sigma_ = top > 0.0 ? std::sqrt(top) : 1.0;
  k_ /= sigma_;
  gram /= sigma_ * sigma_;
  gram.diagonal().array() += 1.0;
  llt_.compute(gram);
  if (llt_.info() != Eigen::Success) throw std::runtime_error("graph projection factorization failed");
}

void GraphSplitting::project_graph(const Vector& c, const Vector& d, Vector& x, Vector& w) const {
  if (wide_) {
    const Vector r = d - k_ * c;
    x = c + k_.transpose() * llt_.solve(r);
  } else {
    x = llt_.solve(c + k_.transpose() * d);
  }
  w.noalias() = k_ * x;
}

void GraphSplitting::seed(SplittingState& state, const Vector& x, double rho) const {
  state.x = x;
  state.w = k_ * x;
  state.x_dual = Vector::Zero(x.size());
  state.w_dual = Vector::Zero(state.w.size());
  state.x_prox = state.x;
  state.w_prox = state.w;
  state.rho = rho;
}

SplittingReport GraphSplitting::solve(const ProxF& prox_f, const ProjectG& project_g,
                                      SplittingState& state, const SplittingOptions& opts) const {
  const Eigen::Index n = k_.cols();
  const Eigen::Index mk = k_.rows();
  if (!state.initialized()) seed(state, Vector::Zero(n), opts.rho);
  if (state.x.size() != n || state.w.size() != mk) {
    throw std::invalid_argument("splitting state does not match the coupling matrix");
  }
  if (!(state.rho > 0.0)) state.rho = opts.rho;

  const double alpha = opts.relaxation;
  const double sqrt_dim = std::sqrt(static_cast<double>(n + mk));
  double& rho = state.rho;

  Vector x_half(n), w_half(mk), xr(n), wr(mk), x_prev(n), w_prev(mk);
  Vector c(n), d(mk);

  SplittingReport report;
  double best_score = std::numeric_limits<double>::infinity();
  int last_improvement = 0;

  for (int it = 1; it <= opts.max_iterations; ++it) {
    c = state.x - state.x_dual;
    prox_f(c, rho, x_half);
    w_half = sigma_ * (state.w - state.w_dual);
    project_g(w_half);
    w_half /= sigma_;

    xr = alpha * x_half + (1.0 - alpha) * state.x;
    wr = alpha * w_half + (1.0 - alpha) * state.w;
    x_prev = state.x;
    w_prev = state.w;
    c = xr + state.x_dual;
    d = wr + state.w_dual;
    project_graph(c, d, state.x, state.w);
    state.x_dual += xr - state.x;
    state.w_dual += wr - state.w;

    const double r_pri = std::sqrt((x_half - state.x).squaredNorm() +
                                   (w_half - state.w).squaredNorm());
    const double r_dual = rho * std::sqrt((state.x - x_prev).squaredNorm() +
                                          (state.w - w_prev).squaredNorm());
    const double eps_pri =
        opts.abs_tol * sqrt_dim +
        opts.rel_tol * std::max(joint_norm(x_half, w_half), joint_norm(state.x, state.w));
    const double eps_dual =
        opts.abs_tol * sqrt_dim + opts.rel_tol * rho * joint_norm(state.x_dual, state.w_dual);

    report.iterations = it;
    report.primal_residual = r_pri;
    report.dual_residual = r_dual;
    state.x_prox = x_half;
    state.w_prox = w_half;

    if (r_pri <= eps_pri && r_dual <= eps_dual) {
      Vector kx = sigma_ * (k_ * x_half);
      Vector projected = kx;
      project_g(projected);
      report.feasibility = (kx - projected).norm();
      report.status = SolveStatus::Converged;
      return report;
    }

    const double score = std::max(r_pri / eps_pri, r_dual / eps_dual);
    if (score < 0.99 * best_score) {
      best_score = score;
      last_improvement = it;
    } else if (it - last_improvement >= opts.stall_window) {
      report.status = SolveStatus::InfeasibleSuspected;
      return report;
    }

    if (opts.adapt_interval > 0 && it % opts.adapt_interval == 0) {
      const double balance = (r_pri / eps_pri) / std::max(r_dual / eps_dual, 1e-300);
      double factor = 1.0;
      if (balance > 10.0 && rho * opts.adapt_factor <= opts.rho_max) {
        factor = opts.adapt_factor;
      } else if (balance < 0.1 && rho / opts.adapt_factor >= opts.rho_min) {
        factor = 1.0 / opts.adapt_factor;
      }
      if (factor != 1.0) {
        rho *= factor;
        state.x_dual /= factor;
        state.w_dual /= factor;
      }
    }
  }
  report.status = SolveStatus::MaxIterations;
  return report;
}

// ---------------------------------------------------------------------------
// CCP subproblem

namespace {

Matrix ccp_coupling(const Matrix& A, const Vector& y, const BlockPartition& p, NoiseModel noise,
                    double t_scale) {
  validate_problem(A, y, p, noise);
  const Eigen::Index m = A.rows();
  const Eigen::Index n = A.cols();
  switch (noise.kind) {
    case NoiseKind::None: {
      // w = A v - y t  in {0}
      Matrix k(m, n + 1);
      k.leftCols(n) = A;
      k.col(n) = -t_scale * y;
      return k;
    }
    case NoiseKind::L2: {
      // w = (y t - A v, eta t)  in SOC
      Matrix k = Matrix::Zero(m + 1, n + 1);
      k.topLeftCorner(m, n) = -A;
      k.block(0, n, m, 1) = t_scale * y;
      k(m, n) = t_scale * noise.level;
      return k;
    }
    case NoiseKind::L2Inf: {
      // w_j = ((A^T (y t - A v))[j], mu t)  in SOC for every block j
      const Matrix gram = A.transpose() * A;
      const Vector aty = A.transpose() * y;
      Matrix k = Matrix::Zero(n + p.num_blocks(), n + 1);
      Eigen::Index row = 0;
      for (int j = 0; j < p.num_blocks(); ++j) {
        const int dj = p.dim(j);
        const int off = p.offset(j);
        k.block(row, 0, dj, n) = -gram.middleRows(off, dj);
        k.block(row, n, dj, 1) = t_scale * aty.segment(off, dj);
        row += dj;
        k(row, n) = t_scale * noise.level;
        row += 1;
      }
      return k;
    }
  }
  throw std::logic_error("unreachable noise kind");
}

// Unit for t that equalizes its coupling column with the mean v column.
double t_unit(const Matrix& A, const Vector& y, const BlockPartition& p, NoiseModel noise) {
  const Matrix k = ccp_coupling(A, y, p, noise, 1.0);
  const Eigen::Index n = k.cols() - 1;
  const double t_col = k.col(n).norm();
  if (n == 0 || t_col == 0.0) return 1.0;
  return k.leftCols(n).colwise().norm().mean() / t_col;
}

}  // namespace

CcpSubproblemSolver::CcpSubproblemSolver(const Matrix& A, const Vector& y,
                                         BlockPartition partition, NoiseModel noise, double t0,
                                         SplittingOptions opts)
    : partition_(std::move(partition)),
      noise_(noise),
      t0_(t0),
      t_scale_(t_unit(A, y, partition_, noise)),
      opts_(opts),
      A_(A),
      y_(y),
      pinv_(A),
      splitting_(ccp_coupling(A, y, partition_, noise, t_scale_)) {
  if (!(t0 > 0.0)) throw std::invalid_argument("t0 must be positive");
}

void CcpSubproblemSolver::warm_start(const Vector& v, double t) {
  partition_.check(v);
  Vector x(v.size() + 1);
  x.head(v.size()) = v;
  x[v.size()] = std::max(t, t0_) / t_scale_;
  splitting_.seed(state_, x, state_.rho > 0.0 ? state_.rho : opts_.rho);
}

void CcpSubproblemSolver::project_measurement(Eigen::Ref<Vector> w) const {
  switch (noise_.kind) {
    case NoiseKind::None:
      w.setZero();
      return;
    case NoiseKind::L2: {
      const Eigen::Index m = w.size() - 1;
      double s = w[m];
      project_soc_inplace(w.head(m), s);
      w[m] = s;
      return;
    }
    case NoiseKind::L2Inf: {
      Eigen::Index row = 0;
      for (int j = 0; j < partition_.num_blocks(); ++j) {
        const int dj = partition_.dim(j);
        double s = w[row + dj];
        project_soc_inplace(w.segment(row, dj), s);
        w[row + dj] = s;
        row += dj + 1;
      }
      return;
    }
  }
}

ConicSolution CcpSubproblemSolver::solve(const ConstVectorRef& objective_v, double objective_t) {
  partition_.check(objective_v);
  const int n = partition_.size();
  const double tau0 = t0_ / t_scale_;
  if (!state_.initialized()) {
    Vector x = Vector::Zero(n + 1);
    x[n] = tau0;
    splitting_.seed(state_, x, opts_.rho);
  }

  const Vector cv = objective_v;
  const double ct = objective_t * t_scale_;
  auto prox = [&](const Vector& in, double rho, Vector& out) {
    out.head(n) = project_l21_ball(partition_, in.head(n) + cv / rho, 1.0);
    out[n] = std::max(tau0, in[n] + ct / rho);
  };
  auto project = [&](Eigen::Ref<Vector> w) { project_measurement(w); };

  const SplittingReport rep = splitting_.solve(prox, project, state_, opts_);

  ConicSolution sol;
  sol.v = state_.x_prox.head(n);
  sol.t = state_.x_prox[n] * t_scale_;
  restore_feasibility(A_, pinv_, partition_, noise_.kind, y_ * sol.t, noise_.level * sol.t, sol.v);
  // the correction may leave the l2,1 ball by a rounding-level amount
  const double radius = mixed_norm(partition_, sol.v, 1.0);
  if (radius > 1.0 && sol.t / radius >= t0_) {
    sol.v /= radius;
    sol.t /= radius;
  }
  sol.primal_residual = rep.primal_residual;
  sol.dual_residual = rep.dual_residual;
  sol.iterations = rep.iterations;
  sol.status = rep.status;
  sol.objective = cv.dot(sol.v) + objective_t * sol.t;
  return sol;
}

double CcpSubproblemSolver::constraint_violation(const Vector& v, double t) const {
  const Vector r = y_ * t - A_ * v;
  switch (noise_.kind) {
    case NoiseKind::None: return r.norm();
    case NoiseKind::L2: return std::max(0.0, r.norm() - noise_.level * t);
    case NoiseKind::L2Inf: {
      const Vector g = A_.transpose() * r;
      return std::max(0.0, partition_.block_norms(g).maxCoeff() - noise_.level * t);
    }
  }
  return 0.0;
}

ConicSolution solve_ccp_subproblem(const ConicProgram& prog, const SplittingOptions& opts,
                                   const std::optional<std::pair<Vector, double>>& warm) {
  if (prog.variant != ConicVariant::CcpSubproblem) {
    throw std::invalid_argument("solve_ccp_subproblem expects the CCP-subproblem variant");
  }
  if (prog.objective.size() != prog.partition.size() + 1) {
    throw std::invalid_argument("objective must have length N + 1");
  }
  CcpSubproblemSolver solver(prog.A, prog.y, prog.partition, prog.noise, prog.t0, opts);
  if (warm) solver.warm_start(warm->first, warm->second);
  const int n = prog.partition.size();
  return solver.solve(prog.objective.head(n), prog.objective[n]);
}

// ---------------------------------------------------------------------------
// Block basis pursuit

namespace {
constexpr double kBpCorrectionThreshold = 1e-7;  // in units where ||y||_2 = 1
}  // namespace

BlockBpSolver::BlockBpSolver(const Matrix& A, const Vector& y, BlockPartition partition,
                             NoiseModel noise, SplittingOptions opts)
    : partition_(std::move(partition)), noise_(noise), opts_(opts) {
  validate_problem(A, y, partition_, noise);
  y_scale_ = y.norm();
  A_ = A;
  if (y_scale_ == 0.0) return;
  y_ = y / y_scale_;
  noise_.level = noise.level / y_scale_;
  pinv_.compute(A);
  if (noise.kind == NoiseKind::L2Inf) {
    aty_ = A.transpose() * y_;
    splitting_.emplace(Matrix(A.transpose() * A));
  } else {
    splitting_.emplace(A);
  }
}

BpSolution BlockBpSolver::solve() {
  const Vector ones = Vector::Ones(partition_.num_blocks());
  const Vector zero = Vector::Zero(partition_.size());
  return solve(ones, zero);
}

BpSolution BlockBpSolver::solve(const ConstVectorRef& weights, const ConstVectorRef& linear) {
  if (weights.size() != partition_.num_blocks()) throw std::invalid_argument("one weight per block");
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("weights must be nonnegative");
  partition_.check(linear);

  BpSolution out;
  if (!splitting_) {
    out.z = Vector::Zero(partition_.size());
    out.report.status = SolveStatus::Converged;
    return out;
  }

  const Vector w = weights;
  const Vector lin = linear;
  Vector shifted(partition_.size()), thresholds(partition_.num_blocks());
  auto prox = [&](const Vector& in, double rho, Vector& res) {
    shifted = in + lin / rho;
    thresholds = w / rho;
    block_soft_threshold_weighted(partition_, shifted, thresholds, res);
  };
  auto project = [&](Eigen::Ref<Vector> v) {
    switch (noise_.kind) {
      case NoiseKind::None:
        v = y_;
        return;
      case NoiseKind::L2: {
        Vector r = v - y_;
        const double nr = r.norm();
        if (nr > noise_.level) v = y_ + (noise_.level / nr) * r;
        return;
      }
      case NoiseKind::L2Inf:
        for (int j = 0; j < partition_.num_blocks(); ++j) {
          auto vj = v.segment(partition_.offset(j), partition_.dim(j));
          const auto cj = aty_.segment(partition_.offset(j), partition_.dim(j));
          const double nr = (vj - cj).norm();
          if (nr > noise_.level) vj = cj + (noise_.level / nr) * (vj - cj);
        }
        return;
    }
  };

  out.report = splitting_->solve(prox, project, state_, opts_);
  Vector z = state_.x_prox;
  // corrections fill in zero blocks, so only solves that miss the tolerance get one
  if (measurement_violation(A_, y_, partition_, noise_, z) > kBpCorrectionThreshold) {
    restore_feasibility(A_, pinv_, partition_, noise_.kind, y_, noise_.level, z);
  }
  out.z = z * y_scale_;
  return out;
}

double BlockBpSolver::constraint_violation(const ConstVectorRef& z) const {
  const Vector y = y_scale_ > 0.0 ? Vector(y_ * y_scale_) : Vector::Zero(A_.rows());
  NoiseModel original = noise_;
  original.level = noise_.level * (y_scale_ > 0.0 ? y_scale_ : 1.0);
  return measurement_violation(A_, y, partition_, original, z);
}

Vector solve_block_bp(const Matrix& A, const Vector& y, const BlockPartition& partition,
                      NoiseModel noise, const SplittingOptions& opts) {
  BlockBpSolver solver(A, y, partition, noise, opts);
  return solver.solve().z;
}

double measurement_violation(const Matrix& A, const Vector& y, const BlockPartition& partition,
                             NoiseModel noise, const ConstVectorRef& z) {
  const Vector r = y - A * z;
  switch (noise.kind) {
    case NoiseKind::None: return r.norm();
    case NoiseKind::L2: return std::max(0.0, r.norm() - noise.level);
    case NoiseKind::L2Inf: {
      const Vector g = A.transpose() * r;
      return std::max(0.0, partition.block_norms(g).maxCoeff() - noise.level);
    }
  }
  return 0.0;
}

}  // namespace bqr
