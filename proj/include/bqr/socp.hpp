#pragma once

#include "bqr/blocks.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <functional>
#include <optional>
#include <string>

namespace bqr {

enum class NoiseKind { None, L2, L2Inf };

// Feasible-set model for the measurements: exact (Az = y), l2-bounded
// (||y - Az||_2 <= level) or l2,inf-bounded (||A^T(y - Az)||_{2,inf} <= level).
struct NoiseModel {
  NoiseKind kind = NoiseKind::None;
  double level = 0.0;

  static NoiseModel none() { return {}; }
  static NoiseModel l2(double eta) { return {NoiseKind::L2, eta}; }
  static NoiseModel l2inf(double mu) { return {NoiseKind::L2Inf, mu}; }
};

// Measurement model y = A x + e with the feasible set implied by noise.
struct Problem {
  Matrix A;
  Vector y;
  BlockPartition partition;
  NoiseModel noise;
};

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

struct SplittingOptions {
  double abs_tol = 1e-8;
  double rel_tol = 1e-6;
  int max_iterations = 20000;
  // Over-relaxation parameter in (0, 2).
  double relaxation = 1.6;
  double rho = 1.0;
  int adapt_interval = 100;
  double adapt_factor = 2.0;
  double rho_min = 1e-4;
  double rho_max = 1e4;
  // Iterations without a 1% improvement of the best scaled residual before
  // giving up with InfeasibleSuspected.
  int stall_window = 2000;
};

enum class SolveStatus { Converged, MaxIterations, InfeasibleSuspected };
std::string to_string(SolveStatus status);

// Iterates of the graph-form splitting; reusable as a warm start while the
// coupling matrix stays fixed.
struct SplittingState {
  Vector x, w;            // graph-projected iterate
  Vector x_dual, w_dual;  // scaled duals
  Vector x_prox, w_prox;  // last proximal iterates (f- and g-feasible)
  double rho = 0.0;
  bool initialized() const { return x.size() > 0; }
};

struct SplittingReport {
  SolveStatus status = SolveStatus::MaxIterations;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  // Distance of K x to dom g at the returned x (original units) before any
  // feasibility correction; set when the residual test passes.
  double feasibility = 0.0;
};

// Solves  min f(x) + g(w)  s.t.  w = K x  where g is the indicator of a
// closed convex set, by alternating proximal steps with Euclidean projection
// onto the graph {(x, w) : w = K x}. K is rescaled internally to unit
// spectral norm; the factorization of the graph projection is computed once
// and shared by every solve. Distinct solves on one instance are independent
// but each solve mutates only the state it is given.
class GraphSplitting {
 public:
  // prox(in, rho, out): out = argmin f(x) + rho/2 ||x - in||^2.
  using ProxF = std::function<void(const Vector& in, double rho, Vector& out)>;
  // In-place Euclidean projection onto dom g, in the original (unscaled) w units.
  using ProjectG = std::function<void(Eigen::Ref<Vector> w)>;

  explicit GraphSplitting(Matrix coupling);

  int num_variables() const { return static_cast<int>(k_.cols()); }
  int num_constraints() const { return static_cast<int>(k_.rows()); }
  double scale() const { return sigma_; }

  // Seeds the state from a primal guess x (w = K x, zero duals).
  void seed(SplittingState& state, const Vector& x, double rho) const;

  SplittingReport solve(const ProxF& prox_f, const ProjectG& project_g, SplittingState& state,
                        const SplittingOptions& opts) const;

  // K x in original units.
  Vector apply(const Vector& x) const { return sigma_ * (k_ * x); }

 private:
  void project_graph(const Vector& c, const Vector& d, Vector& x, Vector& w) const;

  Matrix k_;  // scaled coupling K / sigma
  double sigma_ = 1.0;
  bool wide_ = true;  // factor I + K K^T when rows < cols
  Eigen::LLT<Matrix> llt_;
};

enum class ConicVariant { CcpSubproblem, BlockBp };

// maximize c^T (v, t)  s.t.  t >= t0, ||v||_{2,1} <= 1 and the homogenized
// measurement constraint (ConicVariant::CcpSubproblem).
struct ConicProgram {
  Vector objective;  // length N + 1; last entry multiplies t
  Matrix A;
  Vector y;
  BlockPartition partition;
  NoiseModel noise;
  double t0 = 1.0;
  ConicVariant variant = ConicVariant::CcpSubproblem;
};

struct ConicSolution {
  Vector v;
  double t = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;
  int iterations = 0;
  SolveStatus status = SolveStatus::MaxIterations;
};

// Reusable solver for the CCP subproblem on a fixed (A, y, noise, t0).
// The coupling factorization is built once; successive solves warm-start
// from the previous iterate. t is iterated in a unit that gives its column
// of the coupling matrix the mean norm of the v columns. Returned points are
// moved along the minimum-norm correction A^+ (y t - A v) until the
// measurement constraint holds.
class CcpSubproblemSolver {
 public:
  CcpSubproblemSolver(const Matrix& A, const Vector& y, BlockPartition partition,
                      NoiseModel noise, double t0, SplittingOptions opts = {});

  void warm_start(const Vector& v, double t);
  ConicSolution solve(const ConstVectorRef& objective_v, double objective_t = 0.0);

  const SplittingOptions& options() const { return opts_; }
  // Violation of the measurement constraint at (v, t), in homogenized form.
  double constraint_violation(const Vector& v, double t) const;

 private:
  void project_measurement(Eigen::Ref<Vector> w) const;

  BlockPartition partition_;
  NoiseModel noise_;
  double t0_;
  double t_scale_;
  SplittingOptions opts_;
  Matrix A_;
  Vector y_;
  Eigen::CompleteOrthogonalDecomposition<Matrix> pinv_;
  GraphSplitting splitting_;
  SplittingState state_;
};

ConicSolution solve_ccp_subproblem(const ConicProgram& prog, const SplittingOptions& opts = {},
                                   const std::optional<std::pair<Vector, double>>& warm = {});

struct BpSolution {
  Vector z;
  SplittingReport report;
};

// min sum_j weight_j ||z[j]||_2 - <linear, z>  over the measurement-feasible
// set. Plain block basis pursuit uses unit weights and no linear term. The
// problem is normalized by ||y||_2 internally, which makes the output
// positively homogeneous in (y, level).
class BlockBpSolver {
 public:
  BlockBpSolver(const Matrix& A, const Vector& y, BlockPartition partition, NoiseModel noise,
                SplittingOptions opts = {});

  BpSolution solve();
  BpSolution solve(const ConstVectorRef& weights, const ConstVectorRef& linear);

  const BlockPartition& partition() const { return partition_; }
  // Measurement-constraint violation of z (0 when feasible).
  double constraint_violation(const ConstVectorRef& z) const;

 private:
  BlockPartition partition_;
  NoiseModel noise_;
  SplittingOptions opts_;
  double y_scale_;
  Matrix A_;
  Vector y_;      // normalized
  Vector aty_;    // A^T y (normalized), l2,inf model only
  Eigen::CompleteOrthogonalDecomposition<Matrix> pinv_;
  std::optional<GraphSplitting> splitting_;
  SplittingState state_;
};

// Mixed l2/l1 minimization (block basis pursuit / block BPDN / block Dantzig).
Vector solve_block_bp(const Matrix& A, const Vector& y, const BlockPartition& partition,
                      NoiseModel noise, const SplittingOptions& opts = {});

// Measurement-constraint violation of z for any noise model: max(0, residual - level).
double measurement_violation(const Matrix& A, const Vector& y, const BlockPartition& partition,
                             NoiseModel noise, const ConstVectorRef& z);

}  // namespace bqr
