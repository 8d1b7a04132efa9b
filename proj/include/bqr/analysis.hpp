#pragma once

#include "bqr/blocks.hpp"
#include "bqr/socp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bqr {

enum class BcmsvMethod { Multistart, Brute };
std::string to_string(BcmsvMethod method);

struct BcmsvOptions {
  int max_iterations = 300;
  int threads = 1;
  // Feasible starting points tried in addition to the random ones (for
  // example a witness found at a smaller level).
  std::vector<Vector> extra_starts;
};

struct BcmsvEstimate {
  Order q = 2.0;
  double s = 1.0;
  double beta = 0.0;
  Vector witness;  // ||witness||_{2,q} = 1, k_q(witness) <= s
  BcmsvMethod method = BcmsvMethod::Multistart;
  int starts = 0;
};

// Upper bound on min ||A z||_2 / ||z||_{2,q} over k_q(z) <= s by projected
// gradient descent from single-block singular vectors plus `starts` random
// feasible points. Deterministic for a fixed seed regardless of threads.
BcmsvEstimate estimate_bcmsv(const Matrix& A, const BlockPartition& p, Order q, double s,
                             int starts, std::uint64_t seed, const BcmsvOptions& opts = {});

// Dense random sampling of the sphere followed by the same local descent on
// the best samples; meant for tiny instances.
BcmsvEstimate bcmsv_brute_force(const Matrix& A, const BlockPartition& p, Order q, double s,
                                int samples, std::uint64_t seed);

// Feasibility restoration used by the estimator: scales to ||z||_{2,q} = 1
// after shrinking small blocks until k_q(z) <= s.
Vector restrict_level(const BlockPartition& p, const ConstVectorRef& z, Order q, double s);

enum class NspStatus { HoldsVacuously, LikelyHolds, Fails };
std::string to_string(NspStatus status);

struct NspVerdict {
  NspStatus status = NspStatus::HoldsVacuously;
  // 3^{q/(1-q)} * min k_q(h) found over the kernel (infinite for a trivial kernel).
  double estimate = 0.0;
  Vector witness;  // kernel element attaining the estimate, unit l2 norm
  int kernel_dimension = 0;
};

// Tests k < inf_{h in ker A \ 0} 3^{q/(1-q)} k_q(h). A FAILS verdict is
// certified by its witness; LIKELY_HOLDS rests on a sampled upper bound.
NspVerdict check_nsp_sufficient(const Matrix& A, const BlockPartition& p, Order q, double k,
                                int samples, std::uint64_t seed);

// Orthonormal basis of ker A (columns).
Matrix kernel_basis(const Matrix& A);

enum class Theorem { T1, T2, T3, T4 };
std::string to_string(Theorem id);
Theorem theorem_from_string(const std::string& name);

struct BoundInputs {
  double k = 1.0;
  Order q = 2.0;
  NoiseKind noise = NoiseKind::L2;  // T1/T2: l2 (eta) or l2inf (mu)
  double noise_level = 0.0;
  double lambda = 0.0;  // T3/T4
  double kappa = 0.5;   // T3/T4
  double beta = 1.0;    // BCMSV at the level the theorem requires
  // T4 threshold uses the BCMSV at level (3/(1-kappa))^{q/(q-1)} k_q(x); defaults to beta.
  std::optional<double> beta_threshold;
  double matrix_norm = 1.0;    // ||A||_2
  double signal_ratio = 1.0;   // k_q(x), T2/T4
  double tail = 0.0;           // ||x - x^k||_{2,1}, T2/T4
  double noise_norm = 0.0;     // ||e||_2, T3/T4
  double correlation = 0.0;    // ||A^T e||_{2,inf}, T3/T4
  double measurement_norm = 0.0;  // ||y||_2, T3/T4
};

struct BoundReport {
  Theorem id = Theorem::T1;
  BoundInputs inputs;
  double level = 0.0;  // s at which beta must be evaluated
  double bound_l2q = 0.0;
  double bound_l21 = 0.0;
  std::optional<double> lambda_threshold;
  std::optional<bool> lambda_valid;
};

BoundReport theorem_bounds(Theorem id, const BoundInputs& in);

}  // namespace bqr
