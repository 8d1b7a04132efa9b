#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace bqr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using ConstVectorRef = Eigen::Ref<const Eigen::VectorXd>;

// Extended-real exponent used for mixed norms and the q-ratio measure.
// Infinity is an explicit state rather than a large double so that
// exponents like q/(q-1) never overflow.
class Order {
 public:
  constexpr Order(double value) : value_(value), infinite_(false) {}  // NOLINT
  static constexpr Order infinity() { return Order(); }

  constexpr bool is_infinite() const { return infinite_; }
  // Only meaningful when !is_infinite().
  constexpr double value() const { return value_; }

  // q/(q-1), with the q = inf limit of 1.
  double conjugate_exponent() const;
  // 1 - 1/q, with the q = inf limit of 1.
  double one_minus_inverse() const;

  friend constexpr bool operator==(const Order& a, const Order& b) {
    return a.infinite_ == b.infinite_ && (a.infinite_ || a.value_ == b.value_);
  }

 private:
  constexpr Order() : value_(std::numeric_limits<double>::infinity()), infinite_(true) {}
  double value_;
  bool infinite_;
};

// Sequential block structure {d_1, ..., d_M} over a length-N vector.
class BlockPartition {
 public:
  BlockPartition() = default;
  explicit BlockPartition(std::vector<int> dims);
  // M = n / d equal blocks; throws unless d divides n.
  static BlockPartition uniform(int n, int d);

  int size() const { return n_; }               // N
  int num_blocks() const { return static_cast<int>(dims_.size()); }  // M
  int dim(int j) const { return dims_[j]; }
  int offset(int j) const { return offsets_[j]; }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<int>& offsets() const { return offsets_; }
  bool is_uniform() const;

  auto block(Eigen::VectorXd& z, int j) const { return z.segment(offsets_[j], dims_[j]); }
  auto block(const Eigen::VectorXd& z, int j) const {
    return z.segment(offsets_[j], dims_[j]);
  }
  auto block(const ConstVectorRef& z, int j) const {
    return z.segment(offsets_[j], dims_[j]);
  }

  // Per-block Euclidean norms, length M. Throws on length mismatch.
  Vector block_norms(const ConstVectorRef& z) const;

  // Throws std::invalid_argument if z.size() != N.
  void check(const ConstVectorRef& z) const;

  friend bool operator==(const BlockPartition& a, const BlockPartition& b) {
    return a.dims_ == b.dims_;
  }

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int n_ = 0;
};

// ||z||_{2,q}: the l_q (quasi-)norm of the block norms.
double mixed_norm(const BlockPartition& p, const ConstVectorRef& z, Order q);

// Number of blocks whose l2 norm exceeds tol.
int block_l0(const BlockPartition& p, const ConstVectorRef& z, double tol = 0.0);

// Tolerance for counting active blocks of a solver output: 1e-6 * ||z||_{2,inf}.
double solver_support_tolerance(const BlockPartition& p, const ConstVectorRef& z);

// Block q-ratio sparsity k_q(z) for q in [0, inf]. q = 0 gives the block l0
// count, q = 1 the entropy limit, q = inf the ratio ||z||_{2,1}/||z||_{2,inf}.
// Throws std::domain_error for z = 0.
double q_ratio_sparsity(const BlockPartition& p, const ConstVectorRef& z, Order q);

// Same measure from a precomputed vector of block norms.
double q_ratio_from_block_norms(const ConstVectorRef& norms, Order q);

// Keeps the k blocks with the largest l2 norm, ties to the lower index.
Vector best_block_approx(const BlockPartition& p, const ConstVectorRef& x, int k);

// Indices of the k largest blocks in the order used by best_block_approx.
std::vector<int> largest_blocks(const BlockPartition& p, const ConstVectorRef& x, int k);

}  // namespace bqr
