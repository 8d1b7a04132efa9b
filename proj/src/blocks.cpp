#include "bqr/blocks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace bqr {

double Order::conjugate_exponent() const {
  if (infinite_) return 1.0;
  return value_ / (value_ - 1.0);
}

double Order::one_minus_inverse() const {
  if (infinite_) return 1.0;
  return 1.0 - 1.0 / value_;
}

BlockPartition::BlockPartition(std::vector<int> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw std::invalid_argument("block partition needs at least one block");
  offsets_.reserve(dims_.size());
  for (int d : dims_) {
    if (d < 1) throw std::invalid_argument("block lengths must be positive");
    offsets_.push_back(n_);
    n_ += d;
  }
}

BlockPartition BlockPartition::uniform(int n, int d) {
  if (d < 1 || n < 1 || n % d != 0) {
    throw std::invalid_argument("uniform partition: block length " + std::to_string(d) +
                                " does not divide " + std::to_string(n));
  }
  return BlockPartition(std::vector<int>(static_cast<std::size_t>(n / d), d));
}

bool BlockPartition::is_uniform() const {
  return std::all_of(dims_.begin(), dims_.end(), [&](int d) { return d == dims_.front(); });
}

void BlockPartition::check(const ConstVectorRef& z) const {
  if (z.size() != n_) {
    throw std::invalid_argument("vector length " + std::to_string(z.size()) +
                                " does not match partition length " + std::to_string(n_));
  }
}

Vector BlockPartition::block_norms(const ConstVectorRef& z) const {
  check(z);
  Vector norms(num_blocks());
  for (int j = 0; j < num_blocks(); ++j) norms[j] = z.segment(offsets_[j], dims_[j]).norm();
  return norms;
}

namespace {

void require_finite(const ConstVectorRef& z) {
  if (!z.allFinite()) throw std::invalid_argument("vector contains non-finite entries");
}

void require_positive(Order q) {
  if (!q.is_infinite() && !(q.value() > 0.0)) {
    throw std::invalid_argument("mixed norm order must be positive");
  }
}

// l_q of a nonnegative vector, rescaled by its max to avoid overflow.
double lq_of_norms(const ConstVectorRef& norms, double q) {
  const double top = norms.maxCoeff();
  if (top == 0.0) return 0.0;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < norms.size(); ++j) {
    if (norms[j] > 0.0) acc += std::pow(norms[j] / top, q);
  }
  return top * std::pow(acc, 1.0 / q);
}

double entropy_limit(const ConstVectorRef& norms) {
  const double l1 = norms.sum();
  double h = 0.0;
  for (Eigen::Index j = 0; j < norms.size(); ++j) {
    const double pj = norms[j] / l1;
    if (pj > 0.0) h -= pj * std::log(pj);
  }
  return std::exp(h);
}

}  // namespace

double mixed_norm(const BlockPartition& p, const ConstVectorRef& z, Order q) {
  require_positive(q);
  p.check(z);
  require_finite(z);
  if (!q.is_infinite() && q.value() == 2.0) return z.norm();
  const Vector norms = p.block_norms(z);
  if (q.is_infinite()) return norms.maxCoeff();
  if (q.value() == 1.0) return norms.sum();
  return lq_of_norms(norms, q.value());
}

int block_l0(const BlockPartition& p, const ConstVectorRef& z, double tol) {
  if (!(tol >= 0.0)) throw std::invalid_argument("block_l0 tolerance must be nonnegative");
  const Vector norms = p.block_norms(z);
  return static_cast<int>((norms.array() > tol).count());
}

double solver_support_tolerance(const BlockPartition& p, const ConstVectorRef& z) {
  return 1e-6 * p.block_norms(z).maxCoeff();
}

double q_ratio_from_block_norms(const ConstVectorRef& norms, Order q) {
  if (!q.is_infinite() && q.value() < 0.0) {
    throw std::invalid_argument("q-ratio order must be nonnegative");
  }
  require_finite(norms);
  const double top = norms.maxCoeff();
  if (!(top > 0.0)) throw std::domain_error("q-ratio sparsity is undefined at z = 0");

  const auto active = static_cast<double>((norms.array() > 0.0).count());
  if (!q.is_infinite() && q.value() == 0.0) return active;

  const double l1 = norms.sum();
  double value;
  if (q.is_infinite()) {
    value = l1 / top;
  } else if (std::abs(q.value() - 1.0) < 1e-8) {
    value = entropy_limit(norms);
  } else {
    const double lq = lq_of_norms(norms, q.value());
    value = std::exp(q.conjugate_exponent() * (std::log(l1) - std::log(lq)));
  }
  return std::clamp(value, 1.0, active);
}

double q_ratio_sparsity(const BlockPartition& p, const ConstVectorRef& z, Order q) {
  return q_ratio_from_block_norms(p.block_norms(z), q);
}

std::vector<int> largest_blocks(const BlockPartition& p, const ConstVectorRef& x, int k) {
  if (k < 0 || k > p.num_blocks()) throw std::invalid_argument("k out of range [0, M]");
  const Vector norms = p.block_norms(x);
  std::vector<int> order(static_cast<std::size_t>(p.num_blocks()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return norms[a] > norms[b]; });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

Vector best_block_approx(const BlockPartition& p, const ConstVectorRef& x, int k) {
  const std::vector<int> keep = largest_blocks(p, x, k);
  Vector out = Vector::Zero(x.size());
  for (int j : keep) out.segment(p.offset(j), p.dim(j)) = x.segment(p.offset(j), p.dim(j));
  return out;
}

}  // namespace bqr
