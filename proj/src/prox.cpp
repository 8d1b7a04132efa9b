#include "bqr/prox.hpp"

#include <algorithm>
#include <functional>
#include <stdexcept>

namespace bqr {

Vector block_soft_threshold(const BlockPartition& p, const ConstVectorRef& v, double lambda) {
  if (!(lambda >= 0.0)) throw std::invalid_argument("threshold must be nonnegative");
  p.check(v);
  Vector out(v.size());
  for (int j = 0; j < p.num_blocks(); ++j) {
    const auto vj = v.segment(p.offset(j), p.dim(j));
    const double nj = vj.norm();
    auto oj = out.segment(p.offset(j), p.dim(j));
    if (nj <= lambda) {
      oj.setZero();
    } else {
      oj = (1.0 - lambda / nj) * vj;
    }
  }
  return out;
}

void block_soft_threshold_weighted(const BlockPartition& p, const ConstVectorRef& v,
                                   const ConstVectorRef& lambdas, Eigen::Ref<Vector> out) {
  for (int j = 0; j < p.num_blocks(); ++j) {
    const auto vj = v.segment(p.offset(j), p.dim(j));
    const double nj = vj.norm();
    auto oj = out.segment(p.offset(j), p.dim(j));
    if (nj <= lambdas[j]) {
      oj.setZero();
    } else {
      oj = (1.0 - lambdas[j] / nj) * vj;
    }
  }
}

double l21_ball_multiplier(const BlockPartition& p, const ConstVectorRef& v, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("l21 ball radius must be positive");
  const Vector norms = p.block_norms(v);
  if (norms.sum() <= radius) return 0.0;

  // Simplex-style threshold on the block norms: find lambda with
  // sum_j max(n_j - lambda, 0) = radius.
  std::vector<double> sorted(norms.data(), norms.data() + norms.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double lambda = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    cumulative += sorted[i];
    const double candidate = (cumulative - radius) / static_cast<double>(i + 1);
    if (i + 1 == sorted.size() || sorted[i + 1] <= candidate) {
      lambda = candidate;
      break;
    }
  }
  return std::max(lambda, 0.0);
}

Vector project_l21_ball(const BlockPartition& p, const ConstVectorRef& v, double radius) {
  const double lambda = l21_ball_multiplier(p, v, radius);
  if (lambda == 0.0) return v;
  return block_soft_threshold(p, v, lambda);
}

void project_soc_inplace(Eigen::Ref<Vector> u, double& s) {
  const double nu = u.norm();
  if (nu <= s) return;
  if (nu <= -s) {
    u.setZero();
    s = 0.0;
    return;
  }
  const double a = 0.5 * (s + nu);
  u *= a / nu;
  s = a;
}

ConePoint project_soc(const ConePoint& point) {
  ConePoint out = point;
  project_soc_inplace(out.u, out.s);
  return out;
}

}  // namespace bqr
