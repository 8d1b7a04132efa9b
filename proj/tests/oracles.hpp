#pragma once

// Independent reference implementations used only by the tests.

#include "bqr/blocks.hpp"
#include "bqr/gen.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oracle {

using bqr::BlockPartition;
using bqr::Matrix;
using bqr::Vector;

inline std::vector<double> norms_of(const BlockPartition& p, const Vector& z) {
  std::vector<double> n;
  for (int j = 0; j < p.num_blocks(); ++j) n.push_back(z.segment(p.offset(j), p.dim(j)).norm());
  return n;
}

inline Vector shrink(const BlockPartition& p, const Vector& v, double lambda) {
  Vector out = Vector::Zero(v.size());
  for (int j = 0; j < p.num_blocks(); ++j) {
    const Vector vj = v.segment(p.offset(j), p.dim(j));
    const double n = vj.norm();
    if (n > lambda) out.segment(p.offset(j), p.dim(j)) = (1.0 - lambda / n) * vj;
  }
  return out;
}

// Projection onto the l2,1 ball by bisection on the soft-threshold level.
inline Vector l21_projection_bisection(const BlockPartition& p, const Vector& v, double r) {
  const std::vector<double> n = norms_of(p, v);
  double total = 0.0;
  for (double x : n) total += x;
  if (total <= r) return v;
  auto excess = [&](double lambda) {
    double s = 0.0;
    for (double x : n) s += std::max(x - lambda, 0.0);
    return s - r;
  };
  double lo = 0.0, hi = *std::max_element(n.begin(), n.end());
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double e = excess(mid);
    if (std::abs(e) <= 1e-12) {
      lo = hi = mid;
      break;
    }
    if (e > 0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return shrink(p, v, 0.5 * (lo + hi));
}

// ||z||_{2,q} for finite q > 0, straight from the definition.
inline double mixed_norm_direct(const BlockPartition& p, const Vector& z, double q) {
  double s = 0.0;
  for (double x : norms_of(p, z)) s += std::pow(x, q);
  return std::pow(s, 1.0 / q);
}

inline Vector central_difference_gradient(const BlockPartition& p, const Vector& v, double q,
                                          double h) {
  Vector g(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    Vector a = v, b = v;
    a[i] += h;
    b[i] -= h;
    g[i] = (mixed_norm_direct(p, a, q) - mixed_norm_direct(p, b, q)) / (2.0 * h);
  }
  return g;
}

// Two scalar blocks, one measurement: maximize c1 v1 + c2 v2 + ct t subject to
// |v1| + |v2| <= 1, t >= t0, |t y - (v1 + v2)| <= eta t. Grid over (v1, v2) at
// `step`, then `refinements` finer grids (step / 10 each) around the incumbent;
// for each grid point the best feasible t is found exactly.
struct GridResult {
  double objective = -std::numeric_limits<double>::infinity();
  double v1 = 0, v2 = 0, t = 0;
};

inline void grid_point(double y, double eta, double t0, double c1, double c2, double ct, double v1,
                       double v2, GridResult& best) {
  if (std::abs(v1) + std::abs(v2) > 1.0 + 1e-12) return;
  const double s = v1 + v2;
  // (y - eta) t <= s and (y + eta) t >= s, with t >= t0
  double lo = t0, hi = std::numeric_limits<double>::infinity();
  auto bound = [&](double a, double rhs, bool at_most) {
    if (a == 0.0) {
      if (at_most ? rhs < 0.0 : rhs > 0.0) lo = std::numeric_limits<double>::infinity();
      return;
    }
    if (at_most == (a > 0)) {
      hi = std::min(hi, rhs / a);
    } else {
      lo = std::max(lo, rhs / a);
    }
  };
  bound(y - eta, s, true);
  bound(y + eta, s, false);
  if (lo > hi + 1e-12) return;
  double t = lo;
  if (ct > 0) {
    if (std::isinf(hi)) return;
    t = hi;
  }
  const double f = c1 * v1 + c2 * v2 + ct * t;
  if (f > best.objective) best = {f, v1, v2, t};
}

inline GridResult two_block_grid_search(double y, double eta, double t0, double c1, double c2,
                                        double ct, double step = 1e-3, int refinements = 0) {
  GridResult best;
  const int n = static_cast<int>(std::lround(1.0 / step));
  for (int i = -n; i <= n; ++i)
    for (int j = -n; j <= n; ++j) grid_point(y, eta, t0, c1, c2, ct, i * step, j * step, best);
  for (int r = 0; r < refinements; ++r) {
    const GridResult centre = best;
    const double h = step / 10.0;
    for (int i = -20; i <= 20; ++i)
      for (int j = -20; j <= 20; ++j)
        grid_point(y, eta, t0, c1, c2, ct, centre.v1 + i * h, centre.v2 + j * h, best);
    step = h;
  }
  return best;
}

// Proximal gradient with a fixed 1/L step for the group lasso, run to an
// extreme tolerance.
inline Vector group_lasso_long_run(const Matrix& A, const Vector& y, const BlockPartition& p,
                                   double lambda, int iterations = 1000000, double tol = 1e-12) {
  const double L = Eigen::SelfAdjointEigenSolver<Matrix>(A.transpose() * A).eigenvalues().maxCoeff();
  Vector z = Vector::Zero(A.cols());
  for (int it = 0; it < iterations; ++it) {
    const Vector grad = A.transpose() * (A * z - y);
    const Vector next = shrink(p, z - grad / L, lambda / L);
    const double change = (next - z).norm();
    z = next;
    if (change <= tol * std::max(1.0, z.norm())) break;
  }
  return z;
}

inline double group_lasso_value(const Matrix& A, const Vector& y, const BlockPartition& p,
                                double lambda, const Vector& z) {
  double pen = 0.0;
  for (double x : norms_of(p, z)) pen += x;
  return 0.5 * (y - A * z).squaredNorm() + lambda * pen;
}

inline Matrix naive_kronecker(const Matrix& P, const Matrix& D) {
  Matrix out(P.rows() * D.rows(), P.cols() * D.cols());
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j)
      out(i, j) = P(i / D.rows(), j / D.cols()) * D(i % D.rows(), j % D.cols());
  return out;
}

inline double kq_direct(const BlockPartition& p, const Vector& z, double q) {
  const std::vector<double> n = norms_of(p, z);
  double l1 = 0.0, lq = 0.0;
  for (double x : n) {
    l1 += x;
    lq += std::pow(x, q);
  }
  lq = std::pow(lq, 1.0 / q);
  return std::pow(l1 / lq, q / (q - 1.0));
}

// Dense sphere sampling for min ||A z|| / ||z||_{2,q} over k_q(z) <= s (finite q),
// followed by a shrinking random-perturbation polish of the best points.
inline double bcmsv_brute(const Matrix& A, const BlockPartition& p, double q, double s,
                          int samples, std::uint64_t seed) {
  bqr::Rng rng(seed, "oracle-bcmsv");
  auto ratio = [&](const Vector& z) { return (A * z).norm() / mixed_norm_direct(p, z, q); };
  std::vector<std::pair<double, Vector>> best;
  for (int i = 0; i < samples; ++i) {
    Vector z(A.cols());
    for (auto& x : z) x = rng.normal();
    if (kq_direct(p, z, q) > s) continue;
    const double r = ratio(z);
    if (best.size() < 32 || r < best.back().first) {
      best.emplace_back(r, z);
      std::sort(best.begin(), best.end(), [](auto& a, auto& b) { return a.first < b.first; });
      if (best.size() > 32) best.pop_back();
    }
  }
  double overall = std::numeric_limits<double>::infinity();
  for (auto& [r, z] : best) {
    double step = 0.1;
    double cur = r;
    Vector x = z / mixed_norm_direct(p, z, q);
    while (step > 1e-9) {
      bool improved = false;
      for (int trial = 0; trial < 40; ++trial) {
        Vector cand = x;
        for (auto& c : cand) c += step * rng.normal();
        if (kq_direct(p, cand, q) > s) continue;
        cand /= mixed_norm_direct(p, cand, q);
        const double rc = ratio(cand);
        if (rc < cur) {
          cur = rc;
          x = cand;
          improved = true;
        }
      }
      if (!improved) step *= 0.5;
    }
    overall = std::min(overall, cur);
  }
  return overall;
}

}  // namespace oracle
