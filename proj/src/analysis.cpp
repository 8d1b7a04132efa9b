#include "bqr/analysis.hpp"

#include "bqr/ccp.hpp"
#include "bqr/gen.hpp"
#include "bqr/prox.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace bqr {

std::string to_string(BcmsvMethod method) {
  return method == BcmsvMethod::Brute ? "brute" : "multistart";
}

std::string to_string(NspStatus status) {
  switch (status) {
    case NspStatus::HoldsVacuously: return "holds_vacuously";
    case NspStatus::LikelyHolds: return "likely_holds";
    case NspStatus::Fails: return "fails";
  }
  return "unknown";
}

std::string to_string(Theorem id) {
  switch (id) {
    case Theorem::T1: return "T1";
    case Theorem::T2: return "T2";
    case Theorem::T3: return "T3";
    case Theorem::T4: return "T4";
  }
  return "unknown";
}

Theorem theorem_from_string(const std::string& name) {
  if (name == "T1" || name == "t1") return Theorem::T1;
  if (name == "T2" || name == "t2") return Theorem::T2;
  if (name == "T3" || name == "t3") return Theorem::T3;
  if (name == "T4" || name == "t4") return Theorem::T4;
  throw std::invalid_argument("unknown theorem '" + name + "' (expected T1..T4)");
}

namespace {

void require_order_above_one(Order q) {
  if (!q.is_infinite() && !(q.value() > 1.0)) throw std::invalid_argument("q must exceed 1");
}

// Gradient of the mixed l2,1 norm; zero on zero blocks.
Vector l21_gradient(const BlockPartition& p, const ConstVectorRef& h) {
  Vector g = Vector::Zero(h.size());
  for (int j = 0; j < p.num_blocks(); ++j) {
    const auto hj = h.segment(p.offset(j), p.dim(j));
    const double nj = hj.norm();
    if (nj > 0.0) g.segment(p.offset(j), p.dim(j)) = hj / nj;
  }
  return g;
}

struct Candidate {
  double value = std::numeric_limits<double>::infinity();
  Vector z;
};

double ratio(const Matrix& A, const BlockPartition& p, const Vector& z, Order q) {
  return (A * z).norm() / mixed_norm(p, z, q);
}

// Backtracking projected gradient on ||A z|| / ||z||_{2,q} over the level set.
Candidate descend(const Matrix& A, const BlockPartition& p, Order q, double s, Vector z,
                  int max_iterations) {
  z = restrict_level(p, z, q, s);
  double value = ratio(A, p, z, q);
  double step = 1.0;
  for (int it = 0; it < max_iterations && value > 0.0; ++it) {
    const Vector az = A * z;
    const double naz = az.norm();
    const Vector grad = A.transpose() * az / naz - naz * l2q_gradient(p, z, q, 1e-12);
    bool moved = false;
    while (step > 1e-14) {
      const Vector trial = restrict_level(p, z - step * grad, q, s);
      const double tv = ratio(A, p, trial, q);
      if (tv < value) {
        moved = value - tv > 1e-15 * value;
        z = trial;
        value = tv;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return {value, z};
}

template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

BcmsvEstimate reduce(std::vector<Candidate>& results, Order q, double s, BcmsvMethod method,
                     int starts) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].value < results[best].value) best = i;
  }
  BcmsvEstimate est;
  est.q = q;
  est.s = s;
  est.witness = std::move(results[best].z);
  est.beta = results[best].value;
  est.method = method;
  est.starts = starts;
  return est;
}

void validate_bcmsv(const Matrix& A, const BlockPartition& p, Order q, double s) {
  require_order_above_one(q);
  if (A.cols() != p.size()) throw std::invalid_argument("matrix/partition mismatch");
  if (!(s >= 1.0 && s <= p.num_blocks())) throw std::invalid_argument("level s must lie in [1, M]");
}

}  // namespace

Vector restrict_level(const BlockPartition& p, const ConstVectorRef& z, Order q, double s) {
  const Vector norms = p.block_norms(z);
  const double top = norms.maxCoeff();
  if (!(top > 0.0)) throw std::domain_error("cannot restrict the zero vector");
  auto feasible = [&](const Vector& v) { return q_ratio_sparsity(p, v, q) <= s; };
  auto normalized = [&](Vector v) { return Vector(v / mixed_norm(p, v, q)); };

  Vector out = z;
  if (!feasible(out)) {
    double lo = 0.0, hi = 1.0 - 1e-12;
    Vector best = block_soft_threshold(p, z, hi * top);
    if (!feasible(best)) {
      // Tied top blocks: keep the first one only.
      Eigen::Index j = 0;
      norms.maxCoeff(&j);
      best = Vector::Zero(z.size());
      best.segment(p.offset(j), p.dim(j)) = z.segment(p.offset(j), p.dim(j));
      return normalized(best);
    }
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      Vector trial = block_soft_threshold(p, z, mid * top);
      if (feasible(trial)) {
        hi = mid;
        best = std::move(trial);
      } else {
        lo = mid;
      }
    }
    out = std::move(best);
  }
  return normalized(out);
}

BcmsvEstimate estimate_bcmsv(const Matrix& A, const BlockPartition& p, Order q, double s,
                             int starts, std::uint64_t seed, const BcmsvOptions& opts) {
  validate_bcmsv(A, p, q, s);
  if (starts < 1) throw std::invalid_argument("at least one start is required");

  const int M = p.num_blocks();
  const int extra = static_cast<int>(opts.extra_starts.size());
  const int total = M + starts + extra;
  std::vector<Candidate> results(static_cast<std::size_t>(total));

  parallel_for(total, opts.threads, [&](int i) {
    Vector z = Vector::Zero(p.size());
    if (i < M) {
      const Eigen::JacobiSVD<Matrix> svd(A.middleCols(p.offset(i), p.dim(i)), Eigen::ComputeFullV);
      z.segment(p.offset(i), p.dim(i)) = svd.matrixV().col(p.dim(i) - 1);
    } else if (i < M + starts) {
      Rng rng(seed, "bcmsv", static_cast<std::uint64_t>(i - M));
      for (Eigen::Index e = 0; e < z.size(); ++e) z[e] = rng.normal();
    } else {
      z = opts.extra_starts[static_cast<std::size_t>(i - M - starts)];
      p.check(z);
    }
    results[static_cast<std::size_t>(i)] = descend(A, p, q, s, z, opts.max_iterations);
  });
  return reduce(results, q, s, BcmsvMethod::Multistart, total);
}

BcmsvEstimate bcmsv_brute_force(const Matrix& A, const BlockPartition& p, Order q, double s,
                                int samples, std::uint64_t seed) {
  validate_bcmsv(A, p, q, s);
  if (samples < 1) throw std::invalid_argument("at least one sample is required");
  constexpr int kPolished = 16;
  Rng rng(seed, "bcmsv-brute");
  std::vector<Candidate> best;
  Vector z(p.size());
  for (int i = 0; i < samples; ++i) {
    for (Eigen::Index e = 0; e < z.size(); ++e) z[e] = rng.normal();
    if (!(z.norm() > 0.0) || q_ratio_sparsity(p, z, q) > s) continue;
    const double v = ratio(A, p, z, q);
    if (static_cast<int>(best.size()) < kPolished || v < best.back().value) {
      best.push_back({v, z / mixed_norm(p, z, q)});
      std::sort(best.begin(), best.end(),
                [](const Candidate& a, const Candidate& b) { return a.value < b.value; });
      if (static_cast<int>(best.size()) > kPolished) best.pop_back();
    }
  }
  if (best.empty()) {
    // Only highly concentrated points qualify; fall back to shrunken samples.
    for (int i = 0; i < kPolished; ++i) {
      for (Eigen::Index e = 0; e < z.size(); ++e) z[e] = rng.normal();
      const Vector r = restrict_level(p, z, q, s);
      best.push_back({ratio(A, p, r, q), r});
    }
  }
  std::vector<Candidate> polished;
  for (const Candidate& c : best) polished.push_back(descend(A, p, q, s, c.z, 2000));
  return reduce(polished, q, s, BcmsvMethod::Brute, samples);
}

Matrix kernel_basis(const Matrix& A) {
  const Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
  const Vector& sv = svd.singularValues();
  const double top = sv.size() > 0 ? sv[0] : 0.0;
  const double tol = std::max(A.rows(), A.cols()) * std::numeric_limits<double>::epsilon() * top;
  const Eigen::Index rank = (sv.array() > tol).count();
  return svd.matrixV().rightCols(A.cols() - rank);
}

NspVerdict check_nsp_sufficient(const Matrix& A, const BlockPartition& p, Order q, double k,
                                int samples, std::uint64_t seed) {
  require_order_above_one(q);
  if (!(k >= 1.0)) throw std::invalid_argument("sparsity k must be at least 1");
  if (samples < 1) throw std::invalid_argument("at least one sample is required");
  if (A.cols() != p.size()) throw std::invalid_argument("matrix/partition mismatch");

  NspVerdict verdict;
  const Matrix basis = kernel_basis(A);
  verdict.kernel_dimension = static_cast<int>(basis.cols());
  if (basis.cols() == 0) {
    verdict.status = NspStatus::HoldsVacuously;
    verdict.estimate = std::numeric_limits<double>::infinity();
    return verdict;
  }

  const double factor = std::exp(-q.conjugate_exponent() * std::log(3.0));
  auto measure = [&](const Vector& c) { return q_ratio_sparsity(p, basis * c, q); };

  Vector best_c;
  double best = std::numeric_limits<double>::infinity();
  if (basis.cols() == 1) {
    best_c = Vector::Ones(1);
    best = measure(best_c);
  } else {
    constexpr int kPolished = 8;
    Rng rng(seed, "nsp");
    std::vector<std::pair<double, Vector>> pool;
    Vector c(basis.cols());
    for (int i = 0; i < samples; ++i) {
      for (Eigen::Index e = 0; e < c.size(); ++e) c[e] = rng.normal();
      c.normalize();
      pool.emplace_back(measure(c), c);
    }
    std::stable_sort(pool.begin(), pool.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    pool.resize(std::min<std::size_t>(pool.size(), kPolished));

    for (auto& [value, start] : pool) {
      Vector cur = start;
      double cur_value = value;
      double step = 0.1;
      for (int it = 0; it < 500; ++it) {
        const Vector h = basis * cur;
        // d/dh log(||h||_{2,1} / ||h||_{2,q}); k_q is monotone in this ratio.
        const Vector gh = l21_gradient(p, h) / mixed_norm(p, h, 1.0) -
                          l2q_gradient(p, h, q, 1e-12) / mixed_norm(p, h, q);
        Vector gc = basis.transpose() * gh;
        gc -= gc.dot(cur) * cur;
        if (gc.norm() < 1e-14) break;
        bool moved = false;
        while (step > 1e-12) {
          const Vector trial = (cur - step * gc).normalized();
          const double tv = measure(trial);
          if (tv < cur_value) {
            moved = cur_value - tv > 1e-14 * cur_value;
            cur = trial;
            cur_value = tv;
            step *= 2.0;
            break;
          }
          step *= 0.5;
        }
        if (!moved) break;
      }
      if (cur_value < best) {
        best = cur_value;
        best_c = cur;
      }
    }
  }

  verdict.witness = (basis * best_c).normalized();
  verdict.estimate = factor * best;
  verdict.status = verdict.estimate <= k ? NspStatus::Fails : NspStatus::LikelyHolds;
  return verdict;
}

BoundReport theorem_bounds(Theorem id, const BoundInputs& in) {
  require_order_above_one(in.q);
  if (!(in.beta > 0.0)) throw std::invalid_argument("beta must be positive");
  if (!(in.k >= 1.0)) throw std::invalid_argument("k must be at least 1");
  if (!(in.noise_level >= 0.0) || !(in.tail >= 0.0) || !(in.noise_norm >= 0.0) ||
      !(in.correlation >= 0.0) || !(in.lambda >= 0.0)) {
    throw std::invalid_argument("bound inputs must be nonnegative");
  }
  const bool unconstrained = id == Theorem::T3 || id == Theorem::T4;
  if (unconstrained && !(in.kappa > 0.0 && in.kappa < 1.0)) {
    throw std::invalid_argument("kappa must lie in (0, 1)");
  }
  if (!unconstrained && in.noise == NoiseKind::None) {
    throw std::invalid_argument("T1/T2 need an l2 or l2inf noise model");
  }

  const double a = in.q.one_minus_inverse();  // 1 - 1/q
  const double expo = in.q.conjugate_exponent();  // q/(q-1) = 1/a
  const double ka = std::pow(in.k, a);
  const double kqa = std::pow(in.signal_ratio, a);
  const double beta = in.beta;
  const double eta = in.noise_level;

  BoundReport r;
  r.id = id;
  r.inputs = in;
  switch (id) {
    case Theorem::T1: {
      r.level = std::pow(3.0, expo) * in.k;
      if (in.noise == NoiseKind::L2) {
        r.bound_l2q = 2.0 * eta / beta;
        r.bound_l21 = 6.0 * ka * eta / beta;
      } else {
        r.bound_l2q = 6.0 * ka * eta / (beta * beta);
        r.bound_l21 = 18.0 * ka * ka * eta / (beta * beta);
      }
      break;
    }
    case Theorem::T2: {
      const double base = 4.0 * ka + kqa;  // B_q(k, x)^{1-1/q}
      r.level = std::pow(base, expo);
      const double tail_q = in.tail / ka;
      const double tail_1 = (4.0 + std::pow(in.signal_ratio / in.k, a)) * in.tail;
      const double lead = 4.0 * ka + 2.0 * kqa;
      if (in.noise == NoiseKind::L2) {
        r.bound_l2q = 2.0 * eta / beta + tail_q;
        r.bound_l21 = lead * eta / beta + tail_1;
      } else {
        r.bound_l2q = 2.0 * base * eta / (beta * beta) + tail_q;
        r.bound_l21 = lead * base * eta / (beta * beta) + tail_1;
      }
      break;
    }
    case Theorem::T3: {
      const double kap = in.kappa;
      r.level = std::pow(3.0 / (1.0 - kap), expo) * in.k;
      const double root = std::sqrt(in.noise_norm * in.noise_norm + 2.0 * ka * in.lambda);
      const double scale = in.matrix_norm / (beta * beta) * root;
      r.bound_l2q = ka * scale * 3.0 * (kap + 1.0) / (1.0 - kap);
      r.bound_l21 = ka * ka * scale * 9.0 * (kap + 1.0) / ((1.0 - kap) * (1.0 - kap));
      const double threshold =
          std::max((1.0 - kap) / (2.0 * (kap + 2.0)) * in.noise_norm * in.noise_norm / ka,
                   in.correlation / kap * in.measurement_norm / beta);
      r.lambda_threshold = threshold;
      r.lambda_valid = in.lambda > threshold;
      break;
    }
    case Theorem::T4: {
      const double kap = in.kappa;
      const double base = (4.0 * ka + kqa) / (1.0 - kap);  // B_{kappa,q}(k, x)^{1-1/q}
      r.level = std::pow(base / (1.0 - kap), expo);
      const double root = std::sqrt(in.noise_norm * in.noise_norm + 2.0 * kqa * in.lambda);
      const double common = (kap + 1.0) * in.matrix_norm / (beta * beta) * base / (1.0 - kap) * root;
      r.bound_l2q = common + in.tail / ka;
      r.bound_l21 = (2.0 * ka + kqa) / (1.0 - kap) * common +
                    (4.0 + std::pow(in.signal_ratio / in.k, a)) / (1.0 - kap) * in.tail;
      const double beta_thr = in.beta_threshold.value_or(beta);
      if (!(beta_thr > 0.0)) throw std::invalid_argument("threshold beta must be positive");
      const double threshold =
          std::max((1.0 - kap) / (2.0 * (kap + 2.0)) * in.noise_norm * in.noise_norm / kqa,
                   in.correlation / kap * in.measurement_norm / beta_thr);
      r.lambda_threshold = threshold;
      r.lambda_valid = in.lambda >= threshold;
      break;
    }
  }
  return r;
}

}  // namespace bqr
