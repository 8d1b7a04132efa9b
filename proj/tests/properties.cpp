#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bqr/ccp.hpp"
#include "bqr/gen.hpp"
#include "bqr/prox.hpp"
#include "bqr/socp.hpp"
#include "oracles.hpp"

#include <cmath>
#include <vector>

using namespace bqr;

namespace {

Vector random_vector(Rng& rng, int n, double scale = 1.0) {
  Vector v(n);
  for (auto& x : v) x = scale * rng.normal();
  return v;
}

// Random vectors with a random number of zero blocks.
std::vector<Vector> sample_vectors(const BlockPartition& p, int count, std::uint64_t seed) {
  Rng rng(seed, "property-vectors");
  std::vector<Vector> out;
  while (static_cast<int>(out.size()) < count) {
    Vector z = random_vector(rng, p.size());
    const int zeros = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(p.num_blocks())));
    for (int i = 0; i < zeros; ++i) {
      p.block(z, static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(p.num_blocks())))).setZero();
    }
    if (z.norm() > 0) out.push_back(z);
  }
  return out;
}

const BlockPartition kPartition({2, 1, 3, 2, 2, 1, 1, 2});

const std::vector<Order> kOrders = {Order(0.0),  Order(0.5),   Order(1.0),   Order(1.01),
                                    Order(1.1),  Order(1.5),   Order(2.0),   Order(3.0),
                                    Order(4.0),  Order(10.0),  Order(100.0), Order::infinity()};

}  // namespace

TEST_SUITE("blocks") {
  TEST_CASE("k_q is scale invariant") {
    for (const Vector& z : sample_vectors(kPartition, 50, 1)) {
      for (Order q : kOrders) {
        const double base = q_ratio_sparsity(kPartition, z, q);
        for (double c : {-3.0, 1e-3, 1e5, -0.7}) {
          CHECK(std::abs(q_ratio_sparsity(kPartition, c * z, q) - base) <= 1e-12 * base);
        }
      }
    }
  }

  TEST_CASE("k_q is non-increasing in q") {
    for (const Vector& z : sample_vectors(kPartition, 50, 2)) {
      for (std::size_t i = 1; i < kOrders.size(); ++i) {
        CHECK(q_ratio_sparsity(kPartition, z, kOrders[i - 1]) >=
              q_ratio_sparsity(kPartition, z, kOrders[i]) - 1e-10);
      }
    }
  }

  TEST_CASE("k_q lies in [1, M] and below the block count") {
    for (const Vector& z : sample_vectors(kPartition, 50, 3)) {
      const double l0 = block_l0(kPartition, z);
      for (Order q : kOrders) {
        const double k = q_ratio_sparsity(kPartition, z, q);
        CHECK(k >= 1.0 - 1e-12);
        CHECK(k <= kPartition.num_blocks() + 1e-12);
        CHECK(k <= l0 + 1e-10);
      }
    }
  }

  TEST_CASE("k_q approaches k_inf at q = 1e4") {
    for (const Vector& z : sample_vectors(kPartition, 20, 4)) {
      const double kinf = q_ratio_sparsity(kPartition, z, Order::infinity());
      CHECK(std::abs(q_ratio_sparsity(kPartition, z, 1e4) - kinf) <= 1e-4);
    }
  }

  TEST_CASE("k_q at q = 1e4 follows the first-order expansion around q = inf") {
    // (l1 / lq)^{q/(q-1)} = k_inf^{1 + 1/(q-1)} when one block dominates the l_q norm
    for (const Vector& z : sample_vectors(kPartition, 20, 4)) {
      const double kinf = q_ratio_sparsity(kPartition, z, Order::infinity());
      const double predicted = kinf * std::log(kinf) / (1e4 - 1.0);
      CHECK(std::abs(q_ratio_sparsity(kPartition, z, 1e4) - kinf - predicted) <= 1e-6);
    }
  }

  TEST_CASE("k_q approaches the entropy form at q = 1 +- 1e-4") {
    for (const Vector& z : sample_vectors(kPartition, 20, 5)) {
      // entropy oracle computed directly
      const std::vector<double> n = oracle::norms_of(kPartition, z);
      double l1 = 0.0;
      for (double x : n) l1 += x;
      double h = 0.0;
      for (double x : n)
        if (x > 0) h -= (x / l1) * std::log(x / l1);
      const double k1 = std::exp(h);
      CHECK(std::abs(q_ratio_sparsity(kPartition, z, 1.0) - k1) <= 1e-12 * k1);
      CHECK(std::abs(q_ratio_sparsity(kPartition, z, 1.0 + 1e-4) - k1) <= 1e-3);
      CHECK(std::abs(q_ratio_sparsity(kPartition, z, 1.0 - 1e-4) - k1) <= 1e-3);
    }
  }

  TEST_CASE("mixed norms are ordered") {
    for (const Vector& z : sample_vectors(kPartition, 50, 6)) {
      const double linf = mixed_norm(kPartition, z, Order::infinity());
      const double l1 = mixed_norm(kPartition, z, 1.0);
      for (Order q : {Order(1.0), Order(1.5), Order(2.0), Order(7.0), Order::infinity()}) {
        const double lq = mixed_norm(kPartition, z, q);
        CHECK(linf <= lq * (1.0 + 1e-14));
        CHECK(lq <= l1 * (1.0 + 1e-14));
      }
    }
  }
}

TEST_SUITE("gradient") {
  TEST_CASE("l2q_gradient matches central differences") {
    Rng rng(7, "gradient-points");
    const BlockPartition p({2, 3, 1, 2});
    for (double q : {1.5, 2.0, 4.0}) {
      for (int i = 0; i < 20; ++i) {
        const Vector v = random_vector(rng, p.size());
        const Vector g = l2q_gradient(p, v, q);
        const Vector fd = oracle::central_difference_gradient(p, v, q, 1e-5);
        CAPTURE(q);
        CHECK((g - fd).norm() <= 1e-6 * fd.norm());
      }
    }
  }
}

TEST_SUITE("projections") {
  TEST_CASE("l2,1 ball projection matches bisection") {
    Rng rng(8, "l21-oracle");
    const BlockPartition p({1, 3, 2, 2});
    for (int i = 0; i < 200; ++i) {
      const Vector v = random_vector(rng, p.size(), 0.1 + 3.0 * rng.uniform());
      const double r = 0.1 + 2.0 * rng.uniform();
      const Vector got = project_l21_ball(p, v, r);
      CHECK((got - oracle::l21_projection_bisection(p, v, r)).norm() <= 1e-8);
      if (mixed_norm(p, v, 1.0) > r) CHECK(std::abs(mixed_norm(p, got, 1.0) - r) <= 1e-12 * r);
    }
  }

  TEST_CASE("second-order cone projection closed forms") {
    Rng rng(9, "soc-oracle");
    for (int i = 0; i < 200; ++i) {
      const Vector u = random_vector(rng, 3);
      const double nu = u.norm();
      const double s = 2.0 * nu * (rng.uniform() - 0.5) * 2.0;
      const ConePoint out = project_soc({u, s});
      if (nu <= s) {
        CHECK(out.u == u);
        CHECK(out.s == s);
      } else if (nu <= -s) {
        CHECK(out.u == Vector::Zero(3));
        CHECK(out.s == 0.0);
      } else {
        const double a = 0.5 * (s + nu);
        CHECK((out.u - a * u / nu).norm() <= 1e-15 * std::max(1.0, a));
        CHECK(out.s == a);
      }
    }
  }
}

TEST_SUITE("subproblem") {
  TEST_CASE("two-block subproblems match grid search") {
    Rng rng(10, "grid-instances");
    struct Case {
      double y, eta, t0, c1, c2, ct;
    };
    std::vector<Case> cases = {{-0.5, 0.2, 1.0, 1.0, 0.0, 0.0}, {1.0, 0.5, 2.0, 1.0, 0.5, 0.0},
                               {0.5, 0.1, 0.5, 1.0, -1.0, -0.5}};
    for (int i = 0; i < 5; ++i) {
      const double y = 2.0 * rng.normal();
      cases.push_back({y, 0.05 + 0.45 * rng.uniform(), (0.2 + 0.8 * rng.uniform()) / (1.0 + std::abs(y)),
                       rng.normal(), rng.normal(), -rng.uniform()});
    }
    for (const Case& c : cases) {
      ConicProgram prog;
      prog.A = Matrix::Ones(1, 2);
      prog.y = Vector::Constant(1, c.y);
      prog.partition = BlockPartition({1, 1});
      prog.noise = NoiseModel::l2(c.eta);
      prog.t0 = c.t0;
      prog.objective.resize(3);
      prog.objective << c.c1, c.c2, c.ct;
      const ConicSolution sol = solve_ccp_subproblem(prog);
      const oracle::GridResult grid = oracle::two_block_grid_search(c.y, c.eta, c.t0, c.c1, c.c2, c.ct, 1e-3, 3);
      CAPTURE(c.y);
      CAPTURE(c.eta);
      CAPTURE(c.t0);
      CHECK(std::abs(sol.objective - grid.objective) <= 1e-4);
    }
  }
}

TEST_SUITE("ccp") {
  TEST_CASE("ascent, feasibility, objective consistency and scale covariance") {
    const BlockPartition p = BlockPartition::uniform(80, 2);
    for (int seed = 0; seed < 10; ++seed) {
      Rng rng(11, "ccp-properties", static_cast<std::uint64_t>(seed));
      const Matrix A = gaussian_matrix(30, 80, rng);
      const Vector x = block_sparse_signal(p, 5, rng);
      NoiseModel noise = NoiseModel::none();
      Vector y = A * x;
      if (seed % 3 == 1) {
        noise = NoiseModel::l2(0.05);
        y += bounded_noise(NoiseKind::L2, 0.05, A, p, rng);
      } else if (seed % 3 == 2) {
        noise = NoiseModel::l2inf(0.05);
        y += bounded_noise(NoiseKind::L2Inf, 0.05, A, p, rng);
      }
      CcpOptions opts;
      opts.q = std::vector<Order>{Order(1.5), Order(2.0), Order(4.0), Order::infinity()}[seed % 4];
      const RecoveryResult r = ccp_recover({A, y, p, noise}, opts);
      CAPTURE(seed);
      REQUIRE(r.status != RecoveryStatus::Degenerate);

      const double sub_tol = opts.subproblem.rel_tol;
      for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] >= r.trace[k - 1] - 10.0 * sub_tol);

      const Vector res = y - A * r.x;
      if (noise.kind == NoiseKind::L2Inf) {
        CHECK(p.block_norms(A.transpose() * res).maxCoeff() <= noise.level + 1e-5);
      } else {
        CHECK(res.norm() <= noise.level + 1e-5 * (1.0 + y.norm()));
      }

      CHECK(q_ratio_sparsity(p, r.x, opts.q) <= q_ratio_sparsity(p, r.initial, opts.q) + 1e-4);

      for (double c : {1e-3, 7.5}) {
        NoiseModel scaled = noise;
        scaled.level *= c;
        const RecoveryResult rc = ccp_recover({A, c * y, p, scaled}, opts);
        CHECK((rc.x - c * r.x).norm() <= 1e-6 * c * r.x.norm());
      }
    }
  }
}
