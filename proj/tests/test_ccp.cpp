#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bqr/ccp.hpp"
#include "bqr/gen.hpp"
#include "bqr/harness.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace bqr;

TEST_CASE("l2q_gradient at q = 2 is the unit vector") {
  Rng rng(31, "ccp-grad2");
  const BlockPartition p({2, 1, 3});
  Vector v(6);
  for (auto& x : v) x = rng.normal();
  const Vector g = l2q_gradient(p, v, 2.0);
  CHECK((g - v / v.norm()).norm() <= 1e-15);
}

TEST_CASE("l2q_gradient at q = inf picks the largest block") {
  const BlockPartition p({2, 2});
  Vector v(4);
  v << 3, 4, 1, 0;
  Vector expected(4);
  expected << 0.6, 0.8, 0, 0;
  CHECK((l2q_gradient(p, v, Order::infinity()) - expected).norm() <= 1e-15);
  Vector tie(4);
  tie << 0, 1, 1, 0;
  Vector first(4);
  first << 0, 1, 0, 0;
  CHECK(l2q_gradient(p, tie, Order::infinity()) == first);
}

TEST_CASE("l2q_gradient zero blocks") {
  const BlockPartition p({2, 1});
  Vector v(3);
  v << 1, 2, 0;
  CHECK(l2q_gradient(p, v, 4.0)[2] == 0.0);
  CHECK(l2q_gradient(p, v, 1.5).allFinite());
  CHECK(l2q_gradient(p, v, 1.5)[2] == 0.0);
  CHECK_THROWS(l2q_gradient(p, Vector::Zero(3), 2.0));
  CHECK_THROWS(l2q_gradient(p, v, 1.0));
}

TEST_CASE("choose_t0 examples") {
  const BlockPartition p({1, 2});
  Vector x(3);
  x << 0.5, 0.3, 0.4;
  CHECK(choose_t0(p, x, 100.0) == doctest::Approx(0.01));
  CHECK(choose_t0(p, 4.0 * x, 100.0) == doctest::Approx(0.01 / 4.0));
  CHECK_THROWS(choose_t0(p, Vector::Zero(3), 100.0));

  const ToyProblem toy = toy_problem();
  const Vector x0 = solve_block_bp(toy.A, toy.y, toy.partition, NoiseModel::none());
  const RecoveryResult r = ccp_recover({toy.A, toy.y, toy.partition, NoiseModel::none()});
  // t0 is reported in units where ||y||_2 = 1, so the initializer shrinks by ||y||
  CHECK(r.t0 == doctest::Approx(toy.y.norm() / (100.0 * mixed_norm(toy.partition, x0, 1.0))).epsilon(1e-4));
}

TEST_CASE("ccp on the toy problem reaches the block-sparsest solution") {
  const ToyProblem toy = toy_problem();
  CcpOptions opts;
  opts.q = 2.0;
  const RecoveryResult r = ccp_recover({toy.A, toy.y, toy.partition, NoiseModel::none()}, opts);
  const Vector target = toy.line_point(0.0);
  CAPTURE(r.x.transpose());
  CHECK((r.x - target).norm() / target.norm() <= 1e-3);
}

TEST_CASE("ccp recovers a Gaussian block-sparse instance") {
  Rng rng(32, "ccp-gauss");
  const BlockPartition p = BlockPartition::uniform(400, 2);
  const Matrix A = gaussian_matrix(120, 400, rng);
  const Vector x = block_sparse_signal(p, 20, rng);
  const RecoveryResult r = ccp_recover({A, A * x, p, NoiseModel::none()});
  CHECK((r.x - x).norm() / x.norm() <= 1e-3);
}

TEST_CASE("ccp with y = 0 is degenerate") {
  Rng rng(33, "ccp-zero");
  const BlockPartition p = BlockPartition::uniform(10, 2);
  const RecoveryResult r = ccp_recover({gaussian_matrix(4, 10, rng), Vector::Zero(4), p, NoiseModel::none()});
  CHECK(r.status == RecoveryStatus::Degenerate);
  CHECK(r.x == Vector::Zero(10));
}

TEST_CASE("ccp rejects invalid options and problems") {
  Rng rng(34, "ccp-bad");
  const BlockPartition p = BlockPartition::uniform(10, 2);
  const Matrix A = gaussian_matrix(4, 10, rng);
  CHECK_THROWS(ccp_recover({A, Vector::Ones(4), p, NoiseModel::l2(-0.1)}));
  CcpOptions opts;
  opts.q = 1.0;
  CHECK_THROWS(ccp_recover({A, Vector::Ones(4), p, NoiseModel::none()}, opts));
  opts.q = 2.0;
  opts.t0_slack = 1.0;
  CHECK_THROWS(ccp_recover({A, Vector::Ones(4), p, NoiseModel::none()}, opts));
}

TEST_CASE("ccp records one subproblem per outer iteration") {
  Rng rng(35, "ccp-trace");
  const BlockPartition p = BlockPartition::uniform(60, 2);
  const Matrix A = gaussian_matrix(24, 60, rng);
  const Vector x = block_sparse_signal(p, 4, rng);
  CcpOptions opts;
  opts.q = 1.5;
  const RecoveryResult r = ccp_recover({A, A * x, p, NoiseModel::none()}, opts);
  CHECK(r.trace.size() == static_cast<std::size_t>(r.iterations) + 1);
  CHECK(r.subproblems.size() == static_cast<std::size_t>(r.iterations));
  CHECK(r.iterations <= opts.max_iterations);
  CHECK(r.initial.size() == 60);
}
