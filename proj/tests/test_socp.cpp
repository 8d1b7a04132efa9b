#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bqr/gen.hpp"
#include "bqr/harness.hpp"
#include "bqr/socp.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace bqr;

namespace {

ConicProgram two_block_program(double y, double eta, double t0, double c1, double c2, double ct) {
  ConicProgram prog;
  prog.A = Matrix::Ones(1, 2);
  prog.y = Vector::Constant(1, y);
  prog.partition = BlockPartition({1, 1});
  prog.noise = NoiseModel::l2(eta);
  prog.t0 = t0;
  prog.objective.resize(3);
  prog.objective << c1, c2, ct;
  return prog;
}

}  // namespace

TEST_CASE("subproblem with an inactive measurement constraint picks the dominant block") {
  Rng rng(21, "socp-inactive");
  ConicProgram prog;
  prog.A = gaussian_matrix(3, 6, rng);
  prog.y = Vector::Ones(3);
  prog.partition = BlockPartition({2, 3, 1});
  prog.noise = NoiseModel::l2(1e9);
  prog.t0 = 0.5;
  prog.objective = Vector::Zero(7);
  prog.objective.head(6) << 0.1, -0.2, 0.6, 0.3, -0.5, 0.4;
  const ConicSolution sol = solve_ccp_subproblem(prog);
  CHECK(sol.status == SolveStatus::Converged);
  const Vector c = prog.objective.head(6);
  const double cmax = prog.partition.block_norms(c).maxCoeff();  // block 1
  CHECK(sol.objective == doctest::Approx(cmax).epsilon(1e-6));
  const Vector expected_block = c.segment(2, 3) / c.segment(2, 3).norm();
  CHECK((sol.v.segment(2, 3) - expected_block).norm() <= 1e-5);
  CHECK(sol.v.head(2).norm() <= 1e-5);
  CHECK(std::abs(sol.v[5]) <= 1e-5);
  // t does not enter the objective, so any t >= t0 is optimal
  CHECK(sol.t >= prog.t0 * (1.0 - 1e-8));
}

TEST_CASE("subproblem with a zero objective returns a feasible point") {
  Rng rng(22, "socp-zero");
  ConicProgram prog;
  prog.A = gaussian_matrix(4, 8, rng);
  prog.y = gaussian_matrix(4, 1, rng).col(0);
  prog.partition = BlockPartition::uniform(8, 2);
  prog.noise = NoiseModel::l2(0.3);
  prog.t0 = 0.1;
  prog.objective = Vector::Zero(9);
  const ConicSolution sol = solve_ccp_subproblem(prog);
  CHECK(sol.objective == 0.0);
  CHECK(sol.t >= prog.t0 * (1.0 - 1e-8));
  CHECK(mixed_norm(prog.partition, sol.v, 1.0) <= 1.0 + 1e-6);
  CHECK((prog.y * sol.t - prog.A * sol.v).norm() <= prog.noise.level * sol.t + 1e-6);
}

TEST_CASE("two-block subproblems match the grid-search oracle") {
  struct Case {
    double y, eta, t0, c1, c2, ct;
  };
  for (const Case& c : {Case{-0.5, 0.2, 1.0, 1.0, 0.0, 0.0}, Case{1.0, 0.5, 2.0, 1.0, 0.5, 0.0},
                        Case{0.5, 0.1, 0.5, 1.0, -1.0, -0.5}}) {
    const ConicSolution sol = solve_ccp_subproblem(two_block_program(c.y, c.eta, c.t0, c.c1, c.c2, c.ct));
    const oracle::GridResult grid = oracle::two_block_grid_search(c.y, c.eta, c.t0, c.c1, c.c2, c.ct);
    CAPTURE(c.y);
    CHECK(sol.status == SolveStatus::Converged);
    CHECK(std::abs(sol.objective - grid.objective) <= 1e-4);
  }
}

TEST_CASE("subproblem rejects malformed programs") {
  ConicProgram prog = two_block_program(1.0, 0.1, 1.0, 1.0, 0.0, 0.0);
  prog.objective = Vector::Zero(2);
  CHECK_THROWS(solve_ccp_subproblem(prog));
  prog = two_block_program(1.0, 0.1, 1.0, 1.0, 0.0, 0.0);
  prog.partition = BlockPartition({1, 2});
  prog.objective = Vector::Zero(4);
  CHECK_THROWS(solve_ccp_subproblem(prog));
  prog = two_block_program(1.0, 0.1, -1.0, 1.0, 0.0, 0.0);
  CHECK_THROWS(solve_ccp_subproblem(prog));
  prog = two_block_program(1.0, -0.1, 1.0, 1.0, 0.0, 0.0);
  CHECK_THROWS(solve_ccp_subproblem(prog));
}

TEST_CASE("homogenized constraints hold after dividing by t") {
  Rng rng(23, "socp-homog");
  const BlockPartition p = BlockPartition::uniform(20, 2);
  const Matrix A = gaussian_matrix(8, 20, rng);
  Vector x = block_sparse_signal(p, 2, rng);
  const Vector y = A * x;
  Vector c(21);
  for (auto& ci : c) ci = rng.normal();
  c[20] = 0.0;
  for (NoiseModel noise : {NoiseModel::l2(0.2), NoiseModel::l2inf(0.2)}) {
    ConicProgram prog{c, A, y, p, noise, 1.0 / (100.0 * mixed_norm(p, x, 1.0))};
    const ConicSolution sol = solve_ccp_subproblem(prog);
    CHECK(sol.status == SolveStatus::Converged);
    REQUIRE(sol.t >= prog.t0 * (1.0 - 1e-8));
    const Vector r = y - A * (sol.v / sol.t);
    if (noise.kind == NoiseKind::L2) {
      CHECK(r.norm() <= noise.level + 1e-6);
    } else {
      CHECK(p.block_norms(A.transpose() * r).maxCoeff() <= noise.level + 1e-6);
    }
  }
}

TEST_CASE("warm starting does not worsen the objective") {
  Rng rng(24, "socp-warm");
  const BlockPartition p = BlockPartition::uniform(16, 2);
  const Matrix A = gaussian_matrix(6, 16, rng);
  const Vector x = block_sparse_signal(p, 2, rng);
  const Vector y = A * x;
  const double t0 = 1.0 / (100.0 * mixed_norm(p, x, 1.0));
  CcpSubproblemSolver solver(A, y, p, NoiseModel::none(), t0);
  Vector c(16);
  for (auto& ci : c) ci = rng.normal();
  const ConicSolution cold = solver.solve(c);
  const ConicSolution warm = solver.solve(c);
  CHECK(warm.objective >= cold.objective - 1e-6 * std::max(1.0, std::abs(cold.objective)));
}

TEST_CASE("block BP trivial cases") {
  const BlockPartition p = BlockPartition::uniform(5, 1);
  Vector y(5);
  y << 1, -2, 0, 3, 0.5;
  const Vector z = solve_block_bp(Matrix::Identity(5, 5), y, p, NoiseModel::none());
  CHECK((z - y).norm() <= 1e-6);

  Rng rng(25, "socp-bp-zero");
  const Matrix A = gaussian_matrix(3, 6, rng);
  const Vector zero = solve_block_bp(A, Vector::Zero(3), BlockPartition::uniform(6, 2), NoiseModel::none());
  CHECK(zero == Vector::Zero(6));
}

TEST_CASE("block BP on the toy problem lands on the solution line") {
  const ToyProblem toy = toy_problem();
  const Vector z = solve_block_bp(toy.A, toy.y, toy.partition, NoiseModel::none());
  CHECK((toy.A * z - toy.y).norm() <= 1e-6 * (1.0 + toy.y.norm()));
  const double t = z[0];
  CHECK((z - toy.line_point(t)).norm() <= 1e-5 * toy.y.norm());
}

TEST_CASE("block BP matches a one-dimensional kernel search") {
  Rng rng(26, "socp-bp-oracle");
  const BlockPartition p({1, 2});
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix A = gaussian_matrix(2, 3, rng);
    Vector y(2);
    y << rng.normal(), rng.normal();
    const Vector z = solve_block_bp(A, y, p, NoiseModel::none());
    // every feasible point is z_p + s h with h spanning ker A
    const Vector zp = A.completeOrthogonalDecomposition().solve(y);
    const Vector h = kernel_basis(A).col(0);
    auto f = [&](double s) { return oracle::mixed_norm_direct(p, zp + s * h, 1.0); };
    double lo = -100.0, hi = 100.0;
    for (int it = 0; it < 300; ++it) {
      const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
      if (f(a) < f(b)) {
        hi = b;
      } else {
        lo = a;
      }
    }
    const double best = f(0.5 * (lo + hi));
    CHECK(measurement_violation(A, y, p, NoiseModel::none(), z) <= 1e-6 * (1.0 + y.norm()));
    CHECK(mixed_norm(p, z, 1.0) <= best * (1.0 + 1e-5));
  }
}

TEST_CASE("block BP feasibility for the noisy models") {
  Rng rng(27, "socp-bp-noisy");
  const BlockPartition p = BlockPartition::uniform(40, 2);
  const Matrix A = gaussian_matrix(15, 40, rng);
  const Vector x = block_sparse_signal(p, 3, rng);
  const Vector y = A * x + bounded_noise(NoiseKind::L2, 0.1, A, p, rng);
  for (NoiseModel noise : {NoiseModel::none(), NoiseModel::l2(0.1), NoiseModel::l2inf(0.1)}) {
    const Vector z = solve_block_bp(A, y, p, noise);
    CHECK(measurement_violation(A, y, p, noise, z) <= 1e-6 * (1.0 + y.norm()));
    if (noise.kind == NoiseKind::L2) CHECK(mixed_norm(p, z, 1.0) <= mixed_norm(p, x, 1.0) * (1.0 + 1e-6));
  }
}

TEST_CASE("block BP rejects dimension mismatches") {
  CHECK_THROWS(solve_block_bp(Matrix::Identity(3, 4), Vector::Ones(3), BlockPartition({2, 3}),
                              NoiseModel::none()));
  CHECK_THROWS(solve_block_bp(Matrix::Identity(3, 4), Vector::Ones(2), BlockPartition({2, 2}),
                              NoiseModel::none()));
}
