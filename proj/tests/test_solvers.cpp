#include <cmath>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "generators.hpp"
#include "iftflow/energy.hpp"
#include "iftflow/solvers.hpp"

using namespace iftflow;
using iftflow::testing::Gen;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

SimplexQp diag_qp(const Vector& c) {
  return SimplexQp{2.0 * Matrix::Identity(c.size(), c.size()), c};
}

}  // namespace

TEST(AssembleQp, ObjectiveMatchesDirectMmdUpToConstant) {
  Gen gen(1);
  const GaussianKernel kernel(1.0);
  const double lambda = 0.7;
  const ParticleMeasure target = gen.uniform_cloud(3, 2);
  const ParticleMeasure prev = gen.measure(2, 2);
  const Matrix moved = gen.points(2, 2);
  const SimplexQp qp = assemble_mmd_step_qp(make_gram_bundle(kernel, moved, target.locations(), prev.locations()),
                                            prev.weights(), lambda, target.size());
  auto direct = [&](const Vector& beta) {
    const ParticleMeasure mu(moved, beta);
    return lambda * mmd_squared(kernel, mu, target) + mmd_squared(kernel, mu, prev);
  };
  const Vector b0 = gen.simplex(2);
  const double offset = direct(b0) - qp.objective(b0);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector beta = gen.simplex(2);
    EXPECT_NEAR(direct(beta) - qp.objective(beta), offset, 1e-12);
  }
}

TEST(AssembleQp, Coefficients) {
  GramBundle g;
  g.kxx = Matrix::Identity(2, 2);
  g.kxy = Matrix::Ones(2, 4);
  g.kx_old = Matrix::Identity(2, 2);
  const SimplexQp qp = assemble_mmd_step_qp(g, vec({0.25, 0.75}), 0.5, 4);
  EXPECT_TRUE(qp.q.isApprox(3.0 * Matrix::Identity(2, 2)));
  EXPECT_TRUE(qp.c.isApprox(vec({-1.0 - 0.5, -1.0 - 1.5})));
  EXPECT_THROW(assemble_mmd_step_qp(g, vec({0.25, 0.75}), 0.5, 3), InvalidInputError);
  EXPECT_THROW(assemble_mmd_step_qp(g, vec({1.0}), 0.5, 4), InvalidInputError);
}

TEST(SolveQpExact, HandExamples) {
  const Vector uniform = solve_qp_exact(diag_qp(Vector::Zero(3)), vec({1.0, 0.0, 0.0}));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(uniform(i), 1.0 / 3.0, 1e-9);
  const Vector corner = solve_qp_exact(diag_qp(vec({-2.0, 0.0, 0.0})), vec({0.2, 0.3, 0.5}));
  EXPECT_NEAR(corner(0), 1.0, 1e-9);
  EXPECT_NEAR(corner(1), 0.0, 1e-9);
  EXPECT_NEAR(corner(2), 0.0, 1e-9);
}

TEST(SolveQpExact, MatchesGridOracle) {
  Gen gen(2);
  for (int trial = 0; trial < 50; ++trial) {
    const SimplexQp qp = gen.psd_qp(3);
    const Vector exact = solve_qp_exact(qp, Vector::Constant(3, 1.0 / 3.0));
    const Vector grid = brute_force_simplex(qp, 1e-3);
    EXPECT_LE(qp.objective(exact), qp.objective(grid) + 1e-6) << "trial " << trial;
    EXPECT_NEAR(exact.sum(), 1.0, 1e-12);
    EXPECT_GE(exact.minCoeff(), 0.0);
  }
}

TEST(SolveQpExact, IllConditionedKernelInstances) {
  Gen gen(3);
  const GaussianKernel kernel(10.0);
  for (int trial = 0; trial < 5; ++trial) {
    const ParticleMeasure target = gen.uniform_cloud(100, 2);
    const ParticleMeasure prev = gen.uniform_cloud(100, 2);
    const Matrix moved = prev.locations() + 0.1 * gen.points(100, 2);
    const SimplexQp qp = assemble_mmd_step_qp(
        make_gram_bundle(kernel, moved, target.locations(), prev.locations()), prev.weights(), 0.1, 100);
    const Vector beta = solve_qp_exact(qp, prev.weights());
    EXPECT_LE(qp.objective(beta), qp.objective(prev.weights()));
    EXPECT_LE(projected_gradient_residual(qp, beta, 1.0 / simplex_lipschitz(qp.q)), 1e-10);
  }
}

TEST(SolveQpExact, ReportsNonConvergence) {
  Gen gen(4);
  const SimplexQp qp = gen.psd_qp(20);
  try {
    solve_qp_exact(qp, Vector::Constant(20, 0.05), QpSolveOptions{1e-300, 3});
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_EQ(e.last_iterate().size(), 20);
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(QpPgdStep, FixedPointAndContinuity) {
  const SimplexQp qp = diag_qp(Vector::Zero(3));
  const Vector u = Vector::Constant(3, 1.0 / 3.0);
  EXPECT_LE((qp_pgd_step(qp, u, 0.5) - u).norm(), 1e-15);
  Gen gen(5);
  const SimplexQp random = gen.psd_qp(4);
  const Vector beta = gen.simplex(4);
  EXPECT_LE((qp_pgd_step(random, beta, 1e-14) - beta).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(QpPgdStep, DescentAndMonotoneChain) {
  Gen gen(6);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = gen.integer(2, 8);
    const SimplexQp qp = gen.psd_qp(n);
    const Vector beta = gen.simplex(n);
    const double lmax = power_iteration(qp.q);
    const Vector one = qp_pgd_step(qp, beta, 1.0 / lmax);
    const Vector exact = solve_qp_exact(qp, beta);
    EXPECT_LE(qp.objective(one), qp.objective(beta) + 1e-14);
    EXPECT_LE(qp.objective(exact), qp.objective(one) + 1e-12);
  }
}

TEST(PowerIteration, MatchesEigenSolver) {
  Gen gen(7);
  const SimplexQp qp = gen.psd_qp(6);
  Eigen::SelfAdjointEigenSolver<Matrix> es(qp.q);
  EXPECT_NEAR(power_iteration(qp.q, 5000, 1e-14), es.eigenvalues().maxCoeff(), 1e-6);
  EXPECT_LE(simplex_lipschitz(qp.q), es.eigenvalues().maxCoeff() + 1e-9);
}

TEST(BruteForce, ParabolaMinimum) {
  // f(b) = 0.5 q11 b^2 + 0.5 q22 (1-b)^2 + q12 b(1-b) + c1 b + c2 (1-b) on b in [0,1].
  Matrix q(2, 2);
  q << 4.0, 1.0, 1.0, 2.0;
  const Vector c = vec({0.5, -0.5});
  const double a = q(0, 0) + q(1, 1) - 2 * q(0, 1);
  const double slope = -q(1, 1) + q(0, 1) + c(0) - c(1);
  const double b_star = std::clamp(-slope / a, 0.0, 1.0);
  const Vector grid = brute_force_simplex(SimplexQp{q, c}, 1e-4);
  EXPECT_NEAR(grid(0), b_star, 1e-4);
  EXPECT_NEAR(grid.sum(), 1.0, 1e-12);
}

TEST(BruteForce, TieBreakingAndGuards) {
  const Vector first = brute_force_simplex(SimplexQp{Matrix::Zero(3, 3), Vector::Zero(3)}, 0.5);
  EXPECT_TRUE(first.isApprox(vec({0.0, 0.0, 1.0})));
  EXPECT_THROW(brute_force_simplex(SimplexQp{Matrix::Zero(5, 5), Vector::Zero(5)}, 0.1), InvalidInputError);
}
