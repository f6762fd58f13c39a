#include <cmath>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "iftflow/energy.hpp"

using namespace iftflow;
using iftflow::testing::Gen;

namespace {

double gauss(double sigma, const Vector& x, const Vector& y) {
  return std::exp(-(x - y).squaredNorm() / (2.0 * sigma * sigma));
}

// Double sum over all atom pairs, written independently of the Gram code.
double brute_mmd(double sigma, const ParticleMeasure& mu, const ParticleMeasure& nu) {
  auto cross = [&](const ParticleMeasure& p, const ParticleMeasure& q) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
      for (Eigen::Index j = 0; j < q.size(); ++j) {
        acc += p.weights()(i) * q.weights()(j) *
               gauss(sigma, p.locations().row(i).transpose(), q.locations().row(j).transpose());
      }
    }
    return acc;
  };
  return cross(mu, mu) - 2.0 * cross(mu, nu) + cross(nu, nu);
}

ParticleMeasure single(double x, double y) {
  Matrix loc(1, 2);
  loc << x, y;
  return uniform_measure(loc);
}

}  // namespace

TEST(MmdSquared, IdentityIsZero) {
  Gen gen(1);
  const ParticleMeasure mu = gen.uniform_cloud(7, 2);
  EXPECT_NEAR(mmd_squared(GaussianKernel(1.0), mu, mu), 0.0, 1e-15);
  EXPECT_NEAR(MmdEnergy(GaussianKernel(1.0), mu).mmd_squared(mu), 0.0, 1e-15);
}

TEST(MmdSquared, TwoSingleAtoms) {
  for (double sigma : {0.5, 1.0, 10.0}) {
    const double k = std::exp(-5.0 / (2.0 * sigma * sigma));
    EXPECT_NEAR(mmd_squared(GaussianKernel(sigma), single(0, 0), single(1, 2)), 2.0 * (1.0 - k), 1e-14);
  }
}

TEST(MmdSquared, MatchesBruteDoubleSum) {
  Gen gen(2);
  for (int trial = 0; trial < 25; ++trial) {
    const double sigma = gen.uniform(0.3, 3.0);
    const ParticleMeasure mu = gen.measure(3, 2);
    const ParticleMeasure nu = gen.uniform_cloud(2, 2);
    EXPECT_NEAR(mmd_squared(GaussianKernel(sigma), mu, nu), brute_mmd(sigma, mu, nu), 1e-13);
    EXPECT_NEAR(MmdEnergy(GaussianKernel(sigma), nu).mmd_squared(mu), brute_mmd(sigma, mu, nu), 1e-13);
  }
}

TEST(MmdSquared, SymmetricAndPermutationInvariant) {
  Gen gen(3);
  const GaussianKernel k(1.2);
  const ParticleMeasure mu = gen.measure(6, 3);
  const ParticleMeasure nu = gen.measure(4, 3);
  EXPECT_NEAR(mmd_squared(k, mu, nu), mmd_squared(k, nu, mu), 1e-14);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(6);
  perm.setIdentity();
  std::shuffle(perm.indices().data(), perm.indices().data() + 6, gen.engine());
  const ParticleMeasure shuffled(perm * mu.locations(), perm * mu.weights());
  EXPECT_NEAR(mmd_squared(k, mu, nu), mmd_squared(k, shuffled, nu), 1e-14);
  EXPECT_GE(mmd_squared(k, mu, nu), 0.0);
}

TEST(MmdSquared, DimensionMismatch) {
  Gen gen(4);
  EXPECT_THROW(mmd_squared(GaussianKernel(1.0), gen.measure(2, 2), gen.measure(2, 3)), InvalidInputError);
  const MmdEnergy energy(GaussianKernel(1.0), gen.uniform_cloud(3, 2));
  EXPECT_THROW(energy.mmd_squared(gen.measure(2, 3)), InvalidInputError);
}

TEST(MmdEnergy, RequiresUniformTarget) {
  Gen gen(5);
  EXPECT_THROW(MmdEnergy(GaussianKernel(1.0), gen.measure(3, 2)), InvalidInputError);
}

TEST(Witness, VanishesWhenMeasureEqualsTarget) {
  Gen gen(6);
  const ParticleMeasure pi = gen.uniform_cloud(5, 2);
  const MmdEnergy energy(GaussianKernel(1.0), pi);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector z = gen.points(1, 2).row(0).transpose();
    EXPECT_NEAR(energy.witness(pi, z), 0.0, 1e-15);
    EXPECT_NEAR(energy.witness_gradient(pi, z).norm(), 0.0, 1e-15);
  }
}

TEST(Witness, TwoAtomHandEvaluation) {
  const MmdEnergy energy(GaussianKernel(2.0), single(1, 2));
  const Vector x = single(0, 0).locations().row(0).transpose();
  EXPECT_NEAR(energy.witness(single(0, 0), x), 1.0 - std::exp(-5.0 / 8.0), 1e-15);
}

TEST(Witness, IntegralIdentity) {
  Gen gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const ParticleMeasure pi = gen.uniform_cloud(gen.integer(1, 8), 2);
    const ParticleMeasure mu = gen.measure(gen.integer(1, 8), 2);
    const MmdEnergy energy(GaussianKernel(gen.uniform(0.5, 3.0)), pi);
    const double lhs = mu.weights().dot(energy.witness_values(mu, mu.locations())) -
                       pi.weights().dot(energy.witness_values(mu, pi.locations()));
    EXPECT_NEAR(lhs, energy.mmd_squared(mu), 1e-12);
  }
}

TEST(WitnessGradient, CancelsForCoincidentSingleAtoms) {
  const MmdEnergy energy(GaussianKernel(1.0), single(0.5, 0.5));
  Vector z(2);
  z << 3.0, -1.0;
  EXPECT_EQ(energy.witness_gradient(single(0.5, 0.5), z).norm(), 0.0);
}

TEST(WitnessGradient, MatchesCentralDifferences) {
  Gen gen(8);
  const double h = 1e-6;
  const ParticleMeasure pi = gen.uniform_cloud(10, 2);
  const ParticleMeasure mu = gen.measure(10, 2, 2.0);
  const MmdEnergy energy(GaussianKernel(1.0), pi);
  for (int trial = 0; trial < 100; ++trial) {
    const Vector z = gen.points(1, 2, 1.5).row(0).transpose();
    const Vector g = energy.witness_gradient(mu, z);
    Vector fd(2);
    for (int a = 0; a < 2; ++a) {
      Vector zp = z, zm = z;
      zp(a) += h;
      zm(a) -= h;
      fd(a) = (energy.witness(mu, zp) - energy.witness(mu, zm)) / (2 * h);
    }
    EXPECT_LE((g - fd).norm(), 1e-4 * g.norm() + 1e-10);
  }
}

TEST(WitnessGradient, FieldAndGramPathsAgree) {
  Gen gen(9);
  const ParticleMeasure pi = gen.uniform_cloud(6, 3);
  const ParticleMeasure mu = gen.measure(8, 3);
  const MmdEnergy energy(GaussianKernel(1.7), pi);
  const Matrix queries = gen.points(5, 3);
  const Matrix field = energy.witness_gradient_field(mu, queries);
  const Matrix from_grams = energy.witness_gradient_from_grams(
      mu, queries, energy.kernel().gram(queries, mu.locations()), energy.kernel().gram(queries, pi.locations()));
  for (int i = 0; i < 5; ++i) {
    const Vector pointwise = energy.witness_gradient(mu, queries.row(i).transpose());
    EXPECT_LE((field.row(i).transpose() - pointwise).norm(), 1e-14);
    EXPECT_LE((from_grams.row(i).transpose() - pointwise).norm(), 1e-14);
  }
}

TEST(MmdEnergy, FromGramsMatchesDirect) {
  Gen gen(10);
  const ParticleMeasure pi = gen.uniform_cloud(6, 2);
  const ParticleMeasure mu = gen.measure(4, 2);
  const MmdEnergy energy(GaussianKernel(1.0), pi);
  const double via = energy.mmd_squared_from_grams(energy.kernel().gram(mu.locations()),
                                                   energy.kernel().gram(mu.locations(), pi.locations()), mu.weights());
  EXPECT_NEAR(via, energy.mmd_squared(mu), 1e-15);
}
