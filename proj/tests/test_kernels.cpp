#include <cmath>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "iftflow/kernels.hpp"

using namespace iftflow;
using iftflow::testing::Gen;

namespace {

Vector v2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST(GaussianKernel, IdentityIsOne) {
  const GaussianKernel k(10.0);
  EXPECT_EQ(k(v2(1.3, -2.0), v2(1.3, -2.0)), 1.0);
}

TEST(GaussianKernel, HandEvaluatedExamples) {
  EXPECT_NEAR(GaussianKernel(1.0)(v2(0, 0), v2(std::sqrt(2.0), 0)), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(GaussianKernel(10.0)(v2(0, 0), v2(3, 4)), std::exp(-0.125), 1e-15);
}

TEST(GaussianKernel, InverseVarianceConvention) {
  const GaussianKernel k(1.0, BandwidthConvention::kInverseVariance);
  EXPECT_NEAR(k(v2(0, 0), v2(1, 0)), std::exp(-1.0), 1e-15);
  EXPECT_DOUBLE_EQ(k.exponent_scale(), 1.0);
  EXPECT_DOUBLE_EQ(GaussianKernel(2.0).exponent_scale(), 1.0 / 8.0);
}

TEST(GaussianKernel, RejectsBadInput) {
  EXPECT_THROW(GaussianKernel(0.0), InvalidInputError);
  EXPECT_THROW(GaussianKernel(-1.0), InvalidInputError);
  const GaussianKernel k(1.0);
  Vector three = Vector::Zero(3);
  EXPECT_THROW(k(v2(0, 0), three), InvalidInputError);
  EXPECT_THROW(k.grad2(v2(0, 0), three), InvalidInputError);
  EXPECT_THROW(k.gram(Matrix(0, 2)), InvalidInputError);
  EXPECT_THROW(k.gram(Matrix::Zero(2, 2), Matrix::Zero(2, 3)), InvalidInputError);
}

TEST(GaussianKernel, GradientAtCoincidenceIsZero) {
  const Vector g = GaussianKernel(3.0).grad2(v2(0.4, 0.1), v2(0.4, 0.1));
  EXPECT_EQ(g.norm(), 0.0);
}

TEST(GaussianKernel, GradientHandExample) {
  const Vector g = GaussianKernel(1.0).grad2(v2(1, 0), v2(0, 0));
  EXPECT_NEAR(g(0), std::exp(-0.5), 1e-15);
  EXPECT_NEAR(g(1), 0.0, 1e-15);
}

TEST(GaussianKernel, GradientMatchesCentralDifferences) {
  Gen gen(11);
  const double h = 1e-6;
  for (int trial = 0; trial < 100; ++trial) {
    const double sigma = gen.uniform(0.5, 5.0);
    const GaussianKernel k(sigma);
    const Vector x = gen.points(1, 3).row(0).transpose();
    const Vector z = x + gen.points(1, 3, sigma).row(0).transpose();
    const Vector g = k.grad2(x, z);
    Vector fd(3);
    for (int a = 0; a < 3; ++a) {
      Vector zp = z, zm = z;
      zp(a) += h;
      zm(a) -= h;
      fd(a) = (k(x, zp) - k(x, zm)) / (2 * h);
    }
    EXPECT_LE((g - fd).norm(), 1e-4 * std::max(g.norm(), 1e-8)) << "trial " << trial;
  }
}

TEST(GaussianKernel, GramMatchesEntrywiseEval) {
  Gen gen(3);
  const GaussianKernel k(1.5);
  const Matrix a = gen.points(2, 2);
  const Matrix b = gen.points(2, 2);
  const Matrix g = k.gram(a, b);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(g(i, j), k(a.row(i).transpose(), b.row(j).transpose()));
  }
}

TEST(GaussianKernel, SymmetricGramAgreesWithGeneralPath) {
  Gen gen(5);
  const GaussianKernel k(2.0);
  const Matrix a = gen.points(17, 4);
  const Matrix sym = k.gram(a);
  const Matrix general = k.gram(a, a);
  EXPECT_TRUE(sym == sym.transpose());
  EXPECT_TRUE(sym == general);
  for (int i = 0; i < 17; ++i) EXPECT_EQ(sym(i, i), 1.0);
}

TEST(GaussianKernel, TranslationAndScalingInvariance) {
  Gen gen(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = gen.points(1, 2).row(0).transpose();
    const Vector y = gen.points(1, 2).row(0).transpose();
    const Vector shift = gen.points(1, 2, 10.0).row(0).transpose();
    const double s = gen.uniform(0.2, 5.0);
    EXPECT_NEAR(GaussianKernel(1.0)(x, y), GaussianKernel(1.0)(x + shift, y + shift), 1e-12);
    EXPECT_NEAR(GaussianKernel(1.0)(x, y), GaussianKernel(s)(s * x, s * y), 1e-12);
  }
}

TEST(GramBundle, BlocksAndMinEigenvalue) {
  Gen gen(9);
  const GaussianKernel k(1.0);
  const Matrix x = gen.points(6, 2), y = gen.points(4, 2), old = gen.points(6, 2);
  const GramBundle b = make_gram_bundle(k, x, y, old, true);
  EXPECT_TRUE(b.kxx == k.gram(x));
  EXPECT_TRUE(b.kxy == k.gram(x, y));
  EXPECT_TRUE(b.kx_old == k.gram(x, old));
  ASSERT_TRUE(b.kyy.has_value());
  EXPECT_GE(min_eigenvalue(b.kxx), -1e-12);
  EXPECT_FALSE(make_gram_bundle(k, x, y, old).kyy.has_value());
}
