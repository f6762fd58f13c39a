// Randomized invariant checks. Each test draws many instances from a seeded
// generator and reports the first failing seed.
#include <cmath>

#include <gtest/gtest.h>

#include "generators.hpp"
#include "iftflow/flows.hpp"

using namespace iftflow;
using iftflow::testing::Gen;

namespace {

constexpr int kCases = 60;

}  // namespace

TEST(Property, SimplexProjectionIsIdempotentAndFeasible) {
  for (int s = 0; s < kCases; ++s) {
    Gen gen(1000 + s);
    const Vector v = gen.vector(gen.integer(1, 40), -5.0, 5.0);
    const Vector p = simplex_project(v);
    ASSERT_GE(p.minCoeff(), 0.0) << "seed " << s;
    ASSERT_NEAR(p.sum(), 1.0, 1e-12) << "seed " << s;
    ASSERT_LE((simplex_project(p) - p).cwiseAbs().maxCoeff(), 1e-15) << "seed " << s;
  }
}

TEST(Property, SolverOutputsStayOnSimplexAndChainIsMonotone) {
  for (int s = 0; s < kCases; ++s) {
    Gen gen(2000 + s);
    const auto n = gen.integer(1, 25);
    const SimplexQp qp = gen.psd_qp(n);
    const Vector beta = gen.simplex(n);
    const Vector one = qp_pgd_step(qp, beta, 1.0 / std::max(power_iteration(qp.q), 1e-12));
    const Vector exact = solve_qp_exact(qp, beta);
    for (const Vector* out : {&one, &exact}) {
      ASSERT_GE(out->minCoeff(), 0.0) << "seed " << s;
      ASSERT_NEAR(out->sum(), 1.0, 1e-12) << "seed " << s;
    }
    ASSERT_LE(qp.objective(exact), qp.objective(one) + 1e-12) << "seed " << s;
    ASSERT_LE(qp.objective(one), qp.objective(beta) + 1e-12) << "seed " << s;
  }
}

TEST(Property, MmdIsSymmetricNonnegativeAndZeroOnlyOnItself) {
  for (int s = 0; s < kCases; ++s) {
    Gen gen(3000 + s);
    const GaussianKernel k(gen.uniform(0.3, 10.0));
    const auto d = gen.integer(1, 5);
    const ParticleMeasure mu = gen.measure(gen.integer(1, 10), d);
    const ParticleMeasure nu = gen.measure(gen.integer(1, 10), d);
    const double forward = mmd_squared(k, mu, nu);
    ASSERT_GE(forward, 0.0);
    ASSERT_NEAR(forward, mmd_squared(k, nu, mu), 1e-13) << "seed " << s;
    ASSERT_NEAR(mmd_squared(k, mu, mu), 0.0, 1e-13) << "seed " << s;
  }
}

TEST(Property, InterpolationLawHoldsExactly) {
  for (int s = 0; s < kCases; ++s) {
    Gen gen(4000 + s);
    const ParticleMeasure mu0 = gen.measure(gen.integer(1, 8), 2);
    const ParticleMeasure pi = gen.uniform_cloud(gen.integer(1, 8), 2);
    const GaussianKernel k(gen.uniform(0.5, 10.0));
    const double base = mmd_squared(k, mu0, pi);
    const double t = gen.uniform(0.0, 4.0);
    ASSERT_NEAR(mmd_squared(k, interpolation_oracle(mu0, pi, t), pi), std::exp(-2.0 * t) * base, 1e-10)
        << "seed " << s;
  }
}

TEST(Property, WitnessIntegratesToMmd) {
  for (int s = 0; s < kCases; ++s) {
    Gen gen(5000 + s);
    const auto d = gen.integer(1, 4);
    const ParticleMeasure pi = gen.uniform_cloud(gen.integer(1, 9), d);
    const ParticleMeasure mu = gen.measure(gen.integer(1, 9), d);
    const MmdEnergy energy(GaussianKernel(gen.uniform(0.3, 5.0)), pi);
    const double lhs = mu.weights().dot(energy.witness_values(mu, mu.locations())) -
                       pi.weights().dot(energy.witness_values(mu, pi.locations()));
    ASSERT_NEAR(lhs, energy.mmd_squared(mu), 1e-12) << "seed " << s;
  }
}

TEST(Property, SplitSchemesPreserveMassAndAreDeterministic) {
  for (int s = 0; s < 12; ++s) {
    Gen gen(6000 + s);
    const MmdEnergy energy(GaussianKernel(gen.uniform(1.0, 10.0)), gen.uniform_cloud(gen.integer(2, 15), 2));
    const ParticleMeasure mu0 = gen.uniform_cloud(gen.integer(2, 15), 2, 3.0);
    FlowConfig cfg;
    cfg.tau = gen.uniform(0.1, 20.0);
    cfg.iterations = 25;
    cfg.snapshot_every = 5;
    cfg.mmd_step_mode = s % 2 ? MmdStepMode::kExactQp : MmdStepMode::kSinglePgd;
    cfg.transport_scaling = s % 3 ? TransportScaling::kParticle : TransportScaling::kMeasure;
    for (auto run : {&run_ift, &run_wfr}) {
      const Trace a = run(energy, mu0, cfg);
      const Trace b = run(energy, mu0, cfg);
      for (const auto& snap : a.snapshots) {
        ASSERT_LE(std::abs(snap.measure.weights().sum() - 1.0), 1e-12) << "seed " << s;
        ASSERT_GE(snap.measure.weights().minCoeff(), 0.0) << "seed " << s;
      }
      ASSERT_EQ(a.losses.size(), b.losses.size());
      for (std::size_t i = 0; i < a.losses.size(); ++i) ASSERT_EQ(a.losses[i].loss, b.losses[i].loss);
      ASSERT_TRUE(a.final_state() == b.final_state()) << "seed " << s;
    }
  }
}

TEST(Property, EulerEqualsExplicitRelaxation) {
  for (int s = 0; s < 20; ++s) {
    Gen gen(7000 + s);
    const MmdEnergy energy(GaussianKernel(1.0), gen.uniform_cloud(gen.integer(1, 6), 2));
    const ParticleMeasure mu0 = gen.measure(gen.integer(1, 6), 2);
    const double h = gen.uniform(0.01, 0.5);
    const long steps = gen.integer(1, 40);
    const Trace trace = euler_spherical_mmd(energy, mu0, h, steps);
    const Vector w0 = interpolation_oracle(mu0, energy.target(), 0.0).weights();
    const Vector wpi = interpolation_oracle(mu0, energy.target(), 800.0).weights();
    const Vector expected = wpi + std::pow(1.0 - h, static_cast<double>(steps)) * (w0 - wpi);
    ASSERT_LE((trace.final_state().weights() - expected).cwiseAbs().maxCoeff(), 1e-13) << "seed " << s;
  }
}
