#include "iftflow/oracle_suite.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "iftflow/flows.hpp"

namespace iftflow {

namespace {

Matrix random_points(Eigen::Index n, Eigen::Index d, double spread, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, spread);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k) x(i, k) = normal(rng);
  }
  return x;
}

Vector random_simplex(Eigen::Index n, std::mt19937_64& rng) {
  std::exponential_distribution<double> expo(1.0);
  Vector w(n);
  for (Eigen::Index i = 0; i < n; ++i) w(i) = expo(rng);
  return w / w.sum();
}

std::string describe(const char* label, double value, const char* bound_label, double bound) {
  std::ostringstream os;
  os.precision(3);
  os << label << "=" << std::scientific << value << " (" << bound_label << " " << bound << ")";
  return os.str();
}

OracleCheck interpolation_law(std::mt19937_64& rng) {
  double worst = 0.0;
  const double sigmas[] = {0.5, 1.0, 10.0};
  const double times[] = {0.0, 0.25, 0.5, 1.0, 2.0};
  for (int trial = 0; trial < 20; ++trial) {
    const GaussianKernel kernel(sigmas[trial % 3]);
    const ParticleMeasure mu0(random_points(5, 2, 1.5, rng), random_simplex(5, rng));
    const ParticleMeasure pi = uniform_measure(random_points(4, 2, 1.5, rng));
    const double base = mmd_squared(kernel, mu0, pi);
    for (double t : times) {
      const double got = mmd_squared(kernel, interpolation_oracle(mu0, pi, t), pi);
      worst = std::max(worst, std::abs(got - std::exp(-2.0 * t) * base));
    }
  }
  return {"interpolation decay law", worst <= 1e-10, describe("max_abs_err", worst, "<=", 1e-10)};
}

OracleCheck euler_consistency(std::mt19937_64& rng) {
  const GaussianKernel kernel(1.0);
  const ParticleMeasure mu0 = uniform_measure(random_points(5, 2, 1.5, rng));
  const MmdEnergy energy(kernel, uniform_measure(random_points(4, 2, 1.5, rng)));
  const double h = 1e-3;
  const Trace trace = euler_spherical_mmd(energy, mu0, h, 2000);
  const Vector exact = interpolation_oracle(mu0, energy.target(), 2.0).weights();
  const double err = (trace.final_state().weights() - exact).cwiseAbs().maxCoeff();
  const double rate = fit_decay_rate(trace, IndexRange{0, trace.losses.size()});
  const bool ok = err <= 5e-3 && std::abs(rate + 2.0) <= 0.02;
  std::ostringstream os;
  os << describe("weight_err", err, "<=", 5e-3) << ", rate=" << rate << " (-2 +/- 0.02)";
  return {"euler consistency", ok, os.str()};
}

OracleCheck qp_vs_grid(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a(3, 3);
    for (int i = 0; i < 9; ++i) a(i / 3, i % 3) = unif(rng);
    SimplexQp qp{a * a.transpose(), Vector(3)};
    for (int i = 0; i < 3; ++i) qp.c(i) = unif(rng);
    const double exact = qp.objective(solve_qp_exact(qp, Vector::Constant(3, 1.0 / 3.0)));
    const double grid = qp.objective(brute_force_simplex(qp, 1e-3));
    worst = std::max(worst, std::abs(exact - grid));
  }
  return {"qp solver vs grid", worst <= 1e-6, describe("max_obj_gap", worst, "<=", 1e-6)};
}

OracleCheck gradient_vs_fd(std::mt19937_64& rng) {
  const GaussianKernel kernel(1.0);
  const ParticleMeasure mu(random_points(10, 2, 1.0, rng), random_simplex(10, rng));
  const MmdEnergy energy(kernel, uniform_measure(random_points(10, 2, 1.0, rng)));
  const double eps = 1e-6;
  double worst = 0.0;
  for (int q = 0; q < 100; ++q) {
    const Vector z = random_points(1, 2, 1.0, rng).row(0).transpose();
    const Vector analytic = energy.witness_gradient(mu, z);
    Vector fd(2);
    for (int k = 0; k < 2; ++k) {
      Vector zp = z, zm = z;
      zp(k) += eps;
      zm(k) -= eps;
      fd(k) = (energy.witness(mu, zp) - energy.witness(mu, zm)) / (2.0 * eps);
    }
    worst = std::max(worst, (analytic - fd).norm() / std::max(analytic.norm(), 1e-8));
  }
  return {"witness gradient vs finite differences", worst <= 1e-4, describe("max_rel_err", worst, "<=", 1e-4)};
}

}  // namespace

std::vector<OracleCheck> run_oracle_suite(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<OracleCheck> out;
  out.push_back(interpolation_law(rng));
  out.push_back(euler_consistency(rng));
  out.push_back(qp_vs_grid(rng));
  out.push_back(gradient_vs_fd(rng));
  return out;
}

}  // namespace iftflow
