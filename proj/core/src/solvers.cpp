#include "iftflow/solvers.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/QR>
#include <string>

#include "iftflow/measures.hpp"

namespace iftflow {

namespace {

// Minimizer of the QP on the affine set {b : b_i = 0 off `support`, sum b = 1}
// via the KKT system (minimum-norm solution, so a singular Q is tolerated).
Vector support_minimizer(const SimplexQp& qp, const std::vector<Eigen::Index>& support) {
  const auto k = static_cast<Eigen::Index>(support.size());
  Matrix kkt = Matrix::Zero(k + 1, k + 1);
  Vector rhs(k + 1);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) kkt(a, b) = qp.q(support[a], support[b]);
    kkt(a, k) = 1.0;
    kkt(k, a) = 1.0;
    rhs(a) = -qp.c(support[a]);
  }
  rhs(k) = 1.0;
  const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  Vector out = Vector::Zero(qp.size());
  for (Eigen::Index a = 0; a < k; ++a) out(support[a]) = sol(a);
  return out;
}

// Primal active-set descent started from a feasible point: move toward the
// support minimizer, dropping the first coordinate that would turn negative,
// until the minimizer is feasible. Never increases the objective.
std::optional<Vector> polish_on_support(const SimplexQp& qp, const Vector& beta) {
  Vector x = beta;
  double fx = qp.objective(x);
  for (Eigen::Index round = 0; round <= qp.size(); ++round) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      if (x(i) > 0.0) support.push_back(i);
    }
    if (support.empty()) return std::nullopt;
    const Vector target = support_minimizer(qp, support);
    double t = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i : support) {
      if (target(i) < 0.0) {
        const double ti = x(i) / (x(i) - target(i));
        if (ti < t) {
          t = ti;
          blocking = i;
        }
      }
    }
    Vector next = x + t * (target - x);
    if (blocking >= 0) next(blocking) = 0.0;
    next = next.cwiseMax(0.0);
    const double total = next.sum();
    if (!(total > 0.0) || !next.allFinite()) return std::nullopt;
    next /= total;
    const double fnext = qp.objective(next);
    if (fnext > fx + 1e-15 * (1.0 + std::abs(fx))) return std::nullopt;
    x = std::move(next);
    fx = fnext;
    if (blocking < 0) return x;
  }
  return std::nullopt;
}

std::string format_scientific(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

double SimplexQp::objective(const Vector& beta) const {
  return 0.5 * beta.dot(q * beta) + c.dot(beta);
}

void SimplexQp::validate() const {
  if (q.rows() != q.cols() || q.rows() != c.size() || c.size() == 0) {
    throw InvalidInputError("SimplexQp: inconsistent shapes");
  }
  if (!q.allFinite() || !c.allFinite()) {
    throw InvalidInputError("SimplexQp: non-finite data");
  }
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidInputError("SimplexQp: Q is not symmetric");
  }
  if (min_eigenvalue(q) < -1e-8) {
    throw InvalidInputError("SimplexQp: Q is not positive semidefinite");
  }
}

SimplexQp assemble_mmd_step_qp(const GramBundle& gram, const Vector& alpha_prev, double lambda,
                               Eigen::Index m, double jitter) {
  const Eigen::Index n = gram.kxx.rows();
  if (gram.kxx.cols() != n || gram.kx_old.rows() != n || gram.kx_old.cols() != alpha_prev.size() ||
      gram.kxy.rows() != n || gram.kxy.cols() != m || m < 1) {
    throw InvalidInputError("assemble_mmd_step_qp: dimension mismatch");
  }
  if (!(lambda >= 0.0) || !(jitter >= 0.0)) {
    throw InvalidInputError("assemble_mmd_step_qp: lambda and jitter must be nonnegative");
  }
  SimplexQp qp;
  qp.q = (2.0 * (1.0 + lambda)) * gram.kxx;
  if (jitter > 0.0) qp.q.diagonal().array() += 2.0 * (1.0 + lambda) * jitter;
  qp.c = -(2.0 * lambda / static_cast<double>(m)) * (gram.kxy * Vector::Ones(m)) - 2.0 * (gram.kx_old * alpha_prev);
  return qp;
}

double power_iteration(const Matrix& q, int max_iter, double rel_tol, bool tangent) {
  const Eigen::Index n = q.rows();
  if (n == 0 || (tangent && n == 1)) return 0.0;
  auto restrict = [tangent](Vector v) {
    if (tangent) v.array() -= v.mean();
    return v;
  };
  // Deterministic start with a component along every coordinate.
  Vector v = restrict(Vector::LinSpaced(n, 1.0, 2.0)).normalized();
  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    const Vector w = restrict(q * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = v.dot(w);
    v = w / norm;
    if (std::abs(next - estimate) <= rel_tol * std::abs(next)) {
      estimate = next;
      break;
    }
    estimate = next;
  }
  return estimate;
}

double simplex_lipschitz(const Matrix& q) {
  return power_iteration(q, 500, 1e-10, /*tangent=*/true);
}

double projected_gradient_residual(const SimplexQp& qp, const Vector& beta, double step) {
  return (beta - simplex_project(beta - step * qp.gradient(beta))).norm();
}

Vector qp_pgd_step(const SimplexQp& qp, const Vector& beta, double step) {
  if (beta.size() != qp.size()) {
    throw InvalidInputError("qp_pgd_step: dimension mismatch");
  }
  return simplex_project(beta - step * qp.gradient(beta));
}

Vector solve_qp_exact(const SimplexQp& qp, const Vector& beta0, const QpSolveOptions& options) {
  if (beta0.size() != qp.size()) {
    throw InvalidInputError("solve_qp_exact: dimension mismatch");
  }
  if (qp.size() == 1) return Vector::Ones(1);

  // Iterates stay in the affine hull of the simplex, so only the curvature of Q
  // on {v : sum v = 0} matters. Power iteration approaches it from below; the
  // margin keeps 1/L a valid step.
  const double lipschitz = 1.05 * simplex_lipschitz(qp.q);
  const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  constexpr int kPolishEvery = 50;
  Vector beta = simplex_project(beta0);
  Vector y = beta;
  double momentum = 1.0;
  double f_beta = qp.objective(beta);
  double residual = projected_gradient_residual(qp, beta, step);

  for (int it = 0; it < options.max_iter; ++it) {
    if (residual <= options.tol) return beta;
    Vector next = simplex_project(y - step * qp.gradient(y));
    const double f_next = qp.objective(next);
    if (f_next > f_beta) {
      // Restart: drop momentum and take a plain projected step from beta.
      momentum = 1.0;
      next = simplex_project(beta - step * qp.gradient(beta));
      y = next;
      beta = std::move(next);
      f_beta = qp.objective(beta);
    } else {
      const double momentum_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
      y = next + ((momentum - 1.0) / momentum_next) * (next - beta);
      beta = std::move(next);
      f_beta = f_next;
      momentum = momentum_next;
    }
    residual = projected_gradient_residual(qp, beta, step);
    if (residual > options.tol && (it + 1) % kPolishEvery == 0) {
      if (auto polished = polish_on_support(qp, beta)) {
        const double f_polished = qp.objective(*polished);
        if (f_polished <= f_beta) {
          beta = std::move(*polished);
          y = beta;
          momentum = 1.0;
          f_beta = f_polished;
          residual = projected_gradient_residual(qp, beta, step);
        }
      }
    }
  }
  if (residual <= options.tol) return beta;
  throw ConvergenceError("solve_qp_exact: no convergence after " + std::to_string(options.max_iter) +
                             " iterations (residual " + format_scientific(residual) + ")",
                         beta, residual);
}

namespace {

// Enumerates compositions of `units` into the remaining coordinates, in
// lexicographic order of (b_0, b_1, ...).
void enumerate_grid(const SimplexQp& qp, double resolution, int units, Eigen::Index index, Vector& point,
                    Vector& best, double& best_value) {
  const Eigen::Index n = qp.size();
  if (index == n - 1) {
    point(index) = units * resolution;
    const double value = qp.objective(point);
    if (value < best_value) {
      best_value = value;
      best = point;
    }
    return;
  }
  for (int u = 0; u <= units; ++u) {
    point(index) = u * resolution;
    enumerate_grid(qp, resolution, units - u, index + 1, point, best, best_value);
  }
}

}  // namespace

Vector brute_force_simplex(const SimplexQp& qp, double resolution) {
  const Eigen::Index n = qp.size();
  if (n < 1 || n > 4) {
    throw InvalidInputError("brute_force_simplex: n = " + std::to_string(n) + " outside [1, 4]");
  }
  if (!(resolution > 0.0) || resolution > 1.0) {
    throw InvalidInputError("brute_force_simplex: resolution must lie in (0, 1]");
  }
  const int units = static_cast<int>(std::lround(1.0 / resolution));
  const double step = 1.0 / units;
  Vector point = Vector::Zero(n);
  Vector best = Vector::Zero(n);
  double best_value = std::numeric_limits<double>::infinity();
  enumerate_grid(qp, step, units, 0, point, best, best_value);
  return best;
}

}  // namespace iftflow
