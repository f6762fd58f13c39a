#pragma once

#include "iftflow/kernels.hpp"

namespace iftflow {

/// min over the probability simplex of 1/2 b^T Q b + c^T b.
struct SimplexQp {
  Matrix q;
  Vector c;

  Eigen::Index size() const noexcept { return c.size(); }
  double objective(const Vector& beta) const;
  Vector gradient(const Vector& beta) const { return q * beta + c; }

  /// Shape, symmetry (1e-12) and PSD (min eigenvalue >= -1e-8) checks.
  void validate() const;
};

/// Weight update of one JKO iteration,
///
///   min_b  lambda * MMD^2(sum_i b_i delta_{x_i}, pi) + MMD^2(sum_i b_i delta_{x_i}, sum_i a_i delta_{xbar_i}),
///
/// expanded to Q = 2(1 + lambda) K_XX and c = -(2 lambda/m) K_XY 1 - 2 K_XXbar a.
/// Additive constants are dropped. `jitter` is added to the diagonal of K_XX.
SimplexQp assemble_mmd_step_qp(const GramBundle& gram, const Vector& alpha_prev, double lambda,
                               Eigen::Index m, double jitter = 0.0);

/// Largest eigenvalue of a symmetric PSD matrix by power iteration. With `tangent`
/// set, of Q restricted to the sum-zero subspace, i.e. P Q P with P = I - 11^T/n.
double power_iteration(const Matrix& q, int max_iter = 500, double rel_tol = 1e-10, bool tangent = false);

/// Lipschitz constant of the QP gradient along the simplex: the top eigenvalue of
/// Q on the sum-zero subspace. Shifting the gradient by a constant leaves the
/// simplex projection unchanged, so the mode of Q along 1 never limits the step.
double simplex_lipschitz(const Matrix& q);

/// |b - P(b - s grad(b))|, the projected-gradient fixed-point residual.
double projected_gradient_residual(const SimplexQp& qp, const Vector& beta, double step);

struct QpSolveOptions {
  double tol = 1e-10;
  int max_iter = 10000;
};

/// Accelerated projected gradient (FISTA) with step 1/L, L = simplex_lipschitz(Q),
/// and function-value restart.
/// Throws ConvergenceError carrying the last iterate when max_iter is exhausted.
Vector solve_qp_exact(const SimplexQp& qp, const Vector& beta0, const QpSolveOptions& options = {});

/// P(b - step * (Q b + c)).
Vector qp_pgd_step(const SimplexQp& qp, const Vector& beta, double step);

/// Grid minimizer over {b in simplex : b_i multiple of resolution}. The first
/// grid point (lexicographic order) attaining the minimum wins. Test oracle; n <= 4.
Vector brute_force_simplex(const SimplexQp& qp, double resolution);

}  // namespace iftflow
