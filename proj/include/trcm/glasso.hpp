#pragma once

#include <trcm/types.hpp>

namespace trcm {

struct GlassoResult {
  Matrix w;      ///< covariance estimate
  Matrix w_inv;  ///< concentration estimate (exact zeros where the lasso selected none)
  int sweeps = 0;
  double gap = 0.0;
};

/// Graphical lasso: maximize log|T| - tr(S T) - rho * sum_kl |T_kl|, with the
/// diagonal penalized as well. Block coordinate descent over columns of W
/// (each column a lasso problem), stopped when the duality gap is <= tol.
/// `warm` (a previous concentration) seeds the lasso coefficients.
GlassoResult glasso(const Matrix& s, double rho, double tol = 1e-6, int max_sweeps = 1000,
                    const Matrix* warm = nullptr);

/// Primal objective log|T| - tr(S T) - rho * ||T||_1 (all entries).
double glasso_objective(const Matrix& s, const Matrix& theta, double rho);

}  // namespace trcm
