#pragma once

#include <trcm/masked_matrix.hpp>
#include <trcm/model.hpp>

namespace trcm {

/// E(X_m | X_o) through the dense np x np covariance. Observed cells pass
/// through. Refuses instances with n*p above `cap`.
Matrix kron_conditional_expectation(const MaskedMatrix& x, const TrcmModel& model,
                                    Index cap = kDefaultVecCap);

/// Omega_mm - Omega_mo Omega_oo^-1 Omega_om, rows/cols in missing_cells() order.
Matrix kron_conditional_covariance(const MaskedMatrix& x, const TrcmModel& model,
                                   Index cap = kDefaultVecCap);

/// Distribution of the missing cells of one row (or column) given the rest
/// of the matrix.
///
/// Step one conditions the whole slice on every other slice, giving
/// N(psi, gamma) with gamma = scale * Delta for a row (scale * Sigma for a
/// column); step two conditions that on the slice's own observed cells.
struct SliceConditional {
  Index index = 0;
  IndexList missing;
  IndexList observed;
  Vector psi;
  double scale = 0.0;
  Matrix gamma;
  Vector mean;  ///< over `missing`
  Matrix cov;   ///< over `missing`
};

/// `current` supplies values for every cell outside the conditioned slice
/// (inside ACE it is the running completion); only the slice's observed
/// cells are taken from `pattern`'s mask.
SliceConditional row_conditional(const Matrix& current, const MaskedMatrix& pattern,
                                 const TrcmModel& model, Index i);
SliceConditional col_conditional(const Matrix& current, const MaskedMatrix& pattern,
                                 const TrcmModel& model, Index j);

struct AceOptions {
  double tol = 1e-8;
  int max_sweeps = 1000;
};

struct AceResult {
  Matrix completed;
  int sweeps = 0;
  double residual = 0.0;
  bool converged = true;
};

/// Alternating conditional expectations: start missing cells at nu_i + mu_j,
/// then sweep rows in ascending order and columns in ascending order,
/// replacing each slice's missing cells by their conditional mean in place,
/// until a full sweep changes no cell by tol or more. The fixed point is
/// E(X_m | X_o).
AceResult ace_expectation(const MaskedMatrix& x, const TrcmModel& model,
                          const AceOptions& opts = {});

struct EStepOptions {
  enum class Mean { ace, joint, kronecker };
  enum class Covariance { structured, kronecker };
  /// ace: alternating sweeps; joint: one solve with the missing-block
  /// precision; kronecker: the dense oracle.
  Mean mean = Mean::ace;
  /// structured: inverse of the missing-block precision assembled from
  /// Sigma^-1 and Delta^-1; kronecker: dense Schur complement of Omega.
  Covariance covariance = Covariance::structured;
  /// Largest missing count for which cross-slice covariances are formed.
  Index cross_cap = 2000;
  Index kron_cap = kDefaultVecCap;
  AceOptions ace;
};

struct EStepResult {
  Matrix x_hat;
  Matrix g_mat;  ///< p x p, G(Sigma^-1)
  Matrix f_mat;  ///< n x n, F(Delta^-1)
  std::vector<Cell> cells;
  Matrix cond_cov;  ///< conditional covariance of `cells`
  int ace_sweeps = 0;
};

/// Conditional mean completion plus the two covariance corrections, with
/// G(j,j') = tr(C^(jj') Sigma^-1) and F(i,i') = tr(D^(ii') Delta^-1).
EStepResult e_step(const MaskedMatrix& x, const TrcmModel& model, const EStepOptions& opts = {});

}  // namespace trcm
