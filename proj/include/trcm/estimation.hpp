#pragma once

#include <trcm/masked_matrix.hpp>
#include <trcm/model.hpp>

#include <array>
#include <optional>
#include <utility>
#include <vector>

namespace trcm {

struct SolverOptions {
  int max_outer_iters = 500;
  double rel_tol = 1e-8;
  double glasso_tol = 1e-6;
  int glasso_max_sweeps = 1000;
  /// Added to a diagonal only when inverting it fails.
  double jitter = 1e-10;

  enum class Order { delta_first, sigma_first };
  Order order = Order::delta_first;
  /// Starting point for the coordinate-wise solver; identity when empty.
  std::optional<CovParams> init;

  void validate() const;
};

/// A covariance estimate together with its inverse.
struct SpdPair {
  Matrix cov;
  Matrix inv;
};

struct MeanFit {
  MeanParams params;
  int iterations = 0;
  double residual = 0.0;
  bool converged = true;
};

/// Additive row/column means. One centering pass when complete; otherwise
/// alternate row and column centering over observed cells until the fitted
/// mean matrix moves by less than opts.rel_tol. Always canonical.
MeanFit estimate_means(const MaskedMatrix& x, const SolverOptions& opts = {});

/// Means maximizing the likelihood of a complete matrix for fixed (Sigma, Delta):
/// nu = X b, mu = X^T a - (a^T X b) 1 with a, b the normalized row sums of
/// the two concentration matrices. Reduces to centering for identities.
MeanParams weighted_means(const Matrix& x, const CovParams& covs);

/// Ridge eigenvalue regularization of a scatter S = V diag(s) V^T:
/// theta = (s + sqrt(s^2 + 4c)) / 2. With S = X^T X / n and c = 4 rho / n this
/// is the L2-penalized covariance.
SpdPair regularize_spectrum(const Matrix& scatter, double c);

/// One concentration update: maximize (count/2)(log|T| - tr(S T)) - rho ||T||^q.
/// q = 2 uses regularize_spectrum with c = 4 rho / count; q = 1 runs glasso
/// with weight 2 rho / count. `warm` seeds glasso's lasso coefficients.
SpdPair concentration_step(const Matrix& scatter, double count, int q, double rho,
                           const SolverOptions& opts, const Matrix* warm = nullptr);

/// (count/2)(log|T| - tr(S T)) - rho ||T||^q at concentration T.
double concentration_objective(const Matrix& scatter, double count, int q, double rho,
                               const Matrix& concentration);

/// concentration_step that falls back to `previous` whenever the update
/// scores lower on concentration_objective (glasso stops at a duality-gap
/// tolerance, so late updates can be marginally worse than the incumbent).
SpdPair concentration_step_monotone(const Matrix& scatter, double count, int q, double rho,
                                    const SolverOptions& opts, const SpdPair& previous);

/// L2-penalized covariance of centered rows, from the SVD of x. Directions
/// outside the row space get exactly 2 sqrt(rho / n).
Matrix rcm_l2_cov(const Matrix& x_centered, double rho);
SpdPair rcm_l2_pair(const Matrix& x_centered, double rho);

/// L1-penalized covariance: glasso on X^T X / n with weight 2 rho / n.
Matrix rcm_l1_cov(const Matrix& x_centered, double rho, const SolverOptions& opts = {});

/// Diagnostics of the closed-form L2:L2 solution.
struct SpectralSolution {
  Vector d;       ///< singular values, length min(n, p)
  Index rank = 0;
  Vector beta;    ///< eigenvalues of Sigma*, length n
  Vector theta;   ///< eigenvalues of Delta*, length p
  std::vector<std::array<double, 3>> coeffs;  ///< (c1, c2, c3) for i < rank
  Matrix u_basis;  ///< n x n
  Matrix v_basis;  ///< p x p
};

struct L2L2Fit {
  CovParams covs;
  SpectralSolution spectrum;
};

/// Global maximizer of the L2:L2 penalized likelihood for a centered matrix.
L2L2Fit trcm_l2l2(const Matrix& x_centered, double rho_row, double rho_col);

struct CoordwiseFit {
  CovParams covs;
  /// Objective at the start and after every half-step.
  std::vector<double> trace;
  int cycles = 0;
  bool converged = false;
};

/// Block coordinate-wise maximization over Delta^-1 and Sigma^-1.
CoordwiseFit trcm_coordwise(const Matrix& x_centered, const PenaltySpec& pen,
                            const SolverOptions& opts = {});

/// Penalized objective of a centered matrix (zero means).
double centered_objective(const Matrix& x_centered, const CovParams& covs, const PenaltySpec& pen);

/// Max-abs entries of the two gradient conditions (row, column). For an L1
/// penalty, entries where the concentration is zero only count the excess of
/// the smooth part over the penalty weight.
std::pair<double, double> stationarity_residual(const CovParams& covs, const Matrix& x_centered,
                                                const PenaltySpec& pen);

/// TRCM fit on a complete matrix: means by centering, covariances by the
/// closed form for L2:L2 and the coordinate-wise solver otherwise.
TrcmModel fit_trcm(const Matrix& x, const PenaltySpec& pen, const SolverOptions& opts = {});

}  // namespace trcm
