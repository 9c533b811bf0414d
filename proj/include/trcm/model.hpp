#pragma once

#include <trcm/masked_matrix.hpp>
#include <trcm/types.hpp>

#include <cstdint>

namespace trcm {

/// Row and column means of the additive mean M = nu 1^T + 1 mu^T.
///
/// (nu, mu) are identified only up to a shared shift; canonical() moves it
/// into mu so that mean(nu) = 0.
struct MeanParams {
  Vector nu;
  Vector mu;

  MeanParams() = default;
  MeanParams(Vector row_means, Vector col_means);

  static MeanParams zero(Index n, Index p);

  Index rows() const noexcept { return nu.size(); }
  Index cols() const noexcept { return mu.size(); }
  Matrix matrix() const;
  MeanParams canonical() const;
};

/// Row covariance Sigma (n x n) and column covariance Delta (p x p) with
/// their inverses. Both are symmetrized and checked positive definite on
/// construction; the inverses are computed once and never go stale.
class CovParams {
 public:
  static constexpr double kPdFloor = 1e-12;

  CovParams(const Matrix& sigma, const Matrix& delta);

  /// Build from concentration matrices; covariances are their inverses.
  static CovParams from_precisions(const Matrix& sigma_inv, const Matrix& delta_inv);
  /// Build when both a matrix and its inverse are already known (spectral
  /// solvers). The pairs are symmetrized but not re-inverted.
  static CovParams from_pairs(const Matrix& sigma, const Matrix& sigma_inv, const Matrix& delta,
                              const Matrix& delta_inv);
  static CovParams identity(Index n, Index p);

  Index rows() const noexcept { return sigma_.rows(); }
  Index cols() const noexcept { return delta_.rows(); }

  const Matrix& sigma() const noexcept { return sigma_; }
  const Matrix& delta() const noexcept { return delta_; }
  const Matrix& sigma_inv() const noexcept { return sigma_inv_; }
  const Matrix& delta_inv() const noexcept { return delta_inv_; }
  double logdet_sigma() const noexcept { return logdet_sigma_; }
  double logdet_delta() const noexcept { return logdet_delta_; }

  /// (c Sigma, Delta / c): the same Kronecker product.
  CovParams rescaled(double c) const;

 private:
  CovParams() = default;
  void finish();

  Matrix sigma_, delta_, sigma_inv_, delta_inv_;
  double logdet_sigma_ = 0.0;
  double logdet_delta_ = 0.0;
};

/// Mean-restricted matrix-variate normal: vec(X) ~ N(vec(M), Delta (x) Sigma).
struct TrcmModel {
  MeanParams means;
  CovParams covs;

  TrcmModel(MeanParams m, CovParams c);

  Index rows() const noexcept { return covs.rows(); }
  Index cols() const noexcept { return covs.cols(); }
  Matrix mean_matrix() const { return means.matrix(); }
};

/// Penalty exponents (1 = lasso, 2 = ridge) and weights on the row and
/// column concentration matrices.
struct PenaltySpec {
  int q_row = 2;
  int q_col = 2;
  double rho_row = 1.0;
  double rho_col = 1.0;

  void validate() const;
  bool l2l2() const noexcept { return q_row == 2 && q_col == 2; }
};

/// rho * sum over all entries (diagonal included) of |a_kl|^q.
double penalty_term(const Matrix& precision, int q, double rho);

double log_density(const Matrix& x, const TrcmModel& model);

/// Penalized log-likelihood of a fully observed matrix, without the
/// -(np/2) log(2 pi) constant:
///   (p/2) log|S^-1| + (n/2) log|D^-1| - tr(S^-1 R D^-1 R^T)/2 - penalties.
double penalized_loglik(const Matrix& x, const TrcmModel& model, const PenaltySpec& pen);

/// Observed-data penalized log-likelihood: the Gaussian log density of the
/// observed sub-vector of vec(X) under (vec(M), Delta (x) Sigma), plus the
/// two penalties, in the same constant convention as penalized_loglik (so a
/// complete matrix gives exactly penalized_loglik). Computed through the
/// missing-block precision; throws CapExceeded above `missing_cap` missing
/// cells.
double observed_loglik(const MaskedMatrix& x, const TrcmModel& model, const PenaltySpec& pen,
                       Index missing_cap = 6000);

/// Dense multivariate view. Column-major vec: column j stacked above j+1.
struct VecForm {
  Vector mean;
  Matrix cov;
};
constexpr Index kDefaultVecCap = 4096;
VecForm vec_form(const TrcmModel& model, Index cap = kDefaultVecCap);

/// One draw M + L_S Z L_D^T with Z iid standard normal and L the Cholesky
/// factors. Deterministic in `seed`.
Matrix sample(const TrcmModel& model, std::uint64_t seed);

struct GaussianBlock {
  Vector mean;
  Matrix cov;
};
GaussianBlock marginal_row(const TrcmModel& model, Index i);
GaussianBlock marginal_col(const TrcmModel& model, Index j);

/// Precision of the missing cells given the observed ones:
/// Q_mm[(i,j),(i',j')] = Dinv(j,j') * Sinv(i,i'), factorized once.
/// Its inverse is the conditional covariance of the missing cells and
/// -Q_mm^{-1} Q_mo r_o is their conditional mean offset.
class MissingPrecision {
 public:
  MissingPrecision(const MaskedMatrix& x, const CovParams& covs, Index missing_cap);

  Index size() const noexcept { return static_cast<Index>(cells_.size()); }
  const std::vector<Cell>& cells() const noexcept { return cells_; }

  /// log|Q_mm|.
  double logdet() const;
  /// Conditional covariance of the missing cells, in cells() order.
  Matrix conditional_covariance() const;
  /// Residual matrix with missing cells set to E(X_m | X_o) - M_m.
  Matrix completed_residual(const MaskedMatrix& x, const Matrix& mean) const;

 private:
  std::vector<Cell> cells_;
  Matrix sigma_inv_, delta_inv_;
  Eigen::LLT<Matrix> llt_;
};

}  // namespace trcm
