#include <trcm/model.hpp>

#include <trcm/error.hpp>
#include <trcm/kernels.hpp>
#include <trcm/linalg.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace trcm {

namespace {

double trace_form(const Matrix& sigma_inv, const Matrix& r, const Matrix& delta_inv) {
  // tr(S^-1 R D^-1 R^T)
  return (sigma_inv * r).cwiseProduct(r * delta_inv).sum();
}

void check_shape(const Matrix& x, const TrcmModel& model) {
  if (x.rows() != model.rows() || x.cols() != model.cols()) {
    throw InputError("data is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                     " but model is " + std::to_string(model.rows()) + "x" +
                     std::to_string(model.cols()));
  }
}

}  // namespace

MeanParams::MeanParams(Vector row_means, Vector col_means)
    : nu(std::move(row_means)), mu(std::move(col_means)) {
  if (!nu.allFinite() || !mu.allFinite()) throw InputError("means: non-finite entries");
}

MeanParams MeanParams::zero(Index n, Index p) { return {Vector::Zero(n), Vector::Zero(p)}; }

Matrix MeanParams::matrix() const {
  Matrix m = nu.replicate(1, mu.size());
  m.rowwise() += mu.transpose();
  return m;
}

MeanParams MeanParams::canonical() const {
  const double shift = nu.size() ? nu.mean() : 0.0;
  return {(nu.array() - shift).matrix(), (mu.array() + shift).matrix()};
}

CovParams::CovParams(const Matrix& sigma, const Matrix& delta)
    : sigma_(linalg::symmetrize(sigma)), delta_(linalg::symmetrize(delta)) {
  linalg::require_positive_definite(sigma_, kPdFloor, "row covariance");
  linalg::require_positive_definite(delta_, kPdFloor, "column covariance");
  sigma_inv_ = linalg::inverse_spd(sigma_, 0.0);
  delta_inv_ = linalg::inverse_spd(delta_, 0.0);
  finish();
}

CovParams CovParams::from_precisions(const Matrix& sigma_inv, const Matrix& delta_inv) {
  CovParams c;
  c.sigma_inv_ = linalg::symmetrize(sigma_inv);
  c.delta_inv_ = linalg::symmetrize(delta_inv);
  linalg::require_positive_definite(c.sigma_inv_, kPdFloor, "row concentration");
  linalg::require_positive_definite(c.delta_inv_, kPdFloor, "column concentration");
  c.sigma_ = linalg::inverse_spd(c.sigma_inv_, 0.0);
  c.delta_ = linalg::inverse_spd(c.delta_inv_, 0.0);
  c.finish();
  return c;
}

CovParams CovParams::from_pairs(const Matrix& sigma, const Matrix& sigma_inv, const Matrix& delta,
                                const Matrix& delta_inv) {
  CovParams c;
  c.sigma_ = linalg::symmetrize(sigma);
  c.sigma_inv_ = linalg::symmetrize(sigma_inv);
  c.delta_ = linalg::symmetrize(delta);
  c.delta_inv_ = linalg::symmetrize(delta_inv);
  linalg::require_positive_definite(c.sigma_, kPdFloor, "row covariance");
  linalg::require_positive_definite(c.delta_, kPdFloor, "column covariance");
  c.finish();
  return c;
}

CovParams CovParams::identity(Index n, Index p) {
  return from_pairs(Matrix::Identity(n, n), Matrix::Identity(n, n), Matrix::Identity(p, p),
                    Matrix::Identity(p, p));
}

CovParams CovParams::rescaled(double c) const {
  if (!(c > 0.0)) throw InputError("rescale factor must be positive");
  return from_pairs(c * sigma_, sigma_inv_ / c, delta_ / c, c * delta_inv_);
}

void CovParams::finish() {
  logdet_sigma_ = linalg::logdet_spd(sigma_);
  logdet_delta_ = linalg::logdet_spd(delta_);
}

TrcmModel::TrcmModel(MeanParams m, CovParams c) : means(std::move(m)), covs(std::move(c)) {
  if (means.rows() != covs.rows() || means.cols() != covs.cols()) {
    throw InputError("model: mean and covariance dimensions disagree");
  }
}

void PenaltySpec::validate() const {
  if ((q_row != 1 && q_row != 2) || (q_col != 1 && q_col != 2)) {
    throw InputError("penalty exponents must be 1 or 2");
  }
  if (!(std::isfinite(rho_row) && rho_row >= 0.0) || !(std::isfinite(rho_col) && rho_col >= 0.0)) {
    throw InputError("penalty weights must be finite and nonnegative");
  }
}

double penalty_term(const Matrix& precision, int q, double rho) {
  if (rho == 0.0) return 0.0;
  const double norm = q == 1 ? precision.cwiseAbs().sum() : precision.squaredNorm();
  return rho * norm;
}

double log_density(const Matrix& x, const TrcmModel& model) {
  check_shape(x, model);
  if (!x.allFinite()) throw InputError("log density: non-finite data");
  const double n = static_cast<double>(model.rows());
  const double p = static_cast<double>(model.cols());
  const Matrix r = x - model.mean_matrix();
  const auto& c = model.covs;
  return -0.5 * n * p * std::log(2.0 * std::numbers::pi) - 0.5 * p * c.logdet_sigma() -
         0.5 * n * c.logdet_delta() - 0.5 * trace_form(c.sigma_inv(), r, c.delta_inv());
}

double penalized_loglik(const Matrix& x, const TrcmModel& model, const PenaltySpec& pen) {
  check_shape(x, model);
  if (!x.allFinite()) throw InputError("penalized log-likelihood: non-finite data");
  pen.validate();
  const double n = static_cast<double>(model.rows());
  const double p = static_cast<double>(model.cols());
  const Matrix r = x - model.mean_matrix();
  const auto& c = model.covs;
  return -0.5 * p * c.logdet_sigma() - 0.5 * n * c.logdet_delta() -
         0.5 * trace_form(c.sigma_inv(), r, c.delta_inv()) -
         penalty_term(c.sigma_inv(), pen.q_row, pen.rho_row) -
         penalty_term(c.delta_inv(), pen.q_col, pen.rho_col);
}

double observed_loglik(const MaskedMatrix& x, const TrcmModel& model, const PenaltySpec& pen,
                       Index missing_cap) {
  check_shape(x.values(), model);
  pen.validate();
  const double n = static_cast<double>(model.rows());
  const double p = static_cast<double>(model.cols());
  const auto& c = model.covs;
  const Matrix mean = model.mean_matrix();
  // log|Omega_oo| = log|Omega| + log|Q_mm| and
  // r_o^T Omega_oo^-1 r_o = r~^T Omega^-1 r~ with r~ completed by E(X_m | X_o).
  double logdet_oo = p * c.logdet_sigma() + n * c.logdet_delta();
  Matrix r;
  if (x.complete()) {
    r = x.values() - mean;
  } else {
    const MissingPrecision qmm(x, c, missing_cap);
    logdet_oo += qmm.logdet();
    r = qmm.completed_residual(x, mean);
  }
  return -0.5 * logdet_oo - 0.5 * trace_form(c.sigma_inv(), r, c.delta_inv()) -
         penalty_term(c.sigma_inv(), pen.q_row, pen.rho_row) -
         penalty_term(c.delta_inv(), pen.q_col, pen.rho_col);
}

VecForm vec_form(const TrcmModel& model, Index cap) {
  const Index n = model.rows();
  const Index p = model.cols();
  if (n * p > cap) {
    throw CapExceeded("vec form: n*p = " + std::to_string(n * p) + " exceeds cap " +
                      std::to_string(cap) + "; use the row/column conditional machinery");
  }
  const Matrix m = model.mean_matrix();
  VecForm out;
  out.mean = Eigen::Map<const Vector>(m.data(), n * p);
  out.cov = kernels::kronecker(model.covs.delta(), model.covs.sigma());
  return out;
}

Matrix sample(const TrcmModel& model, std::uint64_t seed) {
  const Index n = model.rows();
  const Index p = model.cols();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(n, p);
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < n; ++i) z(i, j) = normal(rng);
  }
  const Eigen::LLT<Matrix> ls(model.covs.sigma());
  const Eigen::LLT<Matrix> ld(model.covs.delta());
  const Matrix ll = ls.matrixL();
  const Matrix lr = ld.matrixL();
  return model.mean_matrix() + ll * z * lr.transpose();
}

GaussianBlock marginal_row(const TrcmModel& model, Index i) {
  if (i < 0 || i >= model.rows()) throw InputError("marginal_row: index out of range");
  return {(model.means.mu.array() + model.means.nu(i)).matrix(),
          model.covs.sigma()(i, i) * model.covs.delta()};
}

GaussianBlock marginal_col(const TrcmModel& model, Index j) {
  if (j < 0 || j >= model.cols()) throw InputError("marginal_col: index out of range");
  return {(model.means.nu.array() + model.means.mu(j)).matrix(),
          model.covs.delta()(j, j) * model.covs.sigma()};
}

MissingPrecision::MissingPrecision(const MaskedMatrix& x, const CovParams& covs,
                                   Index missing_cap)
    : cells_(x.missing_cells()), sigma_inv_(covs.sigma_inv()), delta_inv_(covs.delta_inv()) {
  if (x.rows() != covs.rows() || x.cols() != covs.cols()) {
    throw InputError("missing precision: shape mismatch");
  }
  if (size() > missing_cap) {
    throw CapExceeded("missing-block precision: " + std::to_string(size()) +
                      " missing cells exceed cap " + std::to_string(missing_cap));
  }
  if (!cells_.empty()) {
    llt_.compute(kernels::missing_precision(cells_, covs.sigma_inv(), covs.delta_inv()));
    if (llt_.info() != Eigen::Success) {
      throw NumericalError("missing-block precision is not positive definite");
    }
  }
}

double MissingPrecision::logdet() const {
  if (cells_.empty()) return 0.0;
  return 2.0 * llt_.matrixLLT().diagonal().array().log().sum();
}

Matrix MissingPrecision::conditional_covariance() const {
  const Index m = size();
  if (m == 0) return Matrix(0, 0);
  return linalg::symmetrize(llt_.solve(Matrix::Identity(m, m)));
}

Matrix MissingPrecision::completed_residual(const MaskedMatrix& x, const Matrix& mean) const {
  Matrix r = x.values() - mean;
  for (const Cell& c : cells_) r(c.row, c.col) = 0.0;
  if (cells_.empty()) return r;
  // (Q r_o) restricted to missing cells is (Sinv R0 Dinv) at those cells.
  const Matrix qr = sigma_inv_ * r * delta_inv_;
  Vector rhs(size());
  for (Index a = 0; a < size(); ++a) rhs(a) = qr(cells_[a].row, cells_[a].col);
  const Vector offset = -llt_.solve(rhs);
  for (Index a = 0; a < size(); ++a) r(cells_[a].row, cells_[a].col) = offset(a);
  return r;
}

}  // namespace trcm
