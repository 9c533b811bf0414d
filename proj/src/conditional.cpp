#include <trcm/conditional.hpp>

#include <trcm/error.hpp>
#include <trcm/kernels.hpp>
#include <trcm/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

namespace trcm {

namespace {

// Positions of missing and observed entries inside vec(X).
void vec_partition(const MaskedMatrix& x, IndexList& miss, IndexList& obs) {
  const Index n = x.rows();
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < n; ++i) (x.observed(i, j) ? obs : miss).push_back(j * n + i);
  }
}

void check_model(const MaskedMatrix& x, const TrcmModel& model) {
  if (x.rows() != model.rows() || x.cols() != model.cols()) {
    throw InputError("conditional: data and model shapes differ");
  }
}

// Second step shared by rows and columns: condition N(offset, scale * C) on
// the observed coordinates, where prec = C^-1. Returns mean and covariance of
// the missing coordinates.
void condition_on_observed(const Vector& psi, const Vector& values, const Matrix& prec, double scale,
                           const IndexList& miss, const IndexList& obs, Vector& mean, Matrix& cov) {
  const Matrix pmm = linalg::submatrix(prec, miss, miss);
  const Matrix pmo = linalg::submatrix(prec, miss, obs);
  Eigen::LLT<Matrix> llt(pmm);
  if (llt.info() != Eigen::Success) throw NumericalError("conditional: singular precision block");
  Vector resid(static_cast<Index>(obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k) {
    resid(static_cast<Index>(k)) = values(obs[k]) - psi(obs[k]);
  }
  mean = linalg::subvector(psi, miss) - llt.solve(pmo * resid);
  cov = scale * linalg::symmetrize(llt.solve(Matrix::Identity(pmm.rows(), pmm.cols())));
}

}  // namespace

Matrix kron_conditional_expectation(const MaskedMatrix& x, const TrcmModel& model, Index cap) {
  check_model(x, model);
  const VecForm vf = vec_form(model, cap);
  const Index n = x.rows();
  Matrix out = x.values();
  if (x.complete()) return out;
  IndexList miss, obs;
  vec_partition(x, miss, obs);
  const Matrix& v = x.values();
  Vector r(static_cast<Index>(obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k) {
    const Index pos = obs[k];
    r(static_cast<Index>(k)) = v(pos % n, pos / n) - vf.mean(pos);
  }
  Eigen::LLT<Matrix> llt(linalg::submatrix(vf.cov, obs, obs));
  if (llt.info() != Eigen::Success) throw NumericalError("kronecker oracle: singular Omega_oo");
  const Vector w = llt.solve(r);
  const Vector fill = linalg::submatrix(vf.cov, miss, obs) * w;
  for (std::size_t k = 0; k < miss.size(); ++k) {
    const Index pos = miss[k];
    out(pos % n, pos / n) = vf.mean(pos) + fill(static_cast<Index>(k));
  }
  return out;
}

Matrix kron_conditional_covariance(const MaskedMatrix& x, const TrcmModel& model, Index cap) {
  check_model(x, model);
  const VecForm vf = vec_form(model, cap);
  if (x.complete()) return Matrix(0, 0);
  IndexList miss, obs;
  vec_partition(x, miss, obs);
  Eigen::LLT<Matrix> llt(linalg::submatrix(vf.cov, obs, obs));
  if (llt.info() != Eigen::Success) throw NumericalError("kronecker oracle: singular Omega_oo");
  const Matrix omo = linalg::submatrix(vf.cov, miss, obs);
  return linalg::symmetrize(linalg::submatrix(vf.cov, miss, miss) -
                            omo * llt.solve(omo.transpose()));
}

SliceConditional row_conditional(const Matrix& current, const MaskedMatrix& pattern,
                                 const TrcmModel& model, Index i) {
  check_model(pattern, model);
  if (i < 0 || i >= pattern.rows()) throw InputError("row_conditional: index out of range");
  const Matrix& a = model.covs.sigma_inv();
  const Matrix mean = model.mean_matrix();
  const Matrix r = current - mean;

  SliceConditional out;
  out.index = i;
  out.missing = pattern.row_missing(i);
  out.observed = pattern.row_observed(i);
  // Sigma_ik Sigma_kk^-1 = -A_ik / A_ii and the Schur complement is 1 / A_ii.
  out.scale = 1.0 / a(i, i);
  Vector offset = Vector::Zero(pattern.cols());
  for (Index k = 0; k < pattern.rows(); ++k) {
    if (k != i) offset -= a(i, k) * r.row(k).transpose();
  }
  out.psi = mean.row(i).transpose() + out.scale * offset;
  out.gamma = out.scale * model.covs.delta();
  if (out.missing.empty()) return out;
  const Vector values = current.row(i).transpose();
  condition_on_observed(out.psi, values, model.covs.delta_inv(), out.scale, out.missing,
                        out.observed, out.mean, out.cov);
  return out;
}

SliceConditional col_conditional(const Matrix& current, const MaskedMatrix& pattern,
                                 const TrcmModel& model, Index j) {
  check_model(pattern, model);
  if (j < 0 || j >= pattern.cols()) throw InputError("col_conditional: index out of range");
  const Matrix& b = model.covs.delta_inv();
  const Matrix mean = model.mean_matrix();
  const Matrix r = current - mean;

  SliceConditional out;
  out.index = j;
  out.missing = pattern.col_missing(j);
  out.observed = pattern.col_observed(j);
  out.scale = 1.0 / b(j, j);
  Vector offset = Vector::Zero(pattern.rows());
  for (Index l = 0; l < pattern.cols(); ++l) {
    if (l != j) offset -= b(l, j) * r.col(l);
  }
  out.psi = mean.col(j) + out.scale * offset;
  out.gamma = out.scale * model.covs.sigma();
  if (out.missing.empty()) return out;
  const Vector values = current.col(j);
  condition_on_observed(out.psi, values, model.covs.sigma_inv(), out.scale, out.missing,
                        out.observed, out.mean, out.cov);
  return out;
}

AceResult ace_expectation(const MaskedMatrix& x, const TrcmModel& model, const AceOptions& opts) {
  check_model(x, model);
  if (!(opts.tol > 0.0) || opts.max_sweeps < 1) throw InputError("ace: bad tolerance or sweep cap");
  const Index n = x.rows();
  const Index p = x.cols();
  const Matrix mean = model.mean_matrix();
  AceResult out;
  if (x.complete()) {
    out.completed = x.values();
    return out;
  }
  const Matrix& a = model.covs.sigma_inv();
  const Matrix& b = model.covs.delta_inv();

  // Per-slice factorizations of the precision restricted to missing cells.
  struct SliceSolver {
    Index index;
    IndexList miss, obs;
    Eigen::LLT<Matrix> llt;
    Matrix pmo;
  };
  auto build = [](Index idx, const IndexList& miss, const IndexList& obs, const Matrix& prec) {
    SliceSolver s{idx, miss, obs, Eigen::LLT<Matrix>(linalg::submatrix(prec, miss, miss)),
                  linalg::submatrix(prec, miss, obs)};
    if (s.llt.info() != Eigen::Success) throw NumericalError("ace: singular precision block");
    return s;
  };
  std::vector<SliceSolver> rows, cols;
  for (Index i = 0; i < n; ++i) {
    if (!x.row_missing(i).empty()) rows.push_back(build(i, x.row_missing(i), x.row_observed(i), b));
  }
  for (Index j = 0; j < p; ++j) {
    if (!x.col_missing(j).empty()) cols.push_back(build(j, x.col_missing(j), x.col_observed(j), a));
  }

  // Work on residuals R = X - M; missing cells start at zero (nu_i + mu_j).
  Matrix r = x.values() - mean;
  for (const Cell& c : x.missing_cells()) r(c.row, c.col) = 0.0;

  Vector phi, resid;
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    double change = 0.0;
    for (const SliceSolver& s : rows) {
      const Index i = s.index;
      // phi = psi - M_i = R_i - (A R)_i / A_ii
      phi = r.row(i).transpose() - (r.transpose() * a.col(i)) / a(i, i);
      resid.resize(static_cast<Index>(s.obs.size()));
      for (std::size_t k = 0; k < s.obs.size(); ++k) {
        resid(static_cast<Index>(k)) = r(i, s.obs[k]) - phi(s.obs[k]);
      }
      const Vector shift = s.llt.solve(s.pmo * resid);
      for (std::size_t k = 0; k < s.miss.size(); ++k) {
        const Index j = s.miss[k];
        const double updated = phi(j) - shift(static_cast<Index>(k));
        change = std::max(change, std::abs(updated - r(i, j)));
        r(i, j) = updated;
      }
    }
    for (const SliceSolver& s : cols) {
      const Index j = s.index;
      phi = r.col(j) - (r * b.col(j)) / b(j, j);
      resid.resize(static_cast<Index>(s.obs.size()));
      for (std::size_t k = 0; k < s.obs.size(); ++k) {
        resid(static_cast<Index>(k)) = r(s.obs[k], j) - phi(s.obs[k]);
      }
      const Vector shift = s.llt.solve(s.pmo * resid);
      for (std::size_t k = 0; k < s.miss.size(); ++k) {
        const Index i = s.miss[k];
        const double updated = phi(i) - shift(static_cast<Index>(k));
        change = std::max(change, std::abs(updated - r(i, j)));
        r(i, j) = updated;
      }
    }
    out.sweeps = sweep;
    out.residual = change;
    if (change < opts.tol) break;
  }
  out.converged = out.residual < opts.tol;
  out.completed = x.restore_observed(mean + r);
  return out;
}

EStepResult e_step(const MaskedMatrix& x, const TrcmModel& model, const EStepOptions& opts) {
  check_model(x, model);
  const Index n = x.rows();
  const Index p = x.cols();
  EStepResult out;
  out.cells = x.missing_cells();
  if (x.complete()) {
    out.x_hat = x.values();
    out.g_mat = Matrix::Zero(p, p);
    out.f_mat = Matrix::Zero(n, n);
    out.cond_cov = Matrix(0, 0);
    return out;
  }
  const auto& covs = model.covs;
  const Matrix mean = model.mean_matrix();

  std::optional<MissingPrecision> qmm;
  auto precision = [&]() -> const MissingPrecision& {
    if (!qmm) {
      try {
        qmm.emplace(x, covs, opts.cross_cap);
      } catch (const CapExceeded& e) {
        throw CapExceeded(std::string(e.what()) +
                          "; exact covariance corrections are limited to the cross cap, use the "
                          "one-step imputer for larger problems");
      }
    }
    return *qmm;
  };

  switch (opts.mean) {
    case EStepOptions::Mean::ace: {
      AceResult ace = ace_expectation(x, model, opts.ace);
      if (!ace.converged) {
        throw ConvergenceError("e-step: conditional expectation sweeps did not converge",
                               ace.sweeps, ace.residual);
      }
      out.x_hat = std::move(ace.completed);
      out.ace_sweeps = ace.sweeps;
      break;
    }
    case EStepOptions::Mean::joint:
      out.x_hat = x.restore_observed(mean + precision().completed_residual(x, mean));
      break;
    case EStepOptions::Mean::kronecker:
      out.x_hat = kron_conditional_expectation(x, model, opts.kron_cap);
      break;
  }

  out.cond_cov = opts.covariance == EStepOptions::Covariance::kronecker
                     ? kron_conditional_covariance(x, model, opts.kron_cap)
                     : precision().conditional_covariance();
  kernels::assemble_corrections(out.cells, out.cond_cov, covs.sigma_inv(), covs.delta_inv(),
                                out.g_mat, out.f_mat);
  out.g_mat = linalg::symmetrize(out.g_mat);
  out.f_mat = linalg::symmetrize(out.f_mat);
  return out;
}

}  // namespace trcm
