#include <trcm/imputation.hpp>

#include <trcm/error.hpp>
#include <trcm/linalg.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace trcm {

namespace {

bool settled(double prev, double next, double rel_tol) {
  return std::abs(next - prev) <= rel_tol * std::max(1.0, std::abs(prev));
}

void note_decrease(ImputationReport& rep, double prev, double next, double slack, int iter) {
  if (next < prev - slack * std::max(1.0, std::abs(prev))) {
    rep.notes.push_back("objective decreased at iteration " + std::to_string(iter) + " by " +
                        std::to_string(prev - next));
  }
}

// E-step of the multivariate model whose rows are iid N(mu, Delta).
struct RowwiseEStep {
  Matrix completed;
  Matrix correction;  // sum of conditional covariances, p x p
  double objective = 0.0;
};

RowwiseEStep rowwise_estep(const MaskedMatrix& y, const Vector& mu, const SpdPair& delta, int q,
                           double rho) {
  const Index n = y.rows();
  const Index p = y.cols();
  const Matrix& prec = delta.inv;
  RowwiseEStep out;
  out.correction = Matrix::Zero(p, p);
  Matrix r = y.values();
  r.rowwise() -= mu.transpose();
  double logdet_extra = 0.0;
  for (Index i = 0; i < n; ++i) {
    const IndexList& miss = y.row_missing(i);
    if (miss.empty()) continue;
    const IndexList& obs = y.row_observed(i);
    Eigen::LLT<Matrix> llt(linalg::submatrix(prec, miss, miss));
    if (llt.info() != Eigen::Success) throw NumericalError("rcm e-step: singular precision block");
    Vector ro(static_cast<Index>(obs.size()));
    for (std::size_t k = 0; k < obs.size(); ++k) ro(static_cast<Index>(k)) = r(i, obs[k]);
    const Vector rm = -llt.solve(linalg::submatrix(prec, miss, obs) * ro);
    const Matrix c = llt.solve(Matrix::Identity(rm.size(), rm.size()));
    for (std::size_t a = 0; a < miss.size(); ++a) {
      r(i, miss[a]) = rm(static_cast<Index>(a));
      for (std::size_t b = 0; b < miss.size(); ++b) {
        out.correction(miss[a], miss[b]) += c(static_cast<Index>(a), static_cast<Index>(b));
      }
    }
    logdet_extra += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  }
  const double logdet_delta = -linalg::logdet_spd(prec);
  const double quad = (r * prec).cwiseProduct(r).sum();
  out.objective = -0.5 * (static_cast<double>(n) * logdet_delta + logdet_extra) - 0.5 * quad -
                  penalty_term(prec, q, rho);
  Matrix completed = r;
  completed.rowwise() += mu.transpose();
  out.completed = y.restore_observed(completed);
  return out;
}

ImputationReport rcm_impute_cols(const MaskedMatrix& y, double rho, int q,
                                 const ImputeOptions& opts) {
  const Index n = y.rows();
  const Index p = y.cols();
  const double nn = static_cast<double>(n);

  // Column means over observed cells, mean fill, penalized MLE of the fill.
  Vector mu(p);
  for (Index j = 0; j < p; ++j) {
    double acc = 0.0;
    for (Index i : y.col_observed(j)) acc += y.values()(i, j);
    mu(j) = acc / static_cast<double>(y.col_observed(j).size());
  }
  Matrix fill = Matrix::Zero(n, p);
  fill.rowwise() += mu.transpose();
  Matrix centered = y.filled(fill);
  centered.rowwise() -= mu.transpose();
  SpdPair delta = concentration_step(centered.transpose() * centered / nn, nn, q, rho, opts.solver);

  ImputationReport rep;
  RowwiseEStep e = rowwise_estep(y, mu, delta, q, rho);
  rep.initial_objective = e.objective;
  double prev = e.objective;
  rep.converged = false;
  for (int it = 1; it <= opts.max_iters; ++it) {
    mu = e.completed.colwise().mean().transpose();
    Matrix r = e.completed;
    r.rowwise() -= mu.transpose();
    const Matrix scatter = (r.transpose() * r + e.correction) / nn;
    delta = concentration_step_monotone(scatter, nn, q, rho, opts.solver, delta);
    e = rowwise_estep(y, mu, delta, q, rho);
    rep.objective_trace.push_back(e.objective);
    rep.iterations = it;
    note_decrease(rep, prev, e.objective, opts.monotone_slack, it);
    const bool done = settled(prev, e.objective, opts.rel_tol);
    prev = e.objective;
    if (done) {
      rep.converged = true;
      break;
    }
  }
  rep.completed = std::move(e.completed);
  rep.model.emplace(MeanParams(Vector::Zero(n), mu).canonical(),
                    CovParams::from_pairs(Matrix::Identity(n, n), Matrix::Identity(n, n),
                                          delta.cov, delta.inv));
  return rep;
}

TrcmModel transpose_model(const TrcmModel& m) {
  return TrcmModel(MeanParams(m.means.mu, m.means.nu).canonical(),
                   CovParams::from_pairs(m.covs.delta(), m.covs.delta_inv(), m.covs.sigma(),
                                         m.covs.sigma_inv()));
}

TrcmModel fit_fixed(const Matrix& filled, const PenaltySpec& pen, const SolverOptions& solver) {
  return fit_trcm(filled, pen, solver);
}

MeanParams cm_means(const Matrix& x_hat, const CovParams& covs, const ImputeOptions& opts) {
  if (opts.mean_update == ImputeOptions::MeanUpdate::weighted) return weighted_means(x_hat, covs);
  return estimate_means(MaskedMatrix::fully_observed(x_hat), opts.solver).params;
}

}  // namespace

ImputationReport rcm_impute(const MaskedMatrix& x, double rho, int q, Axis axis,
                            const ImputeOptions& opts) {
  if (q != 1 && q != 2) throw InputError("rcm_impute: q must be 1 or 2");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw InputError("rcm_impute: rho must be >= 0");
  opts.solver.validate();
  ImputationReport rep;
  if (axis == Axis::cols) {
    rep = rcm_impute_cols(x, rho, q, opts);
    rep.method = "rcm-cols";
  } else {
    rep = rcm_impute_cols(x.transposed(), rho, q, opts);
    rep.completed.transposeInPlace();
    rep.model.emplace(transpose_model(*rep.model));
    rep.method = "rcm-rows";
  }
  rep.params["rho"] = rho;
  rep.params["q"] = q;
  return rep;
}

ImputationReport trcm_impute_mcecm(const MaskedMatrix& x, const PenaltySpec& pen,
                                   const ImputeOptions& opts) {
  pen.validate();
  opts.solver.validate();
  const double nn = static_cast<double>(x.rows());
  const double pp = static_cast<double>(x.cols());
  const Index cap = opts.estep.cross_cap;

  MeanParams means = estimate_means(x, opts.solver).params;
  const Matrix filled = x.filled(means.matrix());
  CovParams covs = opts.mle_init ? fit_fixed(filled, pen, opts.solver).covs
                                 : CovParams::identity(x.rows(), x.cols());
  if (opts.mle_init) means = estimate_means(MaskedMatrix::fully_observed(filled), opts.solver).params;

  ImputationReport rep;
  rep.method = "trcm-mcecm";
  rep.params = {{"rho_row", pen.rho_row}, {"rho_col", pen.rho_col}, {"q_row", pen.q_row},
                {"q_col", pen.q_col}};
  double prev = observed_loglik(x, TrcmModel(means, covs), pen, cap);
  rep.initial_objective = prev;
  rep.converged = false;

  for (int cycle = 1; cycle <= opts.max_iters; ++cycle) {
    // E step (Delta form) then CM over the means and Delta^-1.
    EStepResult e = e_step(x, TrcmModel(means, covs), opts.estep);
    means = cm_means(e.x_hat, covs, opts);
    Matrix r = e.x_hat - means.matrix();
    const Matrix scatter_col = (r.transpose() * covs.sigma_inv() * r + e.g_mat) / nn;
    const SpdPair d = concentration_step_monotone(scatter_col, nn, pen.q_col, pen.rho_col,
                                                  opts.solver, {covs.delta(), covs.delta_inv()});
    covs = CovParams::from_pairs(covs.sigma(), covs.sigma_inv(), d.cov, d.inv);

    // E step (Sigma form) then CM over the means and Sigma^-1.
    e = e_step(x, TrcmModel(means, covs), opts.estep);
    means = cm_means(e.x_hat, covs, opts);
    r = e.x_hat - means.matrix();
    const Matrix scatter_row = (r * covs.delta_inv() * r.transpose() + e.f_mat) / pp;
    const SpdPair s = concentration_step_monotone(scatter_row, pp, pen.q_row, pen.rho_row,
                                                  opts.solver, {covs.sigma(), covs.sigma_inv()});
    covs = CovParams::from_pairs(s.cov, s.inv, covs.delta(), covs.delta_inv());

    const double obj = observed_loglik(x, TrcmModel(means, covs), pen, cap);
    if (!std::isfinite(obj)) throw NumericalError("mcecm: non-finite objective");
    rep.objective_trace.push_back(obj);
    rep.iterations = cycle;
    note_decrease(rep, prev, obj, opts.monotone_slack, cycle);
    const bool done = settled(prev, obj, opts.rel_tol);
    prev = obj;
    if (done) {
      rep.converged = true;
      break;
    }
  }
  TrcmModel model(means, covs);
  rep.completed = e_step(x, model, opts.estep).x_hat;
  rep.model.emplace(std::move(model));
  return rep;
}

ImputationReport onestep_from_marginals(const MaskedMatrix& x, const Matrix& cols_completion,
                                        const Matrix& rows_completion, const PenaltySpec& pen,
                                        const ImputeOptions& opts) {
  pen.validate();
  Matrix averaged = x.values();
  for (const Cell& c : x.missing_cells()) {
    averaged(c.row, c.col) = 0.5 * (cols_completion(c.row, c.col) + rows_completion(c.row, c.col));
  }
  TrcmModel model = fit_fixed(averaged, pen, opts.solver);
  AceResult ace = ace_expectation(x, model, opts.ace);

  ImputationReport rep;
  rep.method = "trcm-onestep";
  rep.completed = std::move(ace.completed);
  rep.iterations = 1;
  rep.converged = ace.converged;
  if (!ace.converged) {
    rep.notes.push_back("conditional expectation sweeps stopped at residual " +
                        std::to_string(ace.residual));
  }
  rep.params = {{"rho_row", pen.rho_row}, {"rho_col", pen.rho_col}, {"q_row", pen.q_row},
                {"q_col", pen.q_col}, {"ace_sweeps", ace.sweeps}};
  rep.candidates["rcm-cols"] = cols_completion;
  rep.candidates["rcm-rows"] = rows_completion;
  rep.candidates["average"] = averaged;
  rep.initial_objective = std::numeric_limits<double>::quiet_NaN();
  if (x.missing_count() <= opts.estep.cross_cap) {
    rep.objective_trace.push_back(observed_loglik(x, model, pen, opts.estep.cross_cap));
  } else {
    rep.objective_trace.push_back(std::numeric_limits<double>::quiet_NaN());
  }
  rep.model.emplace(std::move(model));
  return rep;
}

ImputationReport trcm_impute_onestep(const MaskedMatrix& x, const PenaltySpec& pen,
                                     const ImputeOptions& opts) {
  pen.validate();
  const ImputationReport cols = rcm_impute(x, pen.rho_col, pen.q_col, Axis::cols, opts);
  const ImputationReport rows = rcm_impute(x, pen.rho_row, pen.q_row, Axis::rows, opts);
  ImputationReport rep = onestep_from_marginals(x, cols.completed, rows.completed, pen, opts);
  for (const auto* m : {&cols, &rows}) {
    if (!m->converged) rep.notes.push_back(m->method + " stopped at its iteration cap");
  }
  return rep;
}

}  // namespace trcm
