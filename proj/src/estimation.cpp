#include <trcm/estimation.hpp>

#include <trcm/error.hpp>
#include <trcm/glasso.hpp>
#include <trcm/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace trcm {

namespace {

void require_finite(const Matrix& x, const char* what) {
  if (!x.allFinite()) throw InputError(std::string(what) + ": non-finite data");
}

// Rank cutoff used for singular values (LAPACK-style default).
Index numerical_rank(const Vector& d, Index n, Index p) {
  if (d.size() == 0 || d(0) <= 0.0) return 0;
  const double cut = static_cast<double>(std::max(n, p)) * std::numeric_limits<double>::epsilon() * d(0);
  Index r = 0;
  while (r < d.size() && d(r) > cut) ++r;
  return r;
}

bool improved_enough(double prev, double next, double rel_tol) {
  return std::abs(next - prev) <= rel_tol * std::max(1.0, std::abs(prev));
}

}  // namespace

void SolverOptions::validate() const {
  if (max_outer_iters < 1 || glasso_max_sweeps < 1) throw InputError("iteration caps must be >= 1");
  if (!(rel_tol > 0.0) || !(glasso_tol > 0.0) || !(jitter > 0.0)) {
    throw InputError("solver tolerances must be positive");
  }
}

MeanFit estimate_means(const MaskedMatrix& x, const SolverOptions& opts) {
  opts.validate();
  const Index n = x.rows();
  const Index p = x.cols();
  const Matrix& v = x.values();
  MeanFit fit;
  if (x.complete()) {
    const Vector row = v.rowwise().mean();
    const Vector col = v.colwise().mean().transpose();
    const double grand = row.mean();
    fit.params = MeanParams((row.array() - grand).matrix(), col).canonical();
    fit.iterations = 1;
    return fit;
  }

  Vector nu = Vector::Zero(n);
  Vector mu = Vector::Zero(p);
  Matrix fitted = Matrix::Zero(n, p);
  for (int it = 1; it <= opts.max_outer_iters; ++it) {
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (Index j : x.row_observed(i)) acc += v(i, j) - mu(j);
      nu(i) = acc / static_cast<double>(x.row_observed(i).size());
    }
    for (Index j = 0; j < p; ++j) {
      double acc = 0.0;
      for (Index i : x.col_observed(j)) acc += v(i, j) - nu(i);
      mu(j) = acc / static_cast<double>(x.col_observed(j).size());
    }
    Matrix next = nu.replicate(1, p);
    next.rowwise() += mu.transpose();
    fit.residual = (next - fitted).cwiseAbs().maxCoeff();
    fitted = std::move(next);
    fit.iterations = it;
    if (fit.residual < opts.rel_tol) {
      fit.params = MeanParams(nu, mu).canonical();
      return fit;
    }
  }
  fit.params = MeanParams(nu, mu).canonical();
  fit.converged = false;
  return fit;
}

MeanParams weighted_means(const Matrix& x, const CovParams& covs) {
  if (x.rows() != covs.rows() || x.cols() != covs.cols()) {
    throw InputError("weighted means: shape mismatch");
  }
  Vector a = covs.sigma_inv().rowwise().sum();
  Vector b = covs.delta_inv().rowwise().sum();
  a /= a.sum();
  b /= b.sum();
  const Vector nu = x * b;
  const double shift = a.dot(nu);
  Vector mu = x.transpose() * a;
  mu.array() -= shift;
  return MeanParams(nu, mu).canonical();
}

SpdPair regularize_spectrum(const Matrix& scatter, double c) {
  if (!(c >= 0.0) || !std::isfinite(c)) throw InputError("spectral regularization: bad constant");
  const auto eig = linalg::eigen_symmetric(linalg::symmetrize(scatter));
  Vector theta(eig.values.size());
  for (Index k = 0; k < theta.size(); ++k) {
    const double s = std::max(eig.values(k), 0.0);
    theta(k) = 0.5 * (s + std::sqrt(s * s + 4.0 * c));
  }
  const double hi = theta.maxCoeff();
  if (!(theta.minCoeff() > CovParams::kPdFloor * hi)) {
    throw NumericalError("spectral regularization: singular estimate (zero penalty on a "
                         "rank-deficient scatter)");
  }
  const Matrix& v = eig.vectors;
  return {linalg::symmetrize(v * theta.asDiagonal() * v.transpose()),
          linalg::symmetrize(v * theta.cwiseInverse().asDiagonal() * v.transpose())};
}

SpdPair concentration_step(const Matrix& scatter, double count, int q, double rho,
                           const SolverOptions& opts, const Matrix* warm) {
  if (q == 2) return regularize_spectrum(scatter, 4.0 * rho / count);
  if (q != 1) throw InputError("penalty exponent must be 1 or 2");
  const GlassoResult g = glasso(linalg::symmetrize(scatter), 2.0 * rho / count, opts.glasso_tol,
                                opts.glasso_max_sweeps, warm);
  Matrix inv = g.w_inv;
  Matrix cov = linalg::inverse_spd(inv, opts.jitter);
  return {std::move(cov), std::move(inv)};
}

double concentration_objective(const Matrix& scatter, double count, int q, double rho,
                               const Matrix& concentration) {
  return 0.5 * count *
             (linalg::logdet_spd(concentration) - scatter.cwiseProduct(concentration).sum()) -
         penalty_term(concentration, q, rho);
}

SpdPair concentration_step_monotone(const Matrix& scatter, double count, int q, double rho,
                                    const SolverOptions& opts, const SpdPair& previous) {
  SpdPair next = concentration_step(scatter, count, q, rho, opts, &previous.inv);
  if (q == 2) return next;
  const double before = concentration_objective(scatter, count, q, rho, previous.inv);
  const double after = concentration_objective(scatter, count, q, rho, next.inv);
  return after >= before ? next : previous;
}

SpdPair rcm_l2_pair(const Matrix& x_centered, double rho) {
  require_finite(x_centered, "rcm_l2_cov");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw InputError("rcm_l2_cov: rho must be >= 0");
  const Index n = x_centered.rows();
  const Index p = x_centered.cols();
  Eigen::BDCSVD<Matrix> svd(x_centered, Eigen::ComputeFullV);
  const Vector& d = svd.singularValues();
  const Index r = numerical_rank(d, n, p);
  const double nn = static_cast<double>(n);
  Vector theta = Vector::Constant(p, 2.0 * std::sqrt(rho / nn));
  for (Index i = 0; i < r; ++i) {
    const double d2 = d(i) * d(i);
    theta(i) = (d2 + std::sqrt(d2 * d2 + 16.0 * nn * rho)) / (2.0 * nn);
  }
  if (!(theta.minCoeff() > CovParams::kPdFloor * theta.maxCoeff())) {
    throw NumericalError("rcm_l2_cov: singular estimate (rho = 0 with rank-deficient data)");
  }
  const Matrix& v = svd.matrixV();
  return {linalg::symmetrize(v * theta.asDiagonal() * v.transpose()),
          linalg::symmetrize(v * theta.cwiseInverse().asDiagonal() * v.transpose())};
}

Matrix rcm_l2_cov(const Matrix& x_centered, double rho) { return rcm_l2_pair(x_centered, rho).cov; }

Matrix rcm_l1_cov(const Matrix& x_centered, double rho, const SolverOptions& opts) {
  require_finite(x_centered, "rcm_l1_cov");
  opts.validate();
  const double n = static_cast<double>(x_centered.rows());
  const Matrix s = x_centered.transpose() * x_centered / n;
  return glasso(s, 2.0 * rho / n, opts.glasso_tol, opts.glasso_max_sweeps).w;
}

L2L2Fit trcm_l2l2(const Matrix& x_centered, double rho_row, double rho_col) {
  require_finite(x_centered, "trcm_l2l2");
  if (!(rho_row > 0.0) || !(rho_col > 0.0) || !std::isfinite(rho_row) || !std::isfinite(rho_col)) {
    throw InputError("trcm_l2l2: penalties must be positive");
  }
  const Index n = x_centered.rows();
  const Index p = x_centered.cols();
  const double nn = static_cast<double>(n);
  const double pp = static_cast<double>(p);
  Eigen::BDCSVD<Matrix> svd(x_centered, Eigen::ComputeFullU | Eigen::ComputeFullV);

  SpectralSolution sol;
  sol.d = svd.singularValues();
  sol.rank = numerical_rank(sol.d, n, p);
  sol.u_basis = svd.matrixU();
  sol.v_basis = svd.matrixV();
  sol.beta = Vector::Constant(n, 2.0 * std::sqrt(rho_row / pp));
  sol.theta = Vector::Constant(p, 2.0 * std::sqrt(rho_col / nn));

  for (Index i = 0; i < sol.rank; ++i) {
    const double d2 = sol.d(i) * sol.d(i);
    const double d4 = d2 * d2;
    const double c1 = -4.0 * rho_col * pp * pp;
    const double c2 = 32.0 * rho_row * rho_col * pp + d4 * (nn - pp);
    const double c3 = 4.0 * rho_row * (d4 - 16.0 * rho_row * rho_col);
    sol.coeffs.push_back({c1, c2, c3});
    // c2^2 - 4 c1 c3 expands to d^4 (64 rho_r rho_c n p + d^4 (n - p)^2); the
    // factored form keeps it nonnegative as d -> 0 where the two terms cancel.
    const double s = std::sqrt(64.0 * rho_row * rho_col * nn * pp + d4 * (nn - pp) * (nn - pp));
    const double root = d2 * s;
    // (-c2 - root) / (2 c1), evaluated without cancellation when c2 < 0.
    const double beta_sq = c2 >= 0.0 ? (-c2 - root) / (2.0 * c1) : (2.0 * c3) / (root - c2);
    if (!(beta_sq > 0.0)) {
      throw NumericalError("trcm_l2l2: nonpositive root at index " + std::to_string(i));
    }
    const double beta = std::sqrt(beta_sq);
    // p beta^2 - 4 rho_r = d^2 w / (8 rho_c p) with w = d^2 (n - p) + s, so
    // theta = d^2 beta / (p beta^2 - 4 rho_r) = 8 rho_c p beta / w.
    const double w = nn >= pp ? d2 * (nn - pp) + s
                              : 64.0 * rho_row * rho_col * nn * pp / (s + d2 * (pp - nn));
    if (!(w > 0.0)) {
      throw NumericalError("trcm_l2l2: nonpositive column eigenvalue at index " + std::to_string(i));
    }
    sol.beta(i) = beta;
    sol.theta(i) = 8.0 * rho_col * pp * beta / w;
  }

  const Matrix& u = sol.u_basis;
  const Matrix& v = sol.v_basis;
  L2L2Fit fit{CovParams::from_pairs(u * sol.beta.asDiagonal() * u.transpose(),
                                    u * sol.beta.cwiseInverse().asDiagonal() * u.transpose(),
                                    v * sol.theta.asDiagonal() * v.transpose(),
                                    v * sol.theta.cwiseInverse().asDiagonal() * v.transpose()),
              std::move(sol)};
  return fit;
}

double centered_objective(const Matrix& x_centered, const CovParams& covs, const PenaltySpec& pen) {
  const Index n = x_centered.rows();
  const Index p = x_centered.cols();
  return penalized_loglik(x_centered, TrcmModel(MeanParams::zero(n, p), covs), pen);
}

CoordwiseFit trcm_coordwise(const Matrix& x_centered, const PenaltySpec& pen,
                            const SolverOptions& opts) {
  require_finite(x_centered, "trcm_coordwise");
  pen.validate();
  opts.validate();
  if (!(pen.rho_row > 0.0) || !(pen.rho_col > 0.0)) {
    throw InputError("trcm_coordwise: penalties must be positive");
  }
  const Index n = x_centered.rows();
  const Index p = x_centered.cols();
  const double nn = static_cast<double>(n);
  const double pp = static_cast<double>(p);
  const Matrix& x = x_centered;

  CovParams covs = opts.init ? *opts.init : CovParams::identity(n, p);
  if (covs.rows() != n || covs.cols() != p) throw InputError("trcm_coordwise: init shape mismatch");

  CoordwiseFit fit{covs, {}, 0, false};
  double current = centered_objective(x, covs, pen);
  fit.trace.push_back(current);

  auto step_delta = [&]() {
    const Matrix s = x.transpose() * covs.sigma_inv() * x / nn;
    const SpdPair d = concentration_step_monotone(s, nn, pen.q_col, pen.rho_col, opts,
                                                  {covs.delta(), covs.delta_inv()});
    covs = CovParams::from_pairs(covs.sigma(), covs.sigma_inv(), d.cov, d.inv);
    current = centered_objective(x, covs, pen);
  };
  auto step_sigma = [&]() {
    const Matrix s = x * covs.delta_inv() * x.transpose() / pp;
    const SpdPair d = concentration_step_monotone(s, pp, pen.q_row, pen.rho_row, opts,
                                                  {covs.sigma(), covs.sigma_inv()});
    covs = CovParams::from_pairs(d.cov, d.inv, covs.delta(), covs.delta_inv());
    current = centered_objective(x, covs, pen);
  };

  for (int cycle = 1; cycle <= opts.max_outer_iters; ++cycle) {
    const double start = current;
    if (opts.order == SolverOptions::Order::delta_first) {
      step_delta();
      fit.trace.push_back(current);
      step_sigma();
    } else {
      step_sigma();
      fit.trace.push_back(current);
      step_delta();
    }
    fit.trace.push_back(current);
    fit.cycles = cycle;
    if (!std::isfinite(current)) throw NumericalError("trcm_coordwise: non-finite objective");
    if (improved_enough(start, current, opts.rel_tol)) {
      fit.converged = true;
      break;
    }
  }
  fit.covs = std::move(covs);
  return fit;
}

std::pair<double, double> stationarity_residual(const CovParams& covs, const Matrix& x_centered,
                                                const PenaltySpec& pen) {
  pen.validate();
  const double nn = static_cast<double>(x_centered.rows());
  const double pp = static_cast<double>(x_centered.cols());
  const Matrix& x = x_centered;
  auto residual = [](const Matrix& smooth, const Matrix& conc, int q, double rho, double count) {
    if (q == 2) return linalg::max_abs(smooth - (4.0 * rho / count) * conc);
    const double lambda = 2.0 * rho / count;
    double worst = 0.0;
    for (Index c = 0; c < smooth.cols(); ++c) {
      for (Index r = 0; r < smooth.rows(); ++r) {
        const double t = conc(r, c);
        const double g = smooth(r, c);
        const double e = t == 0.0 ? std::max(0.0, std::abs(g) - lambda)
                                  : std::abs(g - lambda * (t > 0.0 ? 1.0 : -1.0));
        worst = std::max(worst, e);
      }
    }
    return worst;
  };
  const Matrix smooth_row = covs.sigma() - x * covs.delta_inv() * x.transpose() / pp;
  const Matrix smooth_col = covs.delta() - x.transpose() * covs.sigma_inv() * x / nn;
  return {residual(smooth_row, covs.sigma_inv(), pen.q_row, pen.rho_row, pp),
          residual(smooth_col, covs.delta_inv(), pen.q_col, pen.rho_col, nn)};
}

TrcmModel fit_trcm(const Matrix& x, const PenaltySpec& pen, const SolverOptions& opts) {
  const MeanParams means = estimate_means(MaskedMatrix::fully_observed(x), opts).params;
  const Matrix centered = x - means.matrix();
  if (pen.l2l2()) return TrcmModel(means, trcm_l2l2(centered, pen.rho_row, pen.rho_col).covs);
  return TrcmModel(means, trcm_coordwise(centered, pen, opts).covs);
}

}  // namespace trcm
