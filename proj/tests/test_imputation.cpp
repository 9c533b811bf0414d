#include "oracles.hpp"

#include <trcm/error.hpp>
#include <trcm/estimation.hpp>
#include <trcm/imputation.hpp>

#include <doctest.h>

using namespace trcm;

namespace {

MaskedMatrix matrix_variate_data(Index n, Index p, double frac, std::mt19937_64& rng) {
  const TrcmModel truth(MeanParams(oracle::gaussian(n, 1, rng), oracle::gaussian(p, 1, rng)),
                        CovParams(oracle::spd(n, rng), oracle::spd(p, rng)));
  return MaskedMatrix(sample(truth, rng()), oracle::random_mask(n, p, frac, rng));
}

// Observed-row Gaussian log likelihood without the 2 pi constant, minus the penalty.
double multivariate_observed(const MaskedMatrix& x, const Vector& mu, const Matrix& delta, int q,
                             double rho) {
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const IndexList& obs = x.row_observed(i);
    const auto o = static_cast<Index>(obs.size());
    Matrix s(o, o);
    Vector r(o);
    for (Index a = 0; a < o; ++a) {
      r(a) = x.values()(i, obs[a]) - mu(obs[a]);
      for (Index b = 0; b < o; ++b) s(a, b) = delta(obs[a], obs[b]);
    }
    total += oracle::gauss_logpdf(r, Vector::Zero(o), s) + 0.5 * o * std::log(2.0 * M_PI);
  }
  const Matrix prec = delta.inverse();
  double pen = 0.0;
  for (Index k = 0; k < prec.size(); ++k) pen += std::pow(std::abs(prec(k)), q);
  return total - rho * pen;
}

void check_observed_kept(const MaskedMatrix& x, const Matrix& completed) {
  for (Index k = 0; k < completed.size(); ++k) {
    if (x.mask()(k)) REQUIRE(completed(k) == x.values()(k));
    REQUIRE(std::isfinite(completed(k)));
  }
}

}  // namespace

TEST_CASE("RCM EM increases the observed penalized likelihood and reports it correctly") {
  std::mt19937_64 rng(51);
  for (int q : {1, 2}) {
    const MaskedMatrix x = matrix_variate_data(15, 6, 0.25, rng);
    ImputeOptions opts;
    opts.rel_tol = 1e-10;
    opts.solver.glasso_tol = 1e-10;
    const ImputationReport rep = rcm_impute(x, 0.5, q, Axis::cols, opts);
    CHECK(rep.method == "rcm-cols");
    CHECK(rep.objective_trace.size() == static_cast<std::size_t>(rep.iterations));
    check_observed_kept(x, rep.completed);
    double prev = rep.initial_objective;
    for (double v : rep.objective_trace) {
      CHECK(v >= prev - 1e-9 * std::abs(prev));
      prev = v;
    }
    const Vector mu = rep.model->means.matrix().row(0).transpose();
    const double expected = multivariate_observed(x, mu, rep.model->covs.delta(), q, 0.5);
    CHECK(rep.objective_trace.back() == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("RCM on rows is RCM on columns of the transpose") {
  std::mt19937_64 rng(52);
  const MaskedMatrix x = matrix_variate_data(5, 9, 0.2, rng);
  const ImputationReport rows = rcm_impute(x, 1.0, 2, Axis::rows);
  const ImputationReport cols = rcm_impute(x.transposed(), 1.0, 2, Axis::cols);
  CHECK(rows.completed == Matrix(cols.completed.transpose()));
  CHECK(rows.method == "rcm-rows");
}

TEST_CASE("MCECM is monotone, keeps observed cells and tracks its objective per cycle") {
  std::mt19937_64 rng(53);
  for (int q : {1, 2}) {
    const MaskedMatrix x = matrix_variate_data(8, 6, 0.2, rng);
    const PenaltySpec pen{q, q, 0.5, 0.5};
    ImputeOptions opts;
    opts.max_iters = 60;
    const ImputationReport rep = trcm_impute_mcecm(x, pen, opts);
    CHECK(rep.objective_trace.size() == static_cast<std::size_t>(rep.iterations));
    check_observed_kept(x, rep.completed);
    double prev = rep.initial_objective;
    for (double v : rep.objective_trace) {
      CHECK(v >= prev - 1e-9 * std::max(1.0, std::abs(prev)));
      prev = v;
    }
    CHECK(observed_loglik(x, *rep.model, pen) == doctest::Approx(rep.objective_trace.back()));
  }
}

TEST_CASE("MCECM completion is the conditional mean under its final model") {
  std::mt19937_64 rng(54);
  const MaskedMatrix x = matrix_variate_data(6, 5, 0.2, rng);
  const ImputationReport rep = trcm_impute_mcecm(x, PenaltySpec{2, 2, 1.0, 1.0});
  CHECK(oracle::max_abs(rep.completed - kron_conditional_expectation(x, *rep.model)) < 1e-10);
}

TEST_CASE("one-step imputation averages the marginal fits then conditions on the TRCM fit") {
  std::mt19937_64 rng(55);
  const MaskedMatrix x = matrix_variate_data(10, 8, 0.25, rng);
  const PenaltySpec pen{2, 2, 0.7, 1.3};
  ImputeOptions opts;
  opts.ace.tol = 1e-12;
  const ImputationReport rep = trcm_impute_onestep(x, pen, opts);
  CHECK(rep.method == "trcm-onestep");
  REQUIRE(rep.candidates.count("rcm-cols") == 1);
  REQUIRE(rep.candidates.count("rcm-rows") == 1);
  const Matrix& avg = rep.candidates.at("average");
  for (const Cell& c : x.missing_cells()) {
    CHECK(avg(c.row, c.col) == doctest::Approx(0.5 * (rep.candidates.at("rcm-cols")(c.row, c.col) +
                                                      rep.candidates.at("rcm-rows")(c.row, c.col))));
  }
  CHECK(rep.candidates.at("rcm-cols") == rcm_impute(x, 1.3, 2, Axis::cols, opts).completed);
  CHECK(rep.candidates.at("rcm-rows") == rcm_impute(x, 0.7, 2, Axis::rows, opts).completed);
  const TrcmModel fit = fit_trcm(avg, pen);
  CHECK(oracle::max_abs(rep.completed - kron_conditional_expectation(x, fit)) < 1e-8);
  check_observed_kept(x, rep.completed);
  CHECK(rep.objective_trace.size() == static_cast<std::size_t>(rep.iterations));
}

TEST_CASE("complete input is returned unchanged by every imputer") {
  std::mt19937_64 rng(56);
  const Matrix v = oracle::gaussian(6, 5, rng);
  const MaskedMatrix x = MaskedMatrix::fully_observed(v);
  CHECK(rcm_impute(x, 1.0, 2, Axis::cols).completed == v);
  CHECK(trcm_impute_onestep(x, PenaltySpec{}).completed == v);
  CHECK(trcm_impute_mcecm(x, PenaltySpec{}).completed == v);
}

TEST_CASE("imputer argument checks") {
  std::mt19937_64 rng(57);
  const MaskedMatrix x = matrix_variate_data(4, 4, 0.2, rng);
  CHECK_THROWS_AS(rcm_impute(x, 1.0, 3, Axis::cols), InputError);
  CHECK_THROWS_AS(rcm_impute(x, -1.0, 2, Axis::cols), InputError);
  CHECK_THROWS_AS(trcm_impute_mcecm(x, PenaltySpec{2, 2, 0.0, 1.0}), InputError);
}
