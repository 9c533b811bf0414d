#include "oracles.hpp"

#include <trcm/error.hpp>
#include <trcm/estimation.hpp>
#include <trcm/glasso.hpp>
#include <trcm/linalg.hpp>

#include <doctest.h>

#include <Eigen/QR>

using namespace trcm;

namespace {

// Least-squares additive fit over the observed cells, from a dense design.
Matrix additive_lstsq(const MaskedMatrix& x, const Matrix* weights_vec_precision = nullptr) {
  const Index n = x.rows(), p = x.cols();
  std::vector<Index> obs;
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i)
      if (x.observed(i, j)) obs.push_back(j * n + i);
  const auto o = static_cast<Index>(obs.size());
  Matrix design = Matrix::Zero(o, n + p);
  Vector y(o);
  for (Index a = 0; a < o; ++a) {
    const Index i = obs[a] % n, j = obs[a] / n;
    design(a, i) = 1.0;
    design(a, n + j) = 1.0;
    y(a) = x.values()(i, j);
  }
  Vector coef;
  if (weights_vec_precision) {
    const Matrix& w = *weights_vec_precision;
    coef = (design.transpose() * w * design).completeOrthogonalDecomposition().solve(design.transpose() * w * y);
  } else {
    coef = design.completeOrthogonalDecomposition().solve(y);
  }
  Matrix m(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) m(i, j) = coef(i) + coef(n + j);
  return m;
}

// ISTA on f(T) = -log|T| + tr(S T) + rho ||T||_1.
Matrix glasso_prox(const Matrix& s, double rho) {
  const Index p = s.rows();
  Matrix t = (s + rho * Matrix::Identity(p, p)).inverse();
  auto smooth = [&](const Matrix& a) { return -oracle::logdet(a) + (s * a).trace(); };
  auto soft = [](const Matrix& a, double k) {
    return a.unaryExpr([k](double v) { return v > k ? v - k : (v < -k ? v + k : 0.0); }).eval();
  };
  double step = 1.0;
  for (int it = 0; it < 100000; ++it) {
    const Matrix g = s - t.inverse();
    Matrix next;
    for (;;) {
      next = soft(t - step * g, step * rho);
      next = 0.5 * (next + next.transpose());
      Eigen::LLT<Matrix> llt(next);
      const Matrix d = next - t;
      if (llt.info() == Eigen::Success &&
          smooth(next) <= smooth(t) + (g.cwiseProduct(d)).sum() + d.squaredNorm() / (2 * step))
        break;
      step *= 0.5;
    }
    const double change = oracle::max_abs(next - t);
    t = next;
    step *= 1.5;
    if (change < 1e-13) break;
  }
  return t;
}

}  // namespace

TEST_CASE("complete-data means are the least-squares additive fit") {
  std::mt19937_64 rng(21);
  const Matrix x = oracle::gaussian(6, 4, rng);
  const MeanFit fit = estimate_means(MaskedMatrix::fully_observed(x));
  CHECK(fit.iterations <= 1);
  CHECK(oracle::max_abs(fit.params.matrix() - additive_lstsq(MaskedMatrix::fully_observed(x))) < 1e-12);
  CHECK(std::abs(fit.params.nu.mean()) < 1e-14);
}

TEST_CASE("incomplete-data means converge to the least-squares fit over observed cells") {
  std::mt19937_64 rng(22);
  SolverOptions opts;
  opts.rel_tol = 1e-13;
  opts.max_outer_iters = 100000;
  for (int rep = 0; rep < 5; ++rep) {
    const MaskedMatrix x(oracle::gaussian(7, 5, rng), oracle::random_mask(7, 5, 0.3, rng));
    const MeanFit fit = estimate_means(x, opts);
    CHECK(fit.converged);
    CHECK(oracle::max_abs(fit.params.matrix() - additive_lstsq(x)) < 1e-8);
  }
}

TEST_CASE("additive data means are recovered exactly") {
  Vector a(4), b(3);
  a << 1, -2, 0.5, 3;
  b << 10, 20, 30;
  const Matrix x = MeanParams(a, b).matrix();
  const MeanFit fit = estimate_means(MaskedMatrix::fully_observed(x));
  CHECK(oracle::max_abs(fit.params.matrix() - x) < 1e-12);
}

TEST_CASE("weighted means are the generalized least-squares fit") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 5; ++rep) {
    const Index n = 5, p = 4;
    const CovParams covs(oracle::spd(n, rng), oracle::spd(p, rng));
    const Matrix x = oracle::gaussian(n, p, rng);
    const Matrix w = oracle::kron(covs.delta(), covs.sigma()).inverse();
    const Matrix expected = additive_lstsq(MaskedMatrix::fully_observed(x), &w);
    CHECK(oracle::max_abs(weighted_means(x, covs).matrix() - expected) < 1e-10);
  }
}

TEST_CASE("ridge covariance matches a generic maximizer of the L2 objective") {
  std::mt19937_64 rng(24);
  for (int rep = 0; rep < 20; ++rep) {
    const double rho = std::vector<double>{0.1, 0.5, 1.0, 3.0}[rep % 4];
    Matrix x = oracle::gaussian(5, 4, rng);
    x.rowwise() -= x.colwise().mean();
    const Matrix s = x.transpose() * x / 5.0;
    const Matrix expected = oracle::eq1_maximizer(s, 5.0, rho);
    CHECK(oracle::max_abs(rcm_l2_cov(x, rho) - expected) < 1e-5);
  }
}

TEST_CASE("ridge covariance tail eigenvalues when p > n") {
  std::mt19937_64 rng(25);
  for (double rho : {0.1, 1.0, 10.0}) {
    const Matrix x = oracle::gaussian(3, 7, rng);
    const SpdPair pair = rcm_l2_pair(x, rho);
    const Vector ev = linalg::eigen_symmetric(pair.cov).values;
    const double tail = 2.0 * std::sqrt(rho / 3.0);
    for (Index k = 0; k < 4; ++k) CHECK(ev(k) == doctest::Approx(tail).epsilon(1e-12));
    CHECK(ev(4) > tail);
  }
}

TEST_CASE("closed-form L2:L2 solution satisfies both eigenvalue quadratics and the gradients") {
  std::mt19937_64 rng(26);
  std::uniform_int_distribution<int> dim(2, 12);
  const double rhos[] = {0.1, 1.0, 10.0};
  for (int rep = 0; rep < 60; ++rep) {
    const Index n = dim(rng), p = dim(rng);
    const double rr = rhos[rep % 3], rc = rhos[(rep / 3) % 3];
    const Matrix x = oracle::center_both(oracle::gaussian(n, p, rng));
    const L2L2Fit fit = trcm_l2l2(x, rr, rc);
    const SpectralSolution& s = fit.spectrum;
    for (Index i = 0; i < std::min(n, p); ++i) {
      const double d2 = i < s.rank ? s.d(i) * s.d(i) : 0.0;
      const double b = s.beta(i), t = s.theta(i);
      const double q1 = p * t * b * b - d2 * b - 4.0 * rr * t;
      const double q2 = n * b * t * t - d2 * t - 4.0 * rc * b;
      CHECK(std::abs(q1) <= 1e-10 * std::max({1.0, p * t * b * b, d2 * b}));
      CHECK(std::abs(q2) <= 1e-10 * std::max({1.0, n * b * t * t, d2 * t}));
    }
    const Matrix gs = fit.covs.sigma() - x * fit.covs.delta_inv() * x.transpose() / double(p) -
                      4.0 * rr / p * fit.covs.sigma_inv();
    const Matrix gd = fit.covs.delta() - x.transpose() * fit.covs.sigma_inv() * x / double(n) -
                      4.0 * rc / n * fit.covs.delta_inv();
    CHECK(oracle::max_abs(gs) < 1e-8);
    CHECK(oracle::max_abs(gd) < 1e-8);
  }
}

TEST_CASE("closed form handles an exactly singular centered matrix") {
  Matrix x(4, 3);
  x << 1, 2, 3, 2, 3, 4, 5, 6, 4, 4, 4, 4;
  const Matrix c = oracle::center_both(x);
  const L2L2Fit fit = trcm_l2l2(c, 1.0, 1.0);
  const auto [r, k] = stationarity_residual(fit.covs, c, PenaltySpec{2, 2, 1.0, 1.0});
  CHECK(r < 1e-10);
  CHECK(k < 1e-10);
}

TEST_CASE("coordinate-wise solver reaches the closed form for L2:L2 and increases monotonically") {
  std::mt19937_64 rng(27);
  const Matrix x = oracle::center_both(oracle::gaussian(6, 5, rng));
  const PenaltySpec pen{2, 2, 1.0, 0.5};
  SolverOptions opts;
  opts.rel_tol = 1e-14;
  opts.max_outer_iters = 20000;
  const CoordwiseFit cw = trcm_coordwise(x, pen, opts);
  for (std::size_t k = 1; k < cw.trace.size(); ++k) {
    CHECK(cw.trace[k] >= cw.trace[k - 1] - 1e-12 * std::abs(cw.trace[k - 1]));
  }
  const L2L2Fit cf = trcm_l2l2(x, 1.0, 0.5);
  CHECK(centered_objective(x, cf.covs, pen) >= cw.trace.back() - 1e-9);
  CHECK(centered_objective(x, cf.covs, pen) == doctest::Approx(cw.trace.back()).epsilon(1e-6));
}

TEST_CASE("coordinate-wise L1:L1 reaches a stationary point") {
  std::mt19937_64 rng(28);
  const Matrix x = oracle::center_both(oracle::gaussian(8, 6, rng));
  const PenaltySpec pen{1, 1, 0.5, 0.5};
  SolverOptions opts;
  opts.rel_tol = 1e-12;
  opts.glasso_tol = 1e-10;
  opts.max_outer_iters = 5000;
  const CoordwiseFit cw = trcm_coordwise(x, pen, opts);
  CHECK(cw.converged);
  for (std::size_t k = 1; k < cw.trace.size(); ++k) {
    CHECK(cw.trace[k] >= cw.trace[k - 1] - 1e-9 * std::abs(cw.trace[k - 1]));
  }
  const auto [r, c] = stationarity_residual(cw.covs, x, pen);
  CHECK(r < 1e-3);
  CHECK(c < 1e-3);
}

TEST_CASE("glasso matches a proximal-gradient solution and its optimality conditions") {
  std::mt19937_64 rng(29);
  for (int rep = 0; rep < 6; ++rep) {
    const Index p = 3 + rep;
    const Matrix x = oracle::gaussian(2 * p, p, rng);
    const Matrix s = x.transpose() * x / double(2 * p);
    const double rho = 0.05 + 0.05 * rep;
    const GlassoResult g = glasso(s, rho, 1e-12, 100000);
    const Matrix ref = glasso_prox(s, rho);
    CHECK(oracle::max_abs(g.w_inv - ref) < 1e-6);
    for (Index i = 0; i < p; ++i) {
      CHECK(g.w(i, i) == doctest::Approx(s(i, i) + rho).epsilon(1e-8));
      for (Index j = 0; j < p; ++j) {
        if (i == j) continue;
        if (g.w_inv(i, j) != 0.0) {
          const double sign = g.w_inv(i, j) > 0 ? 1.0 : -1.0;
          CHECK(std::abs(g.w(i, j) - s(i, j) - sign * rho) < 1e-6);
        } else {
          CHECK(std::abs(g.w(i, j) - s(i, j)) <= rho + 1e-6);
        }
      }
    }
    CHECK(glasso_objective(s, g.w_inv, rho) >= glasso_objective(s, ref, rho) - 1e-10);
  }
}

TEST_CASE("glasso warm start and large penalty") {
  std::mt19937_64 rng(30);
  const Matrix x = oracle::gaussian(20, 5, rng);
  const Matrix s = x.transpose() * x / 20.0;
  const GlassoResult cold = glasso(s, 0.1, 1e-10);
  const GlassoResult warm = glasso(s, 0.1, 1e-10, 1000, &cold.w_inv);
  CHECK(warm.sweeps <= cold.sweeps);
  CHECK(oracle::max_abs(warm.w_inv - cold.w_inv) < 1e-6);
  // Past the largest off-diagonal |S_ij| the solution is diagonal.
  const double big = s.cwiseAbs().maxCoeff() + 1.0;
  const GlassoResult diag = glasso(s, big, 1e-10);
  for (Index i = 0; i < 5; ++i) {
    for (Index j = 0; j < 5; ++j) {
      if (i != j) CHECK(diag.w_inv(i, j) == 0.0);
    }
  }
}

TEST_CASE("L1 concentration weight is 2 rho / count") {
  std::mt19937_64 rng(31);
  Matrix x = oracle::gaussian(12, 4, rng);
  const Matrix s = x.transpose() * x / 12.0;
  SolverOptions opts;
  opts.glasso_tol = 1e-12;
  const SpdPair step = concentration_step(s, 12.0, 1, 0.9, opts);
  const GlassoResult g = glasso(s, 2.0 * 0.9 / 12.0, 1e-12);
  CHECK(oracle::max_abs(step.inv - g.w_inv) < 1e-8);
  const SpdPair mono = concentration_step_monotone(s, 12.0, 1, 0.9, opts, step);
  CHECK(concentration_objective(s, 12.0, 1, 0.9, mono.inv) >=
        concentration_objective(s, 12.0, 1, 0.9, step.inv));
}

TEST_CASE("estimation input checks") {
  const Matrix x = Matrix::Ones(3, 3);
  CHECK_THROWS_AS(trcm_l2l2(x, 0.0, 1.0), InputError);
  CHECK_THROWS_AS(PenaltySpec({3, 2, 1.0, 1.0}).validate(), InputError);
  CHECK_THROWS_AS(PenaltySpec({2, 2, -1.0, 1.0}).validate(), InputError);
}
