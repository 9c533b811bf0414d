#pragma once
// Reference computations for tests. Written from the textbook formulas with
// plain loops and dense Eigen solves; nothing here calls into trcm.

#include <trcm/types.hpp>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using trcm::Index;
using trcm::Matrix;
using trcm::Vector;

inline Matrix gaussian(Index n, Index p, std::mt19937_64& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Matrix m(n, p);
  for (Index j = 0; j < p; ++j)
    for (Index i = 0; i < n; ++i) m(i, j) = z(rng);
  return m;
}

// Well-conditioned random SPD matrix.
inline Matrix spd(Index d, std::mt19937_64& rng, double ridge = 0.5) {
  const Matrix a = gaussian(d, d, rng);
  Matrix s = a * a.transpose() / static_cast<double>(d) + ridge * Matrix::Identity(d, d);
  return 0.5 * (s + s.transpose());
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index r = 0; r < b.rows(); ++r)
        for (Index c = 0; c < b.cols(); ++c) k(i * b.rows() + r, j * b.cols() + c) = a(i, j) * b(r, c);
  return k;
}

// Column-major vec.
inline Vector vec(const Matrix& x) {
  Vector v(x.size());
  for (Index j = 0; j < x.cols(); ++j)
    for (Index i = 0; i < x.rows(); ++i) v(j * x.rows() + i) = x(i, j);
  return v;
}

inline double logdet(const Matrix& a) { return std::log(a.determinant()); }

inline double gauss_logpdf(const Vector& x, const Vector& mean, const Matrix& cov) {
  const Vector r = x - mean;
  const double quad = r.dot(cov.lu().solve(r));
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * M_PI) + logdet(cov) + quad);
}

struct Conditional {
  Vector mean;
  Matrix cov;
};

// N(mean, cov) conditioned on x[obs] = values[obs], covariance form:
// mu_m + S_mo S_oo^-1 (x_o - mu_o),  S_mm - S_mo S_oo^-1 S_om.
inline Conditional condition(const Vector& mean, const Matrix& cov, const std::vector<Index>& miss,
                             const std::vector<Index>& obs, const Vector& values) {
  const auto m = static_cast<Index>(miss.size());
  const auto o = static_cast<Index>(obs.size());
  Matrix smm(m, m), smo(m, o), soo(o, o);
  Vector ro(o);
  for (Index a = 0; a < m; ++a) {
    for (Index b = 0; b < m; ++b) smm(a, b) = cov(miss[a], miss[b]);
    for (Index b = 0; b < o; ++b) smo(a, b) = cov(miss[a], obs[b]);
  }
  for (Index a = 0; a < o; ++a) {
    for (Index b = 0; b < o; ++b) soo(a, b) = cov(obs[a], obs[b]);
    ro(a) = values(obs[a]) - mean(obs[a]);
  }
  Conditional c;
  c.mean.resize(m);
  for (Index a = 0; a < m; ++a) c.mean(a) = mean(miss[a]);
  if (o > 0) {
    const Eigen::PartialPivLU<Matrix> lu(soo);
    c.mean += smo * lu.solve(ro);
    c.cov = smm - smo * lu.solve(smo.transpose());
  } else {
    c.cov = smm;
  }
  return c;
}

inline double max_abs(const Matrix& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

// Random mask with the given fraction missing and every row and column keeping
// an observed cell (redrawn until it does).
inline trcm::BoolMatrix random_mask(Index n, Index p, double frac, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    trcm::BoolMatrix m(n, p);
    for (Index k = 0; k < m.size(); ++k) m(k) = u(rng) >= frac;
    if ((m.rowwise().count().array() > 0).all() && (m.colwise().count().array() > 0).all()) return m;
  }
}

// Double centering: row means then column means removed.
inline Matrix center_both(const Matrix& x) {
  Matrix c = x;
  c.colwise() -= c.rowwise().mean();
  c.rowwise() -= c.colwise().mean();
  return c;
}

// (n/2)(log|T| - tr(S T)) - rho ||T||_F^2 at concentration T.
inline double eq1_objective(const Matrix& s, double n, double rho, const Matrix& t) {
  return 0.5 * n * (logdet(t) - (s * t).trace()) - rho * t.squaredNorm();
}

// Gradient ascent with Barzilai-Borwein steps and a monotone backtracking guard.
inline Matrix eq1_maximizer(const Matrix& s, double n, double rho) {
  const Index p = s.rows();
  Matrix t = Matrix::Identity(p, p);
  auto grad = [&](const Matrix& a) -> Matrix {
    Matrix g = 0.5 * n * (a.inverse() - s) - 2.0 * rho * a;
    return 0.5 * (g + g.transpose());
  };
  Matrix g = grad(t);
  double step = 1e-2;
  for (int it = 0; it < 200000 && max_abs(g) > 1e-12; ++it) {
    Matrix next;
    double trial = step;
    for (;;) {
      next = t + trial * g;
      Eigen::LLT<Matrix> llt(next);
      if (llt.info() == Eigen::Success &&
          eq1_objective(s, n, rho, next) >= eq1_objective(s, n, rho, t) - 1e-14) break;
      trial *= 0.5;
    }
    const Matrix gn = grad(next);
    const Matrix ds = next - t, dg = gn - g;
    const double denom = -(ds.cwiseProduct(dg)).sum();
    step = denom > 0 ? ds.squaredNorm() / denom : 1e-2;
    t = next;
    g = gn;
  }
  return t.inverse();
}

}  // namespace oracle
