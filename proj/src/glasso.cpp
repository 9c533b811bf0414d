#include <trcm/glasso.hpp>

#include <trcm/error.hpp>
#include <trcm/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace trcm {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Concentration matrix implied by W and the lasso coefficients B (column j
// holds the coefficients of column j; B(j, j) unused).
Matrix concentration_from(const Matrix& w, const Matrix& b) {
  const Index p = w.rows();
  Matrix theta(p, p);
  for (Index j = 0; j < p; ++j) {
    double wb = 0.0;
    for (Index k = 0; k < p; ++k) {
      if (k != j) wb += w(k, j) * b(k, j);
    }
    const double t22 = 1.0 / (w(j, j) - wb);
    theta(j, j) = t22;
    for (Index k = 0; k < p; ++k) {
      if (k != j) theta(k, j) = -b(k, j) * t22;
    }
  }
  return linalg::symmetrize(theta);
}

}  // namespace

double glasso_objective(const Matrix& s, const Matrix& theta, double rho) {
  return linalg::logdet_spd(theta) - s.cwiseProduct(theta).sum() - rho * theta.cwiseAbs().sum();
}

GlassoResult glasso(const Matrix& s, double rho, double tol, int max_sweeps, const Matrix* warm) {
  const Index p = s.rows();
  if (s.cols() != p || p == 0) throw InputError("glasso: S must be square and nonempty");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InputError("glasso: rho must be positive");
  if (!(tol > 0.0) || max_sweeps < 1) throw InputError("glasso: bad tolerance or sweep cap");
  if (!s.allFinite()) throw InputError("glasso: non-finite S");

  Matrix w = s;
  w.diagonal().array() += rho;
  Matrix b = Matrix::Zero(p, p);
  if (warm != nullptr && warm->rows() == p && warm->cols() == p) {
    for (Index j = 0; j < p; ++j) {
      const double t22 = (*warm)(j, j);
      if (t22 > 0.0) {
        for (Index k = 0; k < p; ++k) {
          if (k != j) b(k, j) = -(*warm)(k, j) / t22;
        }
      }
    }
  }

  if (p == 1) {
    GlassoResult out;
    out.w = w;
    out.w_inv = w.cwiseInverse();
    return out;
  }

  const double inner_tol = std::min(1e-10, 1e-3 * tol);
  Vector wb(p);
  GlassoResult out;
  double gap = std::numeric_limits<double>::infinity();
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (Index j = 0; j < p; ++j) {
      // wb = W11 * beta over the index set {k != j}.
      for (Index k = 0; k < p; ++k) {
        if (k == j) continue;
        double acc = 0.0;
        for (Index l = 0; l < p; ++l) {
          if (l != j) acc += w(k, l) * b(l, j);
        }
        wb(k) = acc;
      }
      for (int pass = 0; pass < 10000; ++pass) {
        double delta_max = 0.0;
        for (Index k = 0; k < p; ++k) {
          if (k == j) continue;
          const double old = b(k, j);
          const double partial = s(k, j) - (wb(k) - w(k, k) * old);
          const double updated = soft_threshold(partial, rho) / w(k, k);
          if (updated != old) {
            const double step = updated - old;
            b(k, j) = updated;
            for (Index l = 0; l < p; ++l) {
              if (l != j) wb(l) += w(l, k) * step;
            }
            delta_max = std::max(delta_max, std::abs(step) * w(k, k));
          }
        }
        if (delta_max < inner_tol) break;
      }
      for (Index k = 0; k < p; ++k) {
        if (k == j) continue;
        w(k, j) = wb(k);
        w(j, k) = wb(k);
      }
    }

    const Matrix theta = concentration_from(w, b);
    Eigen::LLT<Matrix> lt(theta), lw(w);
    if (lt.info() == Eigen::Success && lw.info() == Eigen::Success) {
      const double logdet_t = 2.0 * lt.matrixLLT().diagonal().array().log().sum();
      const double logdet_w = 2.0 * lw.matrixLLT().diagonal().array().log().sum();
      gap = -logdet_w - static_cast<double>(p) - logdet_t + s.cwiseProduct(theta).sum() +
            rho * theta.cwiseAbs().sum();
      if (gap <= tol) {
        out.w = w;
        out.w_inv = theta;
        out.sweeps = sweep;
        out.gap = std::max(gap, 0.0);
        return out;
      }
    }
  }
  throw ConvergenceError("glasso: duality gap " + std::to_string(gap) + " above tolerance after " +
                             std::to_string(max_sweeps) + " sweeps",
                         max_sweeps, gap);
}

}  // namespace trcm
