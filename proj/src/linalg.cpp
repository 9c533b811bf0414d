#include <trcm/linalg.hpp>

#include <trcm/error.hpp>

#include <cmath>
#include <string>

namespace trcm::linalg {

Matrix symmetrize(const Matrix& a) {
  Matrix s = 0.5 * (a + a.transpose());
  return s;
}

SymmetricEigen eigen_symmetric(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("symmetric eigendecomposition failed");
  }
  return {solver.eigenvalues(), solver.eigenvectors()};
}

void require_positive_definite(const Matrix& a, double rel_floor, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw InputError(std::string(what) + ": expected a nonempty square matrix");
  }
  if (!a.allFinite()) {
    throw InputError(std::string(what) + ": non-finite entries");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a, Eigen::EigenvaluesOnly);
  const Vector& ev = solver.eigenvalues();
  const double hi = ev(ev.size() - 1);
  if (!(hi > 0.0) || !(ev(0) > rel_floor * hi)) {
    throw NumericalError(std::string(what) + ": not positive definite (min eigenvalue " +
                         std::to_string(ev(0)) + ")");
  }
}

double logdet_spd(const Matrix& a) {
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("log-determinant: matrix is not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Matrix inverse_spd(const Matrix& a, double jitter) {
  const Index n = a.rows();
  Eigen::LLT<Matrix> llt(a);
  double bump = jitter;
  for (int attempt = 0; llt.info() != Eigen::Success; ++attempt) {
    if (attempt == 6 || !(bump > 0.0)) {
      throw NumericalError("inverse: matrix is not positive definite");
    }
    Matrix shifted = a;
    shifted.diagonal().array() += bump;
    llt.compute(shifted);
    bump *= 10.0;
  }
  Matrix inv = llt.solve(Matrix::Identity(n, n));
  return symmetrize(inv);
}

double max_abs(const Matrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

Matrix submatrix(const Matrix& a, const IndexList& rows, const IndexList& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) {
      out(static_cast<Index>(r), static_cast<Index>(c)) = a(rows[r], cols[c]);
    }
  }
  return out;
}

Vector subvector(const Vector& v, const IndexList& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Index>(k)) = v(idx[k]);
  return out;
}

}  // namespace trcm::linalg
