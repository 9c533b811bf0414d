#pragma once

#include <trcm/types.hpp>

namespace trcm::linalg {

/// (A + A^T) / 2.
Matrix symmetrize(const Matrix& a);

/// Eigenvalues in ascending order with matching eigenvector columns.
struct SymmetricEigen {
  Vector values;
  Matrix vectors;
};
SymmetricEigen eigen_symmetric(const Matrix& a);

/// Throws NumericalError unless min eigenvalue > rel_floor * max eigenvalue
/// and max eigenvalue > 0.
void require_positive_definite(const Matrix& a, double rel_floor, const char* what);

/// log|A| for symmetric positive-definite A (Cholesky). Throws NumericalError.
double logdet_spd(const Matrix& a);

/// Inverse of a symmetric positive-definite matrix. If the Cholesky
/// factorization fails, `jitter` is added to the diagonal (growing tenfold,
/// at most six times) before giving up with NumericalError.
Matrix inverse_spd(const Matrix& a, double jitter = 1e-10);

/// max |a_ij|; zero for empty matrices.
double max_abs(const Matrix& a);

/// Select rows/cols by index lists.
Matrix submatrix(const Matrix& a, const IndexList& rows, const IndexList& cols);
Vector subvector(const Vector& v, const IndexList& idx);

}  // namespace trcm::linalg
