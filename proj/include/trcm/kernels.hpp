#pragma once

// Data-parallel kernels. Each has a straightforward serial reference in
// `serial` and an OpenMP version in `omp`; tests hold them to agreement and
// bench/ compares their throughput. Call sites use the unqualified dispatch
// functions, which pick `omp` for large inputs.

#include <trcm/types.hpp>

namespace trcm::kernels {

namespace serial {

Matrix missing_precision(const std::vector<Cell>& cells, const Matrix& sigma_inv,
                         const Matrix& delta_inv);

/// G(j,j') = sum V[(i,j),(i',j')] Sinv(i,i'),  F(i,i') = sum V[...] Dinv(j,j').
void assemble_corrections(const std::vector<Cell>& cells, const Matrix& cond_cov,
                          const Matrix& sigma_inv, const Matrix& delta_inv, Matrix& g, Matrix& f);

/// Pearson correlation between rows over co-observed columns. Pairs with
/// fewer than `min_overlap` shared columns or zero variance get NaN, as does
/// the diagonal.
Matrix row_correlation(const Matrix& values, const BoolMatrix& observed, Index min_overlap);

Matrix kronecker(const Matrix& a, const Matrix& b);

}  // namespace serial

namespace omp {

Matrix missing_precision(const std::vector<Cell>& cells, const Matrix& sigma_inv,
                         const Matrix& delta_inv);
void assemble_corrections(const std::vector<Cell>& cells, const Matrix& cond_cov,
                          const Matrix& sigma_inv, const Matrix& delta_inv, Matrix& g, Matrix& f);
Matrix row_correlation(const Matrix& values, const BoolMatrix& observed, Index min_overlap);
Matrix kronecker(const Matrix& a, const Matrix& b);

}  // namespace omp

Matrix missing_precision(const std::vector<Cell>& cells, const Matrix& sigma_inv,
                         const Matrix& delta_inv);
void assemble_corrections(const std::vector<Cell>& cells, const Matrix& cond_cov,
                          const Matrix& sigma_inv, const Matrix& delta_inv, Matrix& g, Matrix& f);
Matrix row_correlation(const Matrix& values, const BoolMatrix& observed, Index min_overlap);
Matrix kronecker(const Matrix& a, const Matrix& b);

}  // namespace trcm::kernels
