#include <trcm/kernels.hpp>

#include <cmath>
#include <limits>

#include <omp.h>

namespace trcm::kernels {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double pair_correlation(const Matrix& values, const BoolMatrix& observed, Index a, Index b,
                        Index min_overlap) {
  const Index p = values.cols();
  Index count = 0;
  double sa = 0.0, sb = 0.0;
  for (Index j = 0; j < p; ++j) {
    if (observed(a, j) && observed(b, j)) {
      sa += values(a, j);
      sb += values(b, j);
      ++count;
    }
  }
  if (count < min_overlap || count < 2) return kNaN;
  const double ma = sa / static_cast<double>(count);
  const double mb = sb / static_cast<double>(count);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (Index j = 0; j < p; ++j) {
    if (observed(a, j) && observed(b, j)) {
      const double da = values(a, j) - ma;
      const double db = values(b, j) - mb;
      saa += da * da;
      sbb += db * db;
      sab += da * db;
    }
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return kNaN;
  return sab / std::sqrt(saa * sbb);
}

// Positions of each column's missing cells (contiguous in vec order) and of
// each row's missing cells.
struct CellIndex {
  std::vector<Index> col_begin;  // size p + 1
  std::vector<IndexList> by_row;
};

CellIndex index_cells(const std::vector<Cell>& cells, Index n, Index p) {
  CellIndex idx;
  idx.col_begin.assign(p + 1, 0);
  idx.by_row.assign(n, {});
  for (std::size_t a = 0; a < cells.size(); ++a) {
    ++idx.col_begin[cells[a].col + 1];
    idx.by_row[cells[a].row].push_back(static_cast<Index>(a));
  }
  for (Index j = 0; j < p; ++j) idx.col_begin[j + 1] += idx.col_begin[j];
  return idx;
}

constexpr std::size_t kParallelCells = 256;
constexpr Index kParallelRows = 64;

}  // namespace

namespace serial {

Matrix missing_precision(const std::vector<Cell>& cells, const Matrix& sigma_inv,
                         const Matrix& delta_inv) {
  const Index m = static_cast<Index>(cells.size());
  Matrix q(m, m);
  for (Index b = 0; b < m; ++b) {
    for (Index a = 0; a < m; ++a) {
      q(a, b) = delta_inv(cells[a].col, cells[b].col) * sigma_inv(cells[a].row, cells[b].row);
    }
  }
  return q;
}

void assemble_corrections(const std::vector<Cell>& cells, const Matrix& cond_cov,
                          const Matrix& sigma_inv, const Matrix& delta_inv, Matrix& g, Matrix& f) {
  g = Matrix::Zero(delta_inv.rows(), delta_inv.cols());
  f = Matrix::Zero(sigma_inv.rows(), sigma_inv.cols());
  const std::size_t m = cells.size();
  for (std::size_t b = 0; b < m; ++b) {
    for (std::size_t a = 0; a < m; ++a) {
      const double v = cond_cov(static_cast<Index>(a), static_cast<Index>(b));
      g(cells[a].col, cells[b].col) += v * sigma_inv(cells[a].row, cells[b].row);
      f(cells[a].row, cells[b].row) += v * delta_inv(cells[a].col, cells[b].col);
    }
  }
}

Matrix row_correlation(const Matrix& values, const BoolMatrix& observed, Index min_overlap) {
  const Index n = values.rows();
  Matrix r = Matrix::Constant(n, n, kNaN);
  for (Index a = 0; a < n; ++a) {
    for (Index b = a + 1; b < n; ++b) {
      r(a, b) = r(b, a) = pair_correlation(values, observed, a, b, min_overlap);
    }
  }
  return r;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index c = 0; c < a.cols(); ++c) {
    for (Index r = 0; r < a.rows(); ++r) {
      out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
    }
  }
  return out;
}

}  // namespace serial

namespace omp {

Matrix missing_precision(const std::vector<Cell>& cells, const Matrix& sigma_inv,
                         const Matrix& delta_inv) {
  const Index m = static_cast<Index>(cells.size());
  Matrix q(m, m);
#pragma omp parallel for schedule(static)
  for (Index b = 0; b < m; ++b) {
    const Index jb = cells[b].col;
    const Index ib = cells[b].row;
    for (Index a = 0; a < m; ++a) {
      q(a, b) = delta_inv(cells[a].col, jb) * sigma_inv(cells[a].row, ib);
    }
  }
  return q;
}

void assemble_corrections(const std::vector<Cell>& cells, const Matrix& cond_cov,
                          const Matrix& sigma_inv, const Matrix& delta_inv, Matrix& g, Matrix& f) {
  const Index n = sigma_inv.rows();
  const Index p = delta_inv.rows();
  const CellIndex idx = index_cells(cells, n, p);
  g = Matrix::Zero(p, p);
  f = Matrix::Zero(n, n);
#pragma omp parallel
  {
#pragma omp for schedule(dynamic)
    for (Index j = 0; j < p; ++j) {
      for (Index jj = 0; jj < p; ++jj) {
        double acc = 0.0;
        for (Index a = idx.col_begin[j]; a < idx.col_begin[j + 1]; ++a) {
          for (Index b = idx.col_begin[jj]; b < idx.col_begin[jj + 1]; ++b) {
            acc += cond_cov(a, b) * sigma_inv(cells[a].row, cells[b].row);
          }
        }
        g(j, jj) = acc;
      }
    }
#pragma omp for schedule(dynamic)
    for (Index i = 0; i < n; ++i) {
      for (Index ii = 0; ii < n; ++ii) {
        double acc = 0.0;
        for (Index a : idx.by_row[i]) {
          for (Index b : idx.by_row[ii]) {
            acc += cond_cov(a, b) * delta_inv(cells[a].col, cells[b].col);
          }
        }
        f(i, ii) = acc;
      }
    }
  }
}

Matrix row_correlation(const Matrix& values, const BoolMatrix& observed, Index min_overlap) {
  const Index n = values.rows();
  Matrix r = Matrix::Constant(n, n, kNaN);
#pragma omp parallel for schedule(dynamic)
  for (Index a = 0; a < n; ++a) {
    for (Index b = 0; b < n; ++b) {
      if (b != a) r(a, b) = pair_correlation(values, observed, std::min(a, b), std::max(a, b),
                                             min_overlap);
    }
  }
  return r;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < a.cols(); ++c) {
    for (Index r = 0; r < a.rows(); ++r) {
      out.block(r * b.rows(), c * b.cols(), b.rows(), b.cols()) = a(r, c) * b;
    }
  }
  return out;
}

}  // namespace omp

Matrix missing_precision(const std::vector<Cell>& cells, const Matrix& sigma_inv,
                         const Matrix& delta_inv) {
  return cells.size() >= kParallelCells ? omp::missing_precision(cells, sigma_inv, delta_inv)
                                        : serial::missing_precision(cells, sigma_inv, delta_inv);
}

void assemble_corrections(const std::vector<Cell>& cells, const Matrix& cond_cov,
                          const Matrix& sigma_inv, const Matrix& delta_inv, Matrix& g, Matrix& f) {
  if (cells.size() >= kParallelCells) {
    omp::assemble_corrections(cells, cond_cov, sigma_inv, delta_inv, g, f);
  } else {
    serial::assemble_corrections(cells, cond_cov, sigma_inv, delta_inv, g, f);
  }
}

Matrix row_correlation(const Matrix& values, const BoolMatrix& observed, Index min_overlap) {
  return values.rows() >= kParallelRows ? omp::row_correlation(values, observed, min_overlap)
                                        : serial::row_correlation(values, observed, min_overlap);
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  return a.size() * b.size() >= 1 << 16 ? omp::kronecker(a, b) : serial::kronecker(a, b);
}

}  // namespace trcm::kernels
