#include <trcm/masked_matrix.hpp>

#include <trcm/error.hpp>

#include <cmath>
#include <limits>
#include <string>

namespace trcm {

MaskedMatrix::MaskedMatrix(Matrix values, BoolMatrix observed)
    : values_(std::move(values)), observed_(std::move(observed)) {
  const Index n = values_.rows();
  const Index p = values_.cols();
  if (n < 1 || p < 1) throw InputError("masked matrix: empty dimensions");
  if (observed_.rows() != n || observed_.cols() != p) {
    throw InputError("masked matrix: mask shape does not match values");
  }
  row_missing_.assign(n, {});
  row_observed_.assign(n, {});
  col_missing_.assign(p, {});
  col_observed_.assign(p, {});
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  for (Index j = 0; j < p; ++j) {
    for (Index i = 0; i < n; ++i) {
      if (observed_(i, j)) {
        if (!std::isfinite(values_(i, j))) {
          throw InputError("masked matrix: non-finite observed value at (" + std::to_string(i) +
                           ", " + std::to_string(j) + ")");
        }
        row_observed_[i].push_back(j);
        col_observed_[j].push_back(i);
      } else {
        values_(i, j) = nan;
        row_missing_[i].push_back(j);
        col_missing_[j].push_back(i);
        missing_.push_back({i, j});
      }
    }
  }
  for (Index i = 0; i < n; ++i) {
    if (row_observed_[i].empty()) {
      throw InputError("masked matrix: row " + std::to_string(i) + " has no observed entries");
    }
  }
  for (Index j = 0; j < p; ++j) {
    if (col_observed_[j].empty()) {
      throw InputError("masked matrix: column " + std::to_string(j) +
                       " has no observed entries");
    }
  }
}

MaskedMatrix MaskedMatrix::fully_observed(const Matrix& values) {
  return MaskedMatrix(values, BoolMatrix::Constant(values.rows(), values.cols(), true));
}

double MaskedMatrix::missing_fraction() const noexcept {
  return static_cast<double>(missing_.size()) / static_cast<double>(rows() * cols());
}

MaskedMatrix MaskedMatrix::hide(const BoolMatrix& extra_missing) const {
  if (extra_missing.rows() != rows() || extra_missing.cols() != cols()) {
    throw InputError("masked matrix: hide mask has the wrong shape");
  }
  return MaskedMatrix(values_, observed_ && !extra_missing);
}

MaskedMatrix MaskedMatrix::transposed() const {
  return MaskedMatrix(values_.transpose(), observed_.transpose());
}

Matrix MaskedMatrix::restore_observed(const Matrix& completed) const {
  if (completed.rows() != rows() || completed.cols() != cols()) {
    throw InputError("masked matrix: completed matrix has the wrong shape");
  }
  Matrix out = completed;
  for (Index j = 0; j < cols(); ++j) {
    for (Index i : col_observed_[j]) out(i, j) = values_(i, j);
  }
  return out;
}

Matrix MaskedMatrix::filled(const Matrix& fill) const {
  Matrix out = values_;
  for (const Cell& c : missing_) out(c.row, c.col) = fill(c.row, c.col);
  return out;
}

bool MaskedMatrix::rows_pairwise_observed() const {
  const Index n = rows();
  for (Index a = 0; a < n; ++a) {
    for (Index b = a + 1; b < n; ++b) {
      if (!(observed_.row(a) && observed_.row(b)).any()) return false;
    }
  }
  return true;
}

}  // namespace trcm
