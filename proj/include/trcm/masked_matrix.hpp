#pragma once

#include <trcm/types.hpp>

namespace trcm {

/// An n x p matrix with an observed/missing mask.
///
/// The mask is the source of truth: cells under a false mask entry hold NaN
/// and are never read. Every row and every column must carry at least one
/// observed value; construction throws InputError otherwise.
class MaskedMatrix {
 public:
  MaskedMatrix(Matrix values, BoolMatrix observed);

  static MaskedMatrix fully_observed(const Matrix& values);

  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }

  bool observed(Index i, Index j) const { return observed_(i, j); }
  const BoolMatrix& mask() const noexcept { return observed_; }

  /// Values with NaN in every missing cell.
  const Matrix& values() const noexcept { return values_; }

  const IndexList& row_missing(Index i) const { return row_missing_[i]; }
  const IndexList& row_observed(Index i) const { return row_observed_[i]; }
  const IndexList& col_missing(Index j) const { return col_missing_[j]; }
  const IndexList& col_observed(Index j) const { return col_observed_[j]; }

  /// Missing cells in column-major order, i.e. their order inside vec(X).
  const std::vector<Cell>& missing_cells() const noexcept { return missing_; }
  Index missing_count() const noexcept { return static_cast<Index>(missing_.size()); }
  Index observed_count() const noexcept { return rows() * cols() - missing_count(); }
  bool complete() const noexcept { return missing_.empty(); }
  double missing_fraction() const noexcept;

  /// Same values, additional cells hidden (union of both missing sets).
  MaskedMatrix hide(const BoolMatrix& extra_missing) const;
  MaskedMatrix transposed() const;

  /// `completed` with every observed cell overwritten by the stored value.
  Matrix restore_observed(const Matrix& completed) const;

  /// Copy of values() with missing cells replaced by `fill`.
  Matrix filled(const Matrix& fill) const;

  /// True when every pair of rows shares at least one column where both are
  /// observed (the pairwise-observation condition for row covariances).
  bool rows_pairwise_observed() const;

 private:
  Matrix values_;
  BoolMatrix observed_;
  std::vector<IndexList> row_missing_, row_observed_;
  std::vector<IndexList> col_missing_, col_observed_;
  std::vector<Cell> missing_;
};

}  // namespace trcm
