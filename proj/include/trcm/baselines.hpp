#pragma once

#include <trcm/imputation.hpp>
#include <trcm/masked_matrix.hpp>

namespace trcm {

struct BaselineOptions {
  double svd_rel_tol = 1e-6;
  int svd_max_iters = 500;
  /// Minimum number of co-observed columns for a usable correlation.
  int min_overlap = 2;
  /// Neighbor weights: |correlation| or equal weights.
  enum class KnnWeight { abs_correlation, uniform };
  KnnWeight knn_weight = KnnWeight::abs_correlation;

  void validate() const;
};

/// Iterative rank-k SVD fill with a column mean effect, run to a fixed point.
ImputationReport svd_impute(const MaskedMatrix& x, int rank, const BaselineOptions& opts = {});

/// Row neighbors ranked by pairwise-complete correlation of column-centered
/// data. Cells with no usable neighbor fall back to the column mean.
ImputationReport knn_impute(const MaskedMatrix& x, int k, const BaselineOptions& opts = {});

enum class MeanAxis { cols, rows, additive };

ImputationReport mean_impute(const MaskedMatrix& x, MeanAxis axis);

}  // namespace trcm
