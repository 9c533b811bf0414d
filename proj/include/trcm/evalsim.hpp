#pragma once

#include <trcm/baselines.hpp>
#include <trcm/imputation.hpp>
#include <trcm/masked_matrix.hpp>
#include <trcm/model.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trcm {

struct CovStructure {
  enum class Kind { identity, autoregressive, equal_offdiag, blocked, banded };
  Kind kind = Kind::identity;
  Index dim = 1;
  /// AR base, common off-diagonal, within-block value or band value.
  double value = 0.0;
  Index block = 5;
};

/// Structure 0..4 (identity, AR, equal, blocked, banded), row (Sigma) or column (Delta) flavor.
CovStructure numbered_structure(int number, bool row_side, Index dim);

Matrix gen_covariance(const CovStructure& spec);

/// Derives an independent stream seed from a master seed and indices.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

/// Masks exactly floor(fraction * n * p) cells uniformly without replacement.
MaskedMatrix inject_mcar(const Matrix& x, double fraction, std::uint64_t seed);

/// Each row takes the missingness footprint of a uniformly drawn template row
/// that has at least one observed cell.
MaskedMatrix inject_pattern(const Matrix& x, const MaskedMatrix& tmpl, std::uint64_t seed);

struct Score {
  double mse = 0.0;
  double rmse = 0.0;
  /// Column-major order over held-out cells.
  std::vector<double> abs_errors;
};

Score score(const Matrix& completed, const Matrix& truth, const BoolMatrix& held_out);
/// Held-out cells are the missing cells of x.
Score score(const Matrix& completed, const Matrix& truth, const MaskedMatrix& x);

using Params = std::map<std::string, double>;
using Imputer = std::function<Matrix(const MaskedMatrix&, const Params&)>;

/// Entry-wise fold masks (true = held out) over the observed cells of x.
/// Folds are disjoint and cover every observed cell; partitions leaving an
/// empty row or column are redrawn.
std::vector<BoolMatrix> make_folds(const MaskedMatrix& x, int folds, std::uint64_t seed);

struct CvRow {
  Params params;
  std::vector<double> fold_errors;
  double mean_error = 0.0;
  std::string failure;
};

struct CvResult {
  std::size_t best_index = 0;
  Params best;
  std::vector<CvRow> table;
};

/// Grid order encodes preference: the earliest grid point wins ties, so list
/// simpler models first. Grid points whose imputer throws score +inf.
CvResult cross_validate(const MaskedMatrix& x, const Imputer& method,
                        const std::vector<Params>& grid, int folds, std::uint64_t seed);

/// Picks the lowest mean error, earliest on ties.
std::size_t argmin_error(const std::vector<CvRow>& table);

struct OnestepSelection {
  std::string choice;  // rcm-cols, rcm-rows or trcm
  PenaltySpec penalty;
  /// Rows tagged by params["candidate"]: 0 rcm-cols, 1 rcm-rows, 2 trcm.
  std::vector<CvRow> table;
  ImputationReport report;
};

/// Cross-validates the three one-step candidates together, reusing marginal
/// fits across the penalty grid, then refits the winner on all of x.
/// The grid must share q_row and q_col.
OnestepSelection select_onestep_model(const MaskedMatrix& x, const std::vector<PenaltySpec>& grid,
                                      int folds, std::uint64_t seed,
                                      const ImputeOptions& opts = {});

/// Log-spaced from 10^lo to 10^hi, largest first.
std::vector<double> log_grid(double lo, double hi, int points);

/// Square penalty grid over rho_grid x rho_grid with fixed penalty types.
std::vector<PenaltySpec> penalty_grid(int q_row, int q_col, const std::vector<double>& rho_grid);

struct MethodSpec {
  /// trcm-onestep, trcm-mcecm, rcm-rows, rcm-cols, svd, knn, mean-cols,
  /// mean-rows or mean-additive.
  std::string name;
  /// Select tuning parameters by cross-validation; otherwise use the fixed ones.
  bool cv = true;
  PenaltySpec penalty;
  int rank = 1;
  int k = 5;
  std::vector<double> rho_grid;   // empty: log_grid(-2, 2, 9)
  std::vector<int> rank_grid;     // empty: 1..min(10, n, p)
  std::vector<int> k_grid;        // empty: {1, 3, 5, 10, 15} below n

  std::string label() const;
};

struct ExperimentSpec {
  Index n = 50;
  Index p = 50;
  CovStructure row{CovStructure::Kind::identity, 50, 0.0, 5};
  CovStructure col{CovStructure::Kind::identity, 50, 0.0, 5};
  enum class Noise { gaussian, chisq3, poisson3, none };
  Noise noise = Noise::gaussian;
  /// Rescale non-Gaussian draws to mean 0, variance 1.
  bool standardize = false;
  /// Spread of the additive truth mean: nu, mu ~ N(0, mean_scale^2).
  double mean_scale = 0.0;
  double missing_fraction = 0.25;
  std::optional<MaskedMatrix> pattern;
  int replicates = 1;
  std::uint64_t seed = 1;
  int folds = 5;
  std::vector<MethodSpec> methods;
  ImputeOptions impute;
  BaselineOptions baseline;

  void validate() const;
};

struct ReplicateResult {
  int replicate = 0;
  std::string method;
  double mse = 0.0;
  double rmse = 0.0;
  Params params;
  std::string choice;
  bool failed = false;
  std::string message;
  double seconds = 0.0;
};

struct MethodSummary {
  std::string method;
  double mean_mse = 0.0;
  double se = 0.0;
  int succeeded = 0;
  int failed = 0;
  std::map<std::string, int> choices;
};

struct ExperimentResult {
  std::vector<ReplicateResult> rows;  // replicate-major, then method order
  std::vector<MethodSummary> summary;
};

/// Truth matrix for one replicate.
Matrix simulate_truth(const ExperimentSpec& spec, std::uint64_t seed);

/// Runs one method (with CV when requested) on x; score not included.
ReplicateResult run_method(const MaskedMatrix& x, const MethodSpec& method,
                           const ExperimentSpec& spec, std::uint64_t seed,
                           Matrix* completed = nullptr);

ExperimentResult run_experiment(const ExperimentSpec& spec);

/// Mean and standard error (sample SD / sqrt(count)) over finite values.
std::pair<double, double> mean_se(const std::vector<double>& values);

}  // namespace trcm
