#pragma once

#include <trcm/conditional.hpp>
#include <trcm/estimation.hpp>
#include <trcm/masked_matrix.hpp>
#include <trcm/model.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace trcm {

struct ImputationReport {
  std::string method;
  Matrix completed;
  std::optional<TrcmModel> model;
  /// Objective before the first iteration (NaN when not tracked).
  double initial_objective = 0.0;
  /// One entry per iteration; size() == iterations.
  std::vector<double> objective_trace;
  int iterations = 0;
  bool converged = true;
  std::map<std::string, double> params;
  /// Alternative completions (the one-step method keeps its marginal ones).
  std::map<std::string, Matrix> candidates;
  std::vector<std::string> notes;
};

enum class Axis { rows, cols };

struct ImputeOptions {
  int max_iters = 200;
  double rel_tol = 1e-6;
  SolverOptions solver;
  EStepOptions estep{EStepOptions::Mean::joint, EStepOptions::Covariance::structured, 2000,
                     kDefaultVecCap, {}};
  AceOptions ace;
  /// Start MCECM from the penalized MLE of the mean-filled matrix; identity
  /// covariances otherwise.
  bool mle_init = true;
  /// Mean re-estimation inside the CM steps: likelihood-weighted (exact
  /// conditional maximizer) or plain row/column centering of the completion.
  enum class MeanUpdate { weighted, centering };
  MeanUpdate mean_update = MeanUpdate::weighted;
  /// Relative slack used when flagging objective decreases in notes.
  double monotone_slack = 1e-9;
};

/// Multivariate EM imputation with a penalized covariance M-step.
/// axis = cols: rows are iid N(mu, Delta) and Delta is penalized (Sigma = I);
/// axis = rows: the transposed problem.
ImputationReport rcm_impute(const MaskedMatrix& x, double rho, int q, Axis axis,
                            const ImputeOptions& opts = {});

/// Multi-cycle ECM: E-step, CM over Delta^-1, E-step, CM over Sigma^-1,
/// repeated until the observed penalized log-likelihood settles.
ImputationReport trcm_impute_mcecm(const MaskedMatrix& x, const PenaltySpec& pen,
                                   const ImputeOptions& opts = {});

/// One-step approximation: average the two marginal completions, fit the
/// transposable model to that fixed matrix, then take conditional
/// expectations under the fit with alternating sweeps.
ImputationReport trcm_impute_onestep(const MaskedMatrix& x, const PenaltySpec& pen,
                                     const ImputeOptions& opts = {});

/// Steps two and three of the one-step method given the marginal completions
/// (lets callers reuse marginal fits across penalty grids).
ImputationReport onestep_from_marginals(const MaskedMatrix& x, const Matrix& cols_completion,
                                        const Matrix& rows_completion, const PenaltySpec& pen,
                                        const ImputeOptions& opts = {});

}  // namespace trcm
