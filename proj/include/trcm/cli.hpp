#pragma once

#include <trcm/evalsim.hpp>
#include <trcm/io.hpp>
#include <trcm/model.hpp>

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace trcm::cli {

inline constexpr const char* kReportSchema = "trcm-report/1";
inline constexpr const char* kConfigSchema = "trcm-config/1";

enum ExitCode { kOk = 0, kInputError = 1, kConvergenceFailure = 2 };

struct RunConfig {
  std::string command = "impute";  // impute | estimate | cv | simulate
  std::string input;
  std::string output;
  std::string truth;
  std::string spec;  // experiment spec for simulate

  /// trcm-onestep, trcm-mcecm, rcm, svd, knn or mean.
  std::string method = "trcm-onestep";
  std::string axis = "cols";  // rcm: rows | cols; mean: rows | cols | additive
  bool cv = false;
  PenaltySpec penalty;
  int rank = 1;
  int k = 5;
  std::vector<double> rho_grid;
  std::vector<int> rank_grid;
  std::vector<int> k_grid;

  ParseOptions parse;
  std::uint64_t seed = 1;
  int folds = 5;
  bool transpose = false;

  int max_iters = 200;
  double rel_tol = 1e-6;
  double solver_rel_tol = 1e-8;
  double glasso_tol = 1e-6;
  double ace_tol = 1e-8;

  void validate() const;
  /// Flat object with dotted keys and a schema tag.
  nlohmann::json to_json() const;
  /// Accepts a flat config or a report sidecar (uses its "config" member).
  /// Unknown keys are errors; absent keys keep their defaults.
  static RunConfig from_json(const nlohmann::json& j);
};

RunConfig load_config(const std::string& path);

/// Flat dotted-key experiment description (see README for the keys).
ExperimentSpec experiment_from_json(const nlohmann::json& j);
ExperimentSpec load_experiment(const std::string& path);

int cmd_impute(const RunConfig& cfg, std::ostream& log);
int cmd_estimate(const RunConfig& cfg, std::ostream& log);
int cmd_cv(const RunConfig& cfg, std::ostream& log);
int cmd_simulate(const RunConfig& cfg, std::ostream& log);

/// Dispatches on cfg.command and maps exceptions to exit codes.
int run(const RunConfig& cfg, std::ostream& log);

}  // namespace trcm::cli
