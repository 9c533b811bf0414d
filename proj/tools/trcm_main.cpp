#include <trcm/cli.hpp>

#include <CLI11.hpp>

#include <iostream>

namespace {

void add_common(CLI::App* sub, trcm::cli::RunConfig& cfg, std::string& delim) {
  sub->add_option("--input", cfg.input, "Delimited matrix file");
  sub->add_option("--output", cfg.output, "Output path (a .json sidecar is written next to it)")
      ->required();
  sub->add_option("--na-token", cfg.parse.na_token, "Missing-value token")->capture_default_str();
  sub->add_option("--delimiter", delim, "Field delimiter")->capture_default_str();
  sub->add_flag("--header", cfg.parse.header, "First line holds column names");
  sub->add_flag("--row-names", cfg.parse.row_names, "First field of each line is a row name");
  sub->add_flag("--transpose", cfg.transpose, "Solve with n >= p, report in the input orientation");
  sub->add_option("--seed", cfg.seed, "Seed for folds and simulations")->capture_default_str();
  sub->add_option("--folds", cfg.folds, "Cross-validation folds")->capture_default_str();
  sub->add_option("--method", cfg.method,
                  "trcm-onestep | trcm-mcecm | rcm | svd | knn | mean")
      ->capture_default_str();
  sub->add_option("--axis", cfg.axis, "rcm: rows|cols; mean: rows|cols|additive")
      ->capture_default_str();
  sub->add_option("--q-row", cfg.penalty.q_row, "Row penalty type (1 or 2)")->capture_default_str();
  sub->add_option("--q-col", cfg.penalty.q_col, "Column penalty type (1 or 2)")->capture_default_str();
  sub->add_option("--rho-row", cfg.penalty.rho_row, "Row penalty weight")->capture_default_str();
  sub->add_option("--rho-col", cfg.penalty.rho_col, "Column penalty weight")->capture_default_str();
  sub->add_option("--rank", cfg.rank, "SVD rank")->capture_default_str();
  sub->add_option("--k", cfg.k, "KNN neighbors")->capture_default_str();
  sub->add_option("--rho-grid", cfg.rho_grid, "Penalty grid for cross-validation")->delimiter(',');
  sub->add_option("--rank-grid", cfg.rank_grid, "Rank grid for cross-validation")->delimiter(',');
  sub->add_option("--k-grid", cfg.k_grid, "Neighbor grid for cross-validation")->delimiter(',');
  sub->add_option("--truth", cfg.truth, "Complete matrix for scoring the imputed cells");
  sub->add_option("--max-iters", cfg.max_iters, "EM iteration cap")->capture_default_str();
  sub->add_option("--tol", cfg.rel_tol, "EM relative tolerance")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transposable regularized covariance models: estimation and imputation"};
  app.require_subcommand(1);
  trcm::cli::RunConfig cfg;
  std::string delim = ",";
  std::string config_path;

  auto* impute = app.add_subcommand("impute", "Impute missing cells with one method");
  add_common(impute, cfg, delim);
  impute->add_flag("--cv", cfg.cv, "Choose tuning parameters by cross-validation");
  auto* estimate = app.add_subcommand("estimate", "Fit means and covariances");
  add_common(estimate, cfg, delim);
  auto* cv = app.add_subcommand("cv", "Grid search with the per-fold error table");
  add_common(cv, cfg, delim);
  auto* simulate = app.add_subcommand("simulate", "Run a simulation experiment from a spec file");
  simulate->add_option("--spec", cfg.spec, "Experiment spec (JSON)")->required();
  simulate->add_option("--output", cfg.output, "Results table path")->required();
  auto* rerun = app.add_subcommand("rerun", "Re-run the config embedded in a report sidecar");
  rerun->add_option("--config", config_path, "Config file or report sidecar")->required();
  std::string rerun_output;
  rerun->add_option("--output", rerun_output, "Override the output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : trcm::cli::kInputError;
  }

  if (rerun->parsed()) {
    try {
      cfg = trcm::cli::load_config(config_path);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return trcm::cli::kInputError;
    }
    if (!rerun_output.empty()) cfg.output = rerun_output;
  } else {
    cfg.command = app.get_subcommands().front()->get_name();
    if (delim == "\\t" || delim == "tab") delim = "\t";
    if (delim.size() != 1) {
      std::cerr << "error: --delimiter must be a single character\n";
      return trcm::cli::kInputError;
    }
    cfg.parse.delimiter = delim[0];
  }
  return trcm::cli::run(cfg, std::cerr);
}
