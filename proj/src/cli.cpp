#include <trcm/cli.hpp>

#include <trcm/baselines.hpp>
#include <trcm/error.hpp>
#include <trcm/estimation.hpp>
#include <trcm/imputation.hpp>
#include <trcm/linalg.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

namespace trcm::cli {

using nlohmann::json;

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json params_json(const Params& p) {
  json o = json::object();
  for (const auto& [k, v] : p) o[k] = v;
  return o;
}

std::string params_text(const Params& p) {
  std::string s;
  for (const auto& [k, v] : p) {
    if (!s.empty()) s += ';';
    s += k + "=" + format_double(v);
  }
  return s;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
  if (!out) throw InputError("write failed for '" + path + "'");
}

// Typed lookup with a location-bearing error.
template <class T>
void take(const json& j, const char* key, T& dst, std::set<std::string>& used) {
  used.insert(key);
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    dst = it->get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& j, const std::set<std::string>& used, const char* what) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!used.count(it.key())) throw InputError(std::string(what) + ": unknown key '" + it.key() + "'");
  }
}

ImputeOptions impute_options(const RunConfig& cfg) {
  ImputeOptions o;
  o.max_iters = cfg.max_iters;
  o.rel_tol = cfg.rel_tol;
  o.solver.rel_tol = cfg.solver_rel_tol;
  o.solver.glasso_tol = cfg.glasso_tol;
  o.ace.tol = cfg.ace_tol;
  o.estep.ace.tol = cfg.ace_tol;
  return o;
}

MeanAxis mean_axis(const std::string& a) {
  if (a == "cols") return MeanAxis::cols;
  if (a == "rows") return MeanAxis::rows;
  if (a == "additive") return MeanAxis::additive;
  throw InputError("axis must be rows, cols or additive");
}

Axis rcm_axis(const std::string& a) {
  if (a == "cols") return Axis::cols;
  if (a == "rows") return Axis::rows;
  throw InputError("rcm axis must be rows or cols");
}

std::string swap_axis(const std::string& a) {
  if (a == "rows") return "cols";
  if (a == "cols") return "rows";
  return a;
}

struct Prepared {
  LabeledMatrix input;
  MaskedMatrix x;  // oriented for the solver
  RunConfig cfg;   // penalties and axis in solver orientation
  bool transposed = false;
};

Prepared prepare(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  LabeledMatrix in = read_matrix(cfg.input, cfg.parse);
  log << "read " << cfg.input << ": " << in.data.rows() << " x " << in.data.cols() << ", "
      << in.data.missing_count() << " missing (" << in.data.missing_fraction() << ")\n";
  Prepared p{in, in.data, cfg, false};
  if (cfg.transpose && in.data.rows() < in.data.cols()) {
    p.x = in.data.transposed();
    p.transposed = true;
    std::swap(p.cfg.penalty.q_row, p.cfg.penalty.q_col);
    std::swap(p.cfg.penalty.rho_row, p.cfg.penalty.rho_col);
    p.cfg.axis = swap_axis(cfg.axis);
    log << "transposed to " << p.x.rows() << " x " << p.x.cols() << "\n";
  }
  return p;
}

ImputationReport impute_once(const MaskedMatrix& x, const RunConfig& cfg) {
  const ImputeOptions io = impute_options(cfg);
  BaselineOptions bo;
  if (cfg.method == "trcm-onestep") return trcm_impute_onestep(x, cfg.penalty, io);
  if (cfg.method == "trcm-mcecm") return trcm_impute_mcecm(x, cfg.penalty, io);
  if (cfg.method == "rcm") {
    const Axis a = rcm_axis(cfg.axis);
    return a == Axis::rows ? rcm_impute(x, cfg.penalty.rho_row, cfg.penalty.q_row, a, io)
                           : rcm_impute(x, cfg.penalty.rho_col, cfg.penalty.q_col, a, io);
  }
  if (cfg.method == "svd") return svd_impute(x, cfg.rank, bo);
  if (cfg.method == "knn") return knn_impute(x, cfg.k, bo);
  if (cfg.method == "mean") return mean_impute(x, mean_axis(cfg.axis));
  throw InputError("unknown method '" + cfg.method + "'");
}

ExperimentSpec harness_spec(const RunConfig& cfg) {
  ExperimentSpec s;
  s.folds = cfg.folds;
  s.impute = impute_options(cfg);
  return s;
}

MethodSpec method_spec(const RunConfig& cfg) {
  MethodSpec m;
  m.name = cfg.method;
  if (cfg.method == "rcm") m.name = "rcm-" + cfg.axis;
  m.cv = true;
  m.penalty = cfg.penalty;
  m.rank = cfg.rank;
  m.k = cfg.k;
  m.rho_grid = cfg.rho_grid;
  m.rank_grid = cfg.rank_grid;
  m.k_grid = cfg.k_grid;
  return m;
}

// Moves CV-selected tuning values into a config.
RunConfig apply_selection(RunConfig cfg, const ReplicateResult& sel) {
  const Params& p = sel.params;
  if (cfg.method == "trcm-onestep" && (sel.choice == "rcm-cols" || sel.choice == "rcm-rows")) {
    cfg.method = "rcm";
    cfg.axis = sel.choice == "rcm-cols" ? "cols" : "rows";
  }
  if (p.count("rho_row")) cfg.penalty.rho_row = p.at("rho_row");
  if (p.count("rho_col")) cfg.penalty.rho_col = p.at("rho_col");
  if (p.count("rho")) {
    (cfg.axis == "rows" ? cfg.penalty.rho_row : cfg.penalty.rho_col) = p.at("rho");
  }
  if (p.count("rank")) cfg.rank = static_cast<int>(p.at("rank"));
  if (p.count("k")) cfg.k = static_cast<int>(p.at("k"));
  return cfg;
}

// Solver-orientation tuning values back to the caller's orientation.
Params orient(Params p, bool transposed) {
  if (!transposed) return p;
  Params out;
  for (const auto& [k, v] : p) {
    std::string key = k;
    if (k == "rho_row") key = "rho_col";
    else if (k == "rho_col") key = "rho_row";
    else if (k == "q_row") key = "q_col";
    else if (k == "q_col") key = "q_row";
    // One-step tables tag rcm-cols as 0 and rcm-rows as 1.
    out[key] = k == "candidate" && v < 2 ? 1 - v : v;
  }
  return out;
}

std::string orient_choice(const std::string& c, bool transposed) {
  if (!transposed) return c;
  if (c == "rcm-rows") return "rcm-cols";
  if (c == "rcm-cols") return "rcm-rows";
  return c;
}

json report_json(const ImputationReport& rep) {
  json j;
  j["method"] = rep.method;
  j["params"] = params_json(rep.params);
  j["iterations"] = rep.iterations;
  j["converged"] = rep.converged;
  j["initial_objective"] = rep.initial_objective;
  j["objective_trace"] = rep.objective_trace;
  j["notes"] = rep.notes;
  return j;
}

}  // namespace

void RunConfig::validate() const {
  static const std::set<std::string> commands{"impute", "estimate", "cv", "simulate"};
  if (!commands.count(command)) throw InputError("unknown command '" + command + "'");
  if (command == "simulate") {
    if (spec.empty()) throw InputError("simulate needs a spec file");
  } else if (input.empty()) {
    throw InputError("an input path is required");
  }
  if (output.empty()) throw InputError("an output path is required");
  static const std::set<std::string> methods{"trcm-onestep", "trcm-mcecm", "rcm", "svd", "knn", "mean"};
  if (!methods.count(method)) throw InputError("unknown method '" + method + "'");
  penalty.validate();
  if (rank < 1) throw InputError("rank must be >= 1");
  if (k < 1) throw InputError("k must be >= 1");
  if (folds < 2) throw InputError("folds must be >= 2");
  if (max_iters < 1) throw InputError("max_iters must be >= 1");
  for (double t : {rel_tol, solver_rel_tol, glasso_tol, ace_tol}) {
    if (!(t > 0.0)) throw InputError("tolerances must be positive");
  }
  for (double r : rho_grid) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw InputError("rho grid values must be finite and >= 0");
  }
}

json RunConfig::to_json() const {
  json j;
  j["schema"] = kConfigSchema;
  j["command"] = command;
  j["input.path"] = input;
  j["input.na_token"] = parse.na_token;
  j["input.delimiter"] = std::string(1, parse.delimiter);
  j["input.header"] = parse.header;
  j["input.row_names"] = parse.row_names;
  j["output.path"] = output;
  j["truth.path"] = truth;
  j["simulate.spec"] = spec;
  j["method.name"] = method;
  j["method.axis"] = axis;
  j["method.cv"] = cv;
  j["method.rank"] = rank;
  j["method.k"] = k;
  j["penalty.q_row"] = penalty.q_row;
  j["penalty.q_col"] = penalty.q_col;
  j["penalty.rho_row"] = penalty.rho_row;
  j["penalty.rho_col"] = penalty.rho_col;
  j["grid.rho"] = rho_grid;
  j["grid.rank"] = rank_grid;
  j["grid.k"] = k_grid;
  j["run.seed"] = seed;
  j["run.folds"] = folds;
  j["run.transpose"] = transpose;
  j["tol.max_iters"] = max_iters;
  j["tol.rel_tol"] = rel_tol;
  j["tol.solver_rel_tol"] = solver_rel_tol;
  j["tol.glasso_tol"] = glasso_tol;
  j["tol.ace_tol"] = ace_tol;
  return j;
}

RunConfig RunConfig::from_json(const json& raw) {
  if (!raw.is_object()) throw InputError("config must be a JSON object");
  const json& j = raw.contains("config") ? raw.at("config") : raw;
  RunConfig c;
  std::set<std::string> used;
  std::string schema = kConfigSchema;
  take(j, "schema", schema, used);
  if (schema != kConfigSchema) throw InputError("config schema '" + schema + "' is not supported");
  std::string delim(1, c.parse.delimiter);
  take(j, "command", c.command, used);
  take(j, "input.path", c.input, used);
  take(j, "input.na_token", c.parse.na_token, used);
  take(j, "input.delimiter", delim, used);
  take(j, "input.header", c.parse.header, used);
  take(j, "input.row_names", c.parse.row_names, used);
  take(j, "output.path", c.output, used);
  take(j, "truth.path", c.truth, used);
  take(j, "simulate.spec", c.spec, used);
  take(j, "method.name", c.method, used);
  take(j, "method.axis", c.axis, used);
  take(j, "method.cv", c.cv, used);
  take(j, "method.rank", c.rank, used);
  take(j, "method.k", c.k, used);
  take(j, "penalty.q_row", c.penalty.q_row, used);
  take(j, "penalty.q_col", c.penalty.q_col, used);
  take(j, "penalty.rho_row", c.penalty.rho_row, used);
  take(j, "penalty.rho_col", c.penalty.rho_col, used);
  take(j, "grid.rho", c.rho_grid, used);
  take(j, "grid.rank", c.rank_grid, used);
  take(j, "grid.k", c.k_grid, used);
  take(j, "run.seed", c.seed, used);
  take(j, "run.folds", c.folds, used);
  take(j, "run.transpose", c.transpose, used);
  take(j, "tol.max_iters", c.max_iters, used);
  take(j, "tol.rel_tol", c.rel_tol, used);
  take(j, "tol.solver_rel_tol", c.solver_rel_tol, used);
  take(j, "tol.glasso_tol", c.glasso_tol, used);
  take(j, "tol.ace_tol", c.ace_tol, used);
  reject_unknown(j, used, "config");
  if (delim.size() != 1) throw InputError("input.delimiter must be one character");
  c.parse.delimiter = delim[0];
  return c;
}

RunConfig load_config(const std::string& path) { return RunConfig::from_json(read_json(path)); }

ExperimentSpec experiment_from_json(const json& j) {
  if (!j.is_object()) throw InputError("experiment spec must be a JSON object");
  ExperimentSpec s;
  std::set<std::string> used;
  std::string schema = "trcm-experiment/1";
  take(j, "schema", schema, used);
  if (schema != "trcm-experiment/1") throw InputError("experiment schema '" + schema + "' is not supported");
  int row_structure = 0;
  int col_structure = 0;
  std::string noise = "gaussian";
  std::string pattern;
  std::vector<std::string> methods;
  bool method_cv = true;
  PenaltySpec pen;
  int rank = 1;
  int k = 5;
  std::vector<double> rho_grid;
  std::vector<int> rank_grid;
  std::vector<int> k_grid;
  take(j, "n", s.n, used);
  take(j, "p", s.p, used);
  take(j, "row.structure", row_structure, used);
  take(j, "col.structure", col_structure, used);
  take(j, "noise", noise, used);
  take(j, "standardize", s.standardize, used);
  take(j, "mean_scale", s.mean_scale, used);
  take(j, "missing.fraction", s.missing_fraction, used);
  take(j, "missing.pattern", pattern, used);
  take(j, "replicates", s.replicates, used);
  take(j, "seed", s.seed, used);
  take(j, "folds", s.folds, used);
  take(j, "methods", methods, used);
  take(j, "methods.cv", method_cv, used);
  take(j, "penalty.q_row", pen.q_row, used);
  take(j, "penalty.q_col", pen.q_col, used);
  take(j, "penalty.rho_row", pen.rho_row, used);
  take(j, "penalty.rho_col", pen.rho_col, used);
  take(j, "method.rank", rank, used);
  take(j, "method.k", k, used);
  take(j, "grid.rho", rho_grid, used);
  take(j, "grid.rank", rank_grid, used);
  take(j, "grid.k", k_grid, used);
  take(j, "tol.max_iters", s.impute.max_iters, used);
  take(j, "tol.rel_tol", s.impute.rel_tol, used);
  take(j, "tol.solver_rel_tol", s.impute.solver.rel_tol, used);
  take(j, "tol.glasso_tol", s.impute.solver.glasso_tol, used);
  take(j, "tol.ace_tol", s.impute.ace.tol, used);
  reject_unknown(j, used, "experiment spec");
  s.impute.estep.ace.tol = s.impute.ace.tol;

  s.row = numbered_structure(row_structure, true, s.n);
  s.col = numbered_structure(col_structure, false, s.p);
  if (noise == "gaussian") s.noise = ExperimentSpec::Noise::gaussian;
  else if (noise == "chisq3") s.noise = ExperimentSpec::Noise::chisq3;
  else if (noise == "poisson3") s.noise = ExperimentSpec::Noise::poisson3;
  else if (noise == "none") s.noise = ExperimentSpec::Noise::none;
  else throw InputError("noise must be gaussian, chisq3, poisson3 or none");
  if (!pattern.empty()) s.pattern = read_matrix(pattern, ParseOptions{}).data;
  if (methods.empty()) throw InputError("experiment spec lists no methods");
  for (const std::string& entry : methods) {
    // name or name:Lq:Lq
    MethodSpec m;
    m.cv = method_cv;
    m.penalty = pen;
    m.rank = rank;
    m.k = k;
    m.rho_grid = rho_grid;
    m.rank_grid = rank_grid;
    m.k_grid = k_grid;
    const auto colon = entry.find(':');
    m.name = entry.substr(0, colon);
    if (colon != std::string::npos) {
      const std::string types = entry.substr(colon + 1);
      if (types.size() != 5 || types[0] != 'L' || types[2] != ':' || types[3] != 'L') {
        throw InputError("method '" + entry + "': penalty suffix must look like L2:L1");
      }
      m.penalty.q_row = types[1] - '0';
      m.penalty.q_col = types[4] - '0';
    }
    s.methods.push_back(std::move(m));
  }
  s.validate();
  return s;
}

ExperimentSpec load_experiment(const std::string& path) { return experiment_from_json(read_json(path)); }

int cmd_impute(const RunConfig& cfg, std::ostream& log) {
  const Prepared prep = prepare(cfg, log);
  RunConfig run = prep.cfg;
  json side;
  side["schema"] = kReportSchema;
  side["command"] = "impute";
  side["config"] = cfg.to_json();
  side["transposed"] = prep.transposed;
  side["rows"] = prep.input.data.rows();
  side["cols"] = prep.input.data.cols();
  side["missing_fraction"] = prep.input.data.missing_fraction();

  int code = kOk;
  std::optional<ImputationReport> rep;
  try {
    if (cfg.cv && cfg.method != "mean") {
      const ReplicateResult sel = run_method(prep.x, method_spec(run), harness_spec(run), cfg.seed);
      side["cv"] = {{"params", params_json(orient(sel.params, prep.transposed))},
                    {"choice", orient_choice(sel.choice, prep.transposed)}};
      run = apply_selection(run, sel);
    }
    rep = impute_once(prep.x, run);
    if (!rep->converged) code = kConvergenceFailure;
  } catch (const ConvergenceError& e) {
    code = kConvergenceFailure;
    side["error"] = e.what();
  }
  side["status"] = code == kOk ? "ok" : "convergence_failure";
  if (rep) {
    Matrix completed = prep.transposed ? Matrix(rep->completed.transpose()) : rep->completed;
    side["report"] = report_json(*rep);
    if (!cfg.truth.empty()) {
      const LabeledMatrix truth = read_matrix(cfg.truth, cfg.parse);
      if (!truth.data.complete()) throw InputError("truth matrix has missing cells");
      const Score s = score(completed, truth.data.values(), prep.input.data);
      side["metrics"] = {{"mse", s.mse}, {"rmse", s.rmse}, {"cells", s.abs_errors.size()}};
    }
    save_matrix(cfg.output, completed, cfg.parse, prep.input.col_names, prep.input.row_names);
  }
  write_json(cfg.output + ".json", side);
  log << "wrote " << cfg.output << " (" << side["status"].get<std::string>() << ")\n";
  return code;
}

int cmd_estimate(const RunConfig& cfg, std::ostream& log) {
  const Prepared prep = prepare(cfg, log);
  const RunConfig& run = prep.cfg;
  const ImputeOptions io = impute_options(run);
  const MeanFit mf = estimate_means(prep.x, io.solver);
  Matrix filled = prep.x.filled(mf.params.matrix());
  const Matrix centered = filled - mf.params.matrix();

  json side;
  side["schema"] = kReportSchema;
  side["command"] = "estimate";
  side["config"] = cfg.to_json();
  side["transposed"] = prep.transposed;
  side["mean_filled"] = !prep.x.complete();
  int code = kOk;
  std::optional<CovParams> covs;
  try {
    if (run.penalty.l2l2()) {
      L2L2Fit fit = trcm_l2l2(centered, run.penalty.rho_row, run.penalty.rho_col);
      side["spectrum"] = {{"singular_values", vector_json(fit.spectrum.d)},
                          {"rank", fit.spectrum.rank},
                          {"sigma_eigenvalues", vector_json(fit.spectrum.beta)},
                          {"delta_eigenvalues", vector_json(fit.spectrum.theta)}};
      covs.emplace(fit.covs);
    } else {
      CoordwiseFit fit = trcm_coordwise(centered, run.penalty, io.solver);
      side["cycles"] = fit.cycles;
      side["objective_trace"] = fit.trace;
      if (!fit.converged) code = kConvergenceFailure;
      covs.emplace(fit.covs);
      side["spectrum"] = {
          {"sigma_eigenvalues", vector_json(linalg::eigen_symmetric(covs->sigma()).values)},
          {"delta_eigenvalues", vector_json(linalg::eigen_symmetric(covs->delta()).values)}};
    }
  } catch (const ConvergenceError& e) {
    code = kConvergenceFailure;
    side["error"] = e.what();
  }
  side["status"] = code == kOk ? "ok" : "convergence_failure";
  if (covs) {
    const auto [gr, gc] = stationarity_residual(*covs, centered, run.penalty);
    side["objective"] = centered_objective(centered, *covs, run.penalty);
    side["stationarity"] = {{"row", gr}, {"col", gc}};
    MeanParams means = mf.params;
    Matrix sigma = covs->sigma();
    Matrix delta = covs->delta();
    if (prep.transposed) {
      means = MeanParams(means.mu, means.nu).canonical();
      std::swap(sigma, delta);
    }
    side["means"] = {{"row", vector_json(means.nu)}, {"col", vector_json(means.mu)}};
    side["sigma"] = matrix_json(sigma);
    side["delta"] = matrix_json(delta);
  }
  write_json(cfg.output, side);
  log << "wrote " << cfg.output << "\n";
  return code;
}

int cmd_cv(const RunConfig& cfg, std::ostream& log) {
  const Prepared prep = prepare(cfg, log);
  const RunConfig& run = prep.cfg;
  const ImputeOptions io = impute_options(run);
  const std::vector<double> rhos = run.rho_grid.empty() ? log_grid(-2.0, 2.0, 9) : run.rho_grid;
  std::vector<CvRow> table;
  Params best;
  std::string choice;
  if (run.method == "trcm-onestep") {
    OnestepSelection sel = select_onestep_model(
        prep.x, penalty_grid(run.penalty.q_row, run.penalty.q_col, rhos), run.folds, run.seed, io);
    table = sel.table;
    choice = sel.choice;
    best = {{"rho_row", sel.penalty.rho_row}, {"rho_col", sel.penalty.rho_col}};
  } else {
    std::vector<Params> grid;
    Imputer imp;
    if (run.method == "svd") {
      std::vector<int> ranks = run.rank_grid;
      if (ranks.empty()) {
        for (int r = 1; r <= std::min<Index>(10, std::min(prep.x.rows(), prep.x.cols())); ++r) {
          ranks.push_back(r);
        }
      }
      for (int r : ranks) grid.push_back({{"rank", r}});
      imp = [](const MaskedMatrix& y, const Params& p) {
        return svd_impute(y, static_cast<int>(p.at("rank"))).completed;
      };
    } else if (run.method == "knn") {
      for (int k : run.k_grid.empty() ? std::vector<int>{1, 3, 5, 10, 15} : run.k_grid) {
        if (k < prep.x.rows()) grid.push_back({{"k", k}});
      }
      imp = [](const MaskedMatrix& y, const Params& p) {
        return knn_impute(y, static_cast<int>(p.at("k"))).completed;
      };
    } else if (run.method == "rcm") {
      const Axis a = rcm_axis(run.axis);
      const int q = a == Axis::rows ? run.penalty.q_row : run.penalty.q_col;
      for (double r : rhos) grid.push_back({{"rho", r}});
      imp = [a, q, io](const MaskedMatrix& y, const Params& p) {
        return rcm_impute(y, p.at("rho"), q, a, io).completed;
      };
    } else if (run.method == "trcm-mcecm") {
      for (const PenaltySpec& pen : penalty_grid(run.penalty.q_row, run.penalty.q_col, rhos)) {
        grid.push_back({{"rho_row", pen.rho_row}, {"rho_col", pen.rho_col}});
      }
      const PenaltySpec base = run.penalty;
      imp = [base, io](const MaskedMatrix& y, const Params& p) {
        PenaltySpec pen = base;
        pen.rho_row = p.at("rho_row");
        pen.rho_col = p.at("rho_col");
        return trcm_impute_mcecm(y, pen, io).completed;
      };
    } else {
      throw InputError("cv does not apply to method '" + run.method + "'");
    }
    if (grid.empty()) throw InputError("cv grid is empty");
    const CvResult res = cross_validate(prep.x, imp, grid, run.folds, run.seed);
    table = res.table;
    best = res.best;
  }

  std::ofstream out(cfg.output);
  if (!out) throw InputError("cannot write '" + cfg.output + "'");
  out << "index,params,mean_error";
  for (int f = 1; f <= run.folds; ++f) out << ",fold_" << f;
  out << ",failure\n";
  json rows = json::array();
  for (std::size_t g = 0; g < table.size(); ++g) {
    const Params shown = orient(table[g].params, prep.transposed);
    out << g << ',' << params_text(shown) << ',' << format_double(table[g].mean_error);
    for (double e : table[g].fold_errors) out << ',' << format_double(e);
    out << ',' << '"' << table[g].failure << '"' << '\n';
    rows.push_back({{"params", params_json(shown)},
                    {"mean_error", table[g].mean_error},
                    {"fold_errors", table[g].fold_errors}});
  }
  json side;
  side["schema"] = kReportSchema;
  side["command"] = "cv";
  side["config"] = cfg.to_json();
  side["transposed"] = prep.transposed;
  side["best"] = params_json(orient(best, prep.transposed));
  if (!choice.empty()) side["choice"] = orient_choice(choice, prep.transposed);
  side["table"] = rows;
  side["status"] = "ok";
  write_json(cfg.output + ".json", side);
  log << "wrote " << cfg.output << "\n";
  return kOk;
}

int cmd_simulate(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const ExperimentSpec spec = load_experiment(cfg.spec);
  log << "simulating " << spec.replicates << " replicates of " << spec.n << " x " << spec.p << "\n";
  const ExperimentResult res = run_experiment(spec);

  std::ofstream out(cfg.output);
  if (!out) throw InputError("cannot write '" + cfg.output + "'");
  out << "replicate,method,mse,rmse,choice,params,failed,message\n";
  json rows = json::array();
  bool any_failed = false;
  for (const ReplicateResult& r : res.rows) {
    out << r.replicate << ',' << r.method << ',' << format_double(r.mse) << ','
        << format_double(r.rmse) << ',' << r.choice << ',' << params_text(r.params) << ','
        << (r.failed ? 1 : 0) << ',' << '"' << r.message << '"' << '\n';
    any_failed = any_failed || r.failed;
    rows.push_back({{"replicate", r.replicate}, {"method", r.method}, {"mse", r.mse},
                    {"choice", r.choice}, {"params", params_json(r.params)},
                    {"failed", r.failed}, {"message", r.message}});
  }
  json summary = json::array();
  for (const MethodSummary& s : res.summary) {
    out << "aggregate," << s.method << ',' << format_double(s.mean_mse) << ','
        << format_double(s.se) << ",,,"<< s.failed << ",\n";
    json choices = json::object();
    for (const auto& [c, n] : s.choices) choices[c] = n;
    summary.push_back({{"method", s.method}, {"mean_mse", s.mean_mse}, {"se", s.se},
                       {"succeeded", s.succeeded}, {"failed", s.failed}, {"choices", choices}});
  }
  json side;
  side["schema"] = kReportSchema;
  side["command"] = "simulate";
  side["config"] = cfg.to_json();
  side["experiment"] = read_json(cfg.spec);
  side["summary"] = summary;
  side["replicates"] = rows;
  side["status"] = any_failed ? "convergence_failure" : "ok";
  write_json(cfg.output + ".json", side);
  log << "wrote " << cfg.output << "\n";
  return any_failed ? kConvergenceFailure : kOk;
}

int run(const RunConfig& cfg, std::ostream& log) {
  try {
    if (cfg.command == "impute") return cmd_impute(cfg, log);
    if (cfg.command == "estimate") return cmd_estimate(cfg, log);
    if (cfg.command == "cv") return cmd_cv(cfg, log);
    if (cfg.command == "simulate") return cmd_simulate(cfg, log);
    throw InputError("unknown command '" + cfg.command + "'");
  } catch (const InputError& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ConvergenceError& e) {
    log << "convergence failure: " << e.what() << "\n";
    return kConvergenceFailure;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << "\n";
    return kConvergenceFailure;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return kInputError;
  }
}

}  // namespace trcm::cli
