#include <trcm/evalsim.hpp>

#include <trcm/error.hpp>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/poisson.hpp>

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

namespace trcm {

CovStructure numbered_structure(int number, bool row_side, Index dim) {
  using K = CovStructure::Kind;
  const double strong = row_side ? 0.8 : 0.6;
  switch (number) {
    case 0: return {K::identity, dim, 0.0, 5};
    case 1: return {K::autoregressive, dim, strong, 5};
    case 2: return {K::equal_offdiag, dim, 0.5, 5};
    case 3: return {K::blocked, dim, strong, 5};
    case 4: return {K::banded, dim, strong, 5};
    default: throw InputError("covariance structure number must be 0..4");
  }
}

Matrix gen_covariance(const CovStructure& spec) {
  using K = CovStructure::Kind;
  if (spec.dim < 1) throw InputError("gen_covariance: dimension must be positive");
  if (spec.block < 1) throw InputError("gen_covariance: block size must be positive");
  const Index d = spec.dim;
  Matrix s = Matrix::Identity(d, d);
  for (Index i = 0; i < d; ++i) {
    for (Index j = 0; j < d; ++j) {
      if (i == j) continue;
      const Index lag = i > j ? i - j : j - i;
      switch (spec.kind) {
        case K::identity: break;
        case K::autoregressive: s(i, j) = std::pow(spec.value, static_cast<double>(lag)); break;
        case K::equal_offdiag: s(i, j) = spec.value; break;
        case K::blocked: s(i, j) = (i / spec.block == j / spec.block) ? spec.value : 0.0; break;
        case K::banded: s(i, j) = (lag % spec.block == 0) ? spec.value : 0.0; break;
      }
    }
  }
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) throw NumericalError("gen_covariance: matrix is not positive definite");
  return s;
}

std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(master),
                                   static_cast<std::uint32_t>(master >> 32)};
  for (std::uint64_t v : path) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

namespace {

bool mask_valid(const BoolMatrix& observed) {
  return (observed.rowwise().count().array() > 0).all() &&
         (observed.colwise().count().array() > 0).all();
}

constexpr int kRetries = 100;

}  // namespace

MaskedMatrix inject_mcar(const Matrix& x, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw InputError("inject_mcar: fraction must be in [0, 1)");
  const Index total = x.size();
  const auto drop = static_cast<Index>(std::floor(fraction * static_cast<double>(total)));
  std::vector<Index> cells(static_cast<std::size_t>(total));
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    std::iota(cells.begin(), cells.end(), Index{0});
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(attempt)}));
    std::shuffle(cells.begin(), cells.end(), rng);
    BoolMatrix observed = BoolMatrix::Constant(x.rows(), x.cols(), true);
    for (Index k = 0; k < drop; ++k) observed(cells[static_cast<std::size_t>(k)]) = false;
    if (mask_valid(observed)) return MaskedMatrix(x, observed);
  }
  throw InputError("inject_mcar: could not place " + std::to_string(drop) +
                   " missing cells without emptying a row or column");
}

MaskedMatrix inject_pattern(const Matrix& x, const MaskedMatrix& tmpl, std::uint64_t seed) {
  if (tmpl.cols() != x.cols()) throw InputError("inject_pattern: template column count differs");
  // Every template row has an observed cell by MaskedMatrix's invariant.
  std::uniform_int_distribution<Index> pick(0, tmpl.rows() - 1);
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(attempt)}));
    BoolMatrix observed(x.rows(), x.cols());
    for (Index i = 0; i < x.rows(); ++i) observed.row(i) = tmpl.mask().row(pick(rng));
    if (mask_valid(observed)) return MaskedMatrix(x, observed);
  }
  throw InputError("inject_pattern: every draw left a column fully missing");
}

Score score(const Matrix& completed, const Matrix& truth, const BoolMatrix& held_out) {
  if (completed.rows() != truth.rows() || completed.cols() != truth.cols() ||
      held_out.rows() != truth.rows() || held_out.cols() != truth.cols()) {
    throw InputError("score: dimension mismatch");
  }
  Score s;
  double acc = 0.0;
  for (Index j = 0; j < truth.cols(); ++j) {
    for (Index i = 0; i < truth.rows(); ++i) {
      if (!held_out(i, j)) continue;
      const double e = completed(i, j) - truth(i, j);
      acc += e * e;
      s.abs_errors.push_back(std::abs(e));
    }
  }
  if (s.abs_errors.empty()) throw InputError("score: no held-out cells");
  s.mse = acc / static_cast<double>(s.abs_errors.size());
  s.rmse = std::sqrt(s.mse);
  return s;
}

Score score(const Matrix& completed, const Matrix& truth, const MaskedMatrix& x) {
  return score(completed, truth, BoolMatrix(!x.mask()));
}

std::vector<BoolMatrix> make_folds(const MaskedMatrix& x, int folds, std::uint64_t seed) {
  if (folds < 2) throw InputError("cross-validation needs at least 2 folds");
  std::vector<Index> cells;
  for (Index k = 0; k < x.values().size(); ++k) {
    if (x.mask()(k)) cells.push_back(k);
  }
  if (cells.size() < static_cast<std::size_t>(folds)) throw InputError("fewer observed cells than folds");
  for (int attempt = 0; attempt < kRetries; ++attempt) {
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(attempt)}));
    std::vector<Index> order = cells;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<BoolMatrix> out(static_cast<std::size_t>(folds),
                                BoolMatrix::Constant(x.rows(), x.cols(), false));
    for (std::size_t k = 0; k < order.size(); ++k) out[k % out.size()](order[k]) = true;
    bool ok = true;
    for (const BoolMatrix& f : out) ok = ok && mask_valid(x.mask() && !f);
    if (ok) return out;
  }
  throw InputError("cross-validation: every fold partition emptied a row or column");
}

std::size_t argmin_error(const std::vector<CvRow>& table) {
  std::size_t best = 0;
  for (std::size_t g = 1; g < table.size(); ++g) {
    if (table[g].mean_error < table[best].mean_error) best = g;
  }
  return best;
}

namespace {

double fold_error(const Matrix& completed, const Matrix& values, const BoolMatrix& fold) {
  return score(completed, values, fold).mse;
}

void finish_row(CvRow& row) {
  double acc = 0.0;
  for (double e : row.fold_errors) acc += e;
  row.mean_error = acc / static_cast<double>(row.fold_errors.size());
  if (std::isnan(row.mean_error)) row.mean_error = std::numeric_limits<double>::infinity();
}

template <class F>
double guarded(F&& f, std::string& failure) {
  try {
    return f();
  } catch (const InputError&) {
    throw;
  } catch (const std::exception& e) {
    if (failure.empty()) failure = e.what();
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace

CvResult cross_validate(const MaskedMatrix& x, const Imputer& method,
                        const std::vector<Params>& grid, int folds, std::uint64_t seed) {
  if (grid.empty()) throw InputError("cross_validate: grid is empty");
  const std::vector<BoolMatrix> masks = make_folds(x, folds, seed);
  CvResult res;
  res.table.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) res.table[g].params = grid[g];
  for (const BoolMatrix& f : masks) {
    const MaskedMatrix xf = x.hide(f);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      CvRow& row = res.table[g];
      row.fold_errors.push_back(
          guarded([&] { return fold_error(method(xf, grid[g]), x.values(), f); }, row.failure));
    }
  }
  for (CvRow& row : res.table) finish_row(row);
  res.best_index = argmin_error(res.table);
  res.best = grid[res.best_index];
  return res;
}

std::vector<double> log_grid(double lo, double hi, int points) {
  if (points < 1) throw InputError("log_grid: need at least one point");
  std::vector<double> g;
  for (int k = points - 1; k >= 0; --k) {
    const double e = points == 1 ? hi : lo + (hi - lo) * k / (points - 1);
    g.push_back(std::pow(10.0, e));
  }
  return g;
}

std::vector<PenaltySpec> penalty_grid(int q_row, int q_col, const std::vector<double>& rho_grid) {
  std::vector<PenaltySpec> out;
  for (double r : rho_grid) {
    for (double c : rho_grid) out.push_back(PenaltySpec{q_row, q_col, r, c});
  }
  return out;
}

OnestepSelection select_onestep_model(const MaskedMatrix& x, const std::vector<PenaltySpec>& grid,
                                      int folds, std::uint64_t seed, const ImputeOptions& opts) {
  if (grid.empty()) throw InputError("select_onestep_model: grid is empty");
  for (const PenaltySpec& pen : grid) {
    pen.validate();
    if (pen.q_row != grid[0].q_row || pen.q_col != grid[0].q_col) {
      throw InputError("select_onestep_model: grid mixes penalty types");
    }
  }
  const int q_row = grid[0].q_row;
  const int q_col = grid[0].q_col;
  // Distinct marginal penalties in first-appearance order.
  std::vector<double> col_rhos;
  std::vector<double> row_rhos;
  for (const PenaltySpec& pen : grid) {
    if (std::find(col_rhos.begin(), col_rhos.end(), pen.rho_col) == col_rhos.end()) {
      col_rhos.push_back(pen.rho_col);
    }
    if (std::find(row_rhos.begin(), row_rhos.end(), pen.rho_row) == row_rhos.end()) {
      row_rhos.push_back(pen.rho_row);
    }
  }
  auto index_of = [](const std::vector<double>& v, double r) {
    return static_cast<std::size_t>(std::find(v.begin(), v.end(), r) - v.begin());
  };

  std::vector<CvRow> cols_rows(col_rhos.size());
  std::vector<CvRow> rows_rows(row_rhos.size());
  std::vector<CvRow> trcm_rows(grid.size());
  for (std::size_t a = 0; a < col_rhos.size(); ++a) {
    cols_rows[a].params = {{"candidate", 0}, {"rho_col", col_rhos[a]}, {"q_col", q_col}};
  }
  for (std::size_t a = 0; a < row_rhos.size(); ++a) {
    rows_rows[a].params = {{"candidate", 1}, {"rho_row", row_rhos[a]}, {"q_row", q_row}};
  }
  for (std::size_t g = 0; g < grid.size(); ++g) {
    trcm_rows[g].params = {{"candidate", 2},           {"rho_row", grid[g].rho_row},
                           {"rho_col", grid[g].rho_col}, {"q_row", q_row},
                           {"q_col", q_col}};
  }

  const std::vector<BoolMatrix> masks = make_folds(x, folds, seed);
  for (const BoolMatrix& f : masks) {
    const MaskedMatrix xf = x.hide(f);
    std::vector<std::optional<Matrix>> cols_fit(col_rhos.size());
    std::vector<std::optional<Matrix>> rows_fit(row_rhos.size());
    for (std::size_t a = 0; a < col_rhos.size(); ++a) {
      cols_rows[a].fold_errors.push_back(guarded(
          [&] {
            cols_fit[a] = rcm_impute(xf, col_rhos[a], q_col, Axis::cols, opts).completed;
            return fold_error(*cols_fit[a], x.values(), f);
          },
          cols_rows[a].failure));
    }
    for (std::size_t a = 0; a < row_rhos.size(); ++a) {
      rows_rows[a].fold_errors.push_back(guarded(
          [&] {
            rows_fit[a] = rcm_impute(xf, row_rhos[a], q_row, Axis::rows, opts).completed;
            return fold_error(*rows_fit[a], x.values(), f);
          },
          rows_rows[a].failure));
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const auto& cf = cols_fit[index_of(col_rhos, grid[g].rho_col)];
      const auto& rf = rows_fit[index_of(row_rhos, grid[g].rho_row)];
      trcm_rows[g].fold_errors.push_back(guarded(
          [&] {
            if (!cf || !rf) throw NumericalError("marginal fit failed");
            return fold_error(onestep_from_marginals(xf, *cf, *rf, grid[g], opts).completed,
                              x.values(), f);
          },
          trcm_rows[g].failure));
    }
  }

  OnestepSelection sel;
  for (auto* block : {&cols_rows, &rows_rows, &trcm_rows}) {
    for (CvRow& row : *block) {
      finish_row(row);
      sel.table.push_back(row);
    }
  }
  const std::size_t bc = argmin_error(cols_rows);
  const std::size_t br = argmin_error(rows_rows);
  const std::size_t bt = argmin_error(trcm_rows);
  const double ec = cols_rows[bc].mean_error;
  const double er = rows_rows[br].mean_error;
  const double et = trcm_rows[bt].mean_error;
  if (!std::isfinite(std::min({ec, er, et}))) {
    throw ConvergenceError("select_onestep_model: every candidate failed", 0, 0.0);
  }

  // Marginal models are simpler and win ties.
  if (ec <= er && ec <= et) {
    sel.choice = "rcm-cols";
    sel.penalty = PenaltySpec{q_row, q_col, 0.0, col_rhos[bc]};
    sel.report = rcm_impute(x, col_rhos[bc], q_col, Axis::cols, opts);
  } else if (er <= et) {
    sel.choice = "rcm-rows";
    sel.penalty = PenaltySpec{q_row, q_col, row_rhos[br], 0.0};
    sel.report = rcm_impute(x, row_rhos[br], q_row, Axis::rows, opts);
  } else {
    sel.choice = "trcm";
    sel.penalty = grid[bt];
    sel.report = trcm_impute_onestep(x, grid[bt], opts);
  }
  sel.report.params["cv_error"] = std::min({ec, er, et});
  return sel;
}

std::string MethodSpec::label() const {
  if (name == "trcm-onestep" || name == "trcm-mcecm") {
    return name + " L" + std::to_string(penalty.q_row) + ":L" + std::to_string(penalty.q_col);
  }
  return name;
}

void ExperimentSpec::validate() const {
  if (n < 2 || p < 2) throw InputError("experiment: n and p must be at least 2");
  if (row.dim != n || col.dim != p) throw InputError("experiment: covariance dimensions must match n, p");
  if (!(missing_fraction >= 0.0 && missing_fraction < 1.0)) {
    throw InputError("experiment: missing fraction must be in [0, 1)");
  }
  if (replicates < 1) throw InputError("experiment: replicate count must be at least 1");
  if (folds < 2) throw InputError("experiment: folds must be at least 2");
  if (!(mean_scale >= 0.0)) throw InputError("experiment: mean scale must be >= 0");
  if (pattern && pattern->cols() != p) throw InputError("experiment: pattern template width differs");
  for (const MethodSpec& m : methods) {
    static const std::set<std::string> known{"trcm-onestep", "trcm-mcecm", "rcm-rows", "rcm-cols",
                                             "svd",          "knn",        "mean-cols", "mean-rows",
                                             "mean-additive"};
    if (!known.count(m.name)) throw InputError("experiment: unknown method '" + m.name + "'");
    m.penalty.validate();
  }
  baseline.validate();
}

Matrix simulate_truth(const ExperimentSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {0}));
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector nu = Vector::Zero(spec.n);
  Vector mu = Vector::Zero(spec.p);
  if (spec.mean_scale > 0.0) {
    for (Index i = 0; i < spec.n; ++i) nu(i) = spec.mean_scale * normal(rng);
    for (Index j = 0; j < spec.p; ++j) mu(j) = spec.mean_scale * normal(rng);
  }
  const MeanParams means(nu, mu);
  if (spec.noise == ExperimentSpec::Noise::none) return means.matrix();

  const TrcmModel model(MeanParams::zero(spec.n, spec.p),
                        CovParams(gen_covariance(spec.row), gen_covariance(spec.col)));
  Matrix z = sample(model, derive_seed(seed, {1}));
  if (spec.noise == ExperimentSpec::Noise::gaussian) return z + means.matrix();

  // Gaussian copula: unit-variance normals through the target quantile.
  double center = 3.0;
  double scale = 1.0;
  if (spec.noise == ExperimentSpec::Noise::chisq3) {
    const boost::math::chi_squared dist(3.0);
    for (Index k = 0; k < z.size(); ++k) {
      const double u = 0.5 * std::erfc(-z(k) / std::sqrt(2.0));
      z(k) = boost::math::quantile(dist, std::clamp(u, 1e-300, 1.0 - 1e-16));
    }
    scale = std::sqrt(6.0);
  } else {
    const boost::math::poisson dist(3.0);
    for (Index k = 0; k < z.size(); ++k) {
      const double u = 0.5 * std::erfc(-z(k) / std::sqrt(2.0));
      z(k) = boost::math::quantile(dist, std::clamp(u, 1e-300, 1.0 - 1e-16));
    }
    scale = std::sqrt(3.0);
  }
  if (spec.standardize) z = (z.array() - center) / scale;
  return z + means.matrix();
}

namespace {

std::vector<int> default_ranks(Index n, Index p) {
  std::vector<int> g;
  for (int r = 1; r <= std::min<Index>(10, std::min(n, p)); ++r) g.push_back(r);
  return g;
}

std::vector<int> default_ks(Index n) {
  std::vector<int> g;
  for (int k : {1, 3, 5, 10, 15}) {
    if (k < n) g.push_back(k);
  }
  return g;
}

}  // namespace

ReplicateResult run_method(const MaskedMatrix& x, const MethodSpec& m, const ExperimentSpec& spec,
                           std::uint64_t seed, Matrix* completed) {
  ReplicateResult out;
  out.method = m.label();
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> rhos = m.rho_grid.empty() ? log_grid(-2.0, 2.0, 9) : m.rho_grid;
  const ImputeOptions& io = spec.impute;
  Matrix result;
  std::vector<Params> grid;
  Imputer imputer;

  if (m.name == "trcm-onestep") {
    if (m.cv) {
      OnestepSelection sel = select_onestep_model(
          x, penalty_grid(m.penalty.q_row, m.penalty.q_col, rhos), spec.folds, seed, io);
      out.choice = sel.choice;
      out.params = {{"rho_row", sel.penalty.rho_row}, {"rho_col", sel.penalty.rho_col}};
      result = std::move(sel.report.completed);
    } else {
      ImputationReport r = trcm_impute_onestep(x, m.penalty, io);
      out.choice = "trcm";
      out.params = {{"rho_row", m.penalty.rho_row}, {"rho_col", m.penalty.rho_col}};
      result = std::move(r.completed);
    }
  } else if (m.name == "trcm-mcecm") {
    imputer = [&](const MaskedMatrix& y, const Params& pr) {
      PenaltySpec pen = m.penalty;
      pen.rho_row = pr.at("rho_row");
      pen.rho_col = pr.at("rho_col");
      return trcm_impute_mcecm(y, pen, io).completed;
    };
    if (m.cv) {
      for (const PenaltySpec& pen : penalty_grid(m.penalty.q_row, m.penalty.q_col, rhos)) {
        grid.push_back({{"rho_row", pen.rho_row}, {"rho_col", pen.rho_col}});
      }
    } else {
      grid.push_back({{"rho_row", m.penalty.rho_row}, {"rho_col", m.penalty.rho_col}});
    }
  } else if (m.name == "rcm-rows" || m.name == "rcm-cols") {
    const bool rows = m.name == "rcm-rows";
    imputer = [&, rows](const MaskedMatrix& y, const Params& pr) {
      return rcm_impute(y, pr.at("rho"), rows ? m.penalty.q_row : m.penalty.q_col,
                        rows ? Axis::rows : Axis::cols, io)
          .completed;
    };
    if (m.cv) {
      for (double r : rhos) grid.push_back({{"rho", r}});
    } else {
      grid.push_back({{"rho", rows ? m.penalty.rho_row : m.penalty.rho_col}});
    }
  } else if (m.name == "svd") {
    imputer = [&](const MaskedMatrix& y, const Params& pr) {
      return svd_impute(y, static_cast<int>(pr.at("rank")), spec.baseline).completed;
    };
    if (m.cv) {
      for (int r : m.rank_grid.empty() ? default_ranks(x.rows(), x.cols()) : m.rank_grid) {
        grid.push_back({{"rank", r}});
      }
    } else {
      grid.push_back({{"rank", m.rank}});
    }
  } else if (m.name == "knn") {
    imputer = [&](const MaskedMatrix& y, const Params& pr) {
      return knn_impute(y, static_cast<int>(pr.at("k")), spec.baseline).completed;
    };
    if (m.cv) {
      for (int k : m.k_grid.empty() ? default_ks(x.rows()) : m.k_grid) grid.push_back({{"k", k}});
    } else {
      grid.push_back({{"k", m.k}});
    }
  } else {
    const MeanAxis axis = m.name == "mean-rows"   ? MeanAxis::rows
                          : m.name == "mean-cols" ? MeanAxis::cols
                                                  : MeanAxis::additive;
    result = mean_impute(x, axis).completed;
  }

  if (imputer) {
    Params chosen = grid.front();
    if (grid.size() > 1) {
      const CvResult cv = cross_validate(x, imputer, grid, spec.folds, seed);
      chosen = cv.best;
      if (!std::isfinite(cv.table[cv.best_index].mean_error)) {
        throw ConvergenceError(m.name + ": every grid point failed", 0, 0.0);
      }
    }
    out.params = chosen;
    result = imputer(x, chosen);
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (completed) *completed = std::move(result);
  return out;
}

std::pair<double, double> mean_se(const std::vector<double>& values) {
  std::vector<double> v;
  for (double x : values) {
    if (std::isfinite(x)) v.push_back(x);
  }
  if (v.empty()) return {std::nan(""), std::nan("")};
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() == 1) return {m, std::nan("")};
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return {m, sd / std::sqrt(static_cast<double>(v.size()))};
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const std::size_t nm = spec.methods.size();
  const int reps = spec.replicates;
  std::vector<ReplicateResult> rows(static_cast<std::size_t>(reps) * nm);

#pragma omp parallel for schedule(dynamic, 1)
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t rs = derive_seed(spec.seed, {static_cast<std::uint64_t>(r)});
    std::optional<Matrix> truth;
    std::optional<MaskedMatrix> x;
    std::string setup_error;
    try {
      truth = simulate_truth(spec, derive_seed(rs, {0}));
      x = spec.pattern ? inject_pattern(*truth, *spec.pattern, derive_seed(rs, {1}))
                       : inject_mcar(*truth, spec.missing_fraction, derive_seed(rs, {1}));
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    for (std::size_t m = 0; m < nm; ++m) {
      ReplicateResult& row = rows[static_cast<std::size_t>(r) * nm + m];
      try {
        if (!setup_error.empty()) throw std::runtime_error(setup_error);
        Matrix completed;
        row = run_method(*x, spec.methods[m], spec, derive_seed(rs, {2, m}), &completed);
        const Score s = score(completed, *truth, *x);
        row.mse = s.mse;
        row.rmse = s.rmse;
      } catch (const std::exception& e) {
        row.method = spec.methods[m].label();
        row.failed = true;
        row.message = e.what();
        row.mse = row.rmse = std::nan("");
      }
      row.replicate = r;
    }
  }

  ExperimentResult res;
  res.rows = std::move(rows);
  for (std::size_t m = 0; m < nm; ++m) {
    MethodSummary s;
    s.method = spec.methods[m].label();
    std::vector<double> mses;
    for (int r = 0; r < reps; ++r) {
      const ReplicateResult& row = res.rows[static_cast<std::size_t>(r) * nm + m];
      if (row.failed) {
        ++s.failed;
        continue;
      }
      ++s.succeeded;
      mses.push_back(row.mse);
      if (!row.choice.empty()) ++s.choices[row.choice];
    }
    std::tie(s.mean_mse, s.se) = mean_se(mses);
    res.summary.push_back(std::move(s));
  }
  return res;
}

}  // namespace trcm
