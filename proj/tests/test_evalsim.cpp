#include <doctest.h>

#include <trcm/error.hpp>
#include <trcm/evalsim.hpp>

#include "oracles.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace trcm;

namespace {

template <class A, class B>
bool same(const A& a, const B& b) {
  return (a == b).all();
}

}  // namespace

TEST_CASE("covariance generators give the closed-form entries") {
  const Matrix ar = gen_covariance({CovStructure::Kind::autoregressive, 3, 0.8, 5});
  Matrix want(3, 3);
  want << 1, 0.8, 0.8 * 0.8, 0.8, 1, 0.8, 0.8 * 0.8, 0.8, 1;
  CHECK(ar == want);

  const Matrix eq = gen_covariance({CovStructure::Kind::equal_offdiag, 2, 0.5, 5});
  Matrix want2(2, 2);
  want2 << 1, 0.5, 0.5, 1;
  CHECK(eq == want2);

  const Matrix band = gen_covariance({CovStructure::Kind::banded, 6, 0.8, 5});
  for (Index i = 0; i < 6; ++i) {
    for (Index j = 0; j < 6; ++j) {
      const double expect = i == j ? 1.0 : (std::abs(i - j) % 5 == 0 ? 0.8 : 0.0);
      CHECK(band(i, j) == expect);
    }
  }

  const Matrix blk = gen_covariance({CovStructure::Kind::blocked, 12, 0.6, 5});
  for (Index i = 0; i < 12; ++i) {
    for (Index j = 0; j < 12; ++j) {
      const double expect = i == j ? 1.0 : (i / 5 == j / 5 ? 0.6 : 0.0);
      CHECK(blk(i, j) == expect);
    }
  }

  // Every study structure at the study sizes is a valid covariance.
  for (int s = 0; s <= 4; ++s) {
    for (Index d : {10, 25, 50, 100}) {
      for (bool row : {true, false}) {
        const Matrix c = gen_covariance(numbered_structure(s, row, d));
        CHECK(c == c.transpose());
        CHECK(c.diagonal().isOnes());
      }
    }
  }
  CHECK(numbered_structure(1, true, 4).value == 0.8);
  CHECK(numbered_structure(1, false, 4).value == 0.6);
  CHECK(numbered_structure(2, true, 4).value == 0.5);
}

TEST_CASE("mcar injection") {
  std::mt19937_64 rng(3);
  const Matrix x = oracle::gaussian(50, 50, rng);
  const MaskedMatrix none = inject_mcar(x, 0.0, 1);
  CHECK(none.complete());

  const MaskedMatrix a = inject_mcar(x, 0.25, 11);
  CHECK(a.missing_count() == 625);
  const MaskedMatrix b = inject_mcar(x, 0.25, 11);
  CHECK(same(a.mask(), b.mask()));
  const MaskedMatrix c = inject_mcar(x, 0.25, 12);
  CHECK_FALSE(same(a.mask(), c.mask()));

  CHECK_THROWS_AS(inject_mcar(x, 1.0, 1), InputError);
  // 2x2 with three of four cells missing always empties a row.
  CHECK_THROWS_AS(inject_mcar(Matrix::Ones(2, 2), 0.75, 1), InputError);
}

TEST_CASE("pattern injection") {
  std::mt19937_64 rng(5);
  const Matrix x = oracle::gaussian(20, 6, rng);

  const MaskedMatrix full = MaskedMatrix::fully_observed(oracle::gaussian(4, 6, rng));
  CHECK(inject_pattern(x, full, 9).complete());

  BoolMatrix one_ok = BoolMatrix::Constant(1, 6, true);
  const MaskedMatrix single_ok(oracle::gaussian(1, 6, rng), one_ok);
  const MaskedMatrix tiled = inject_pattern(x, single_ok, 3);
  for (Index i = 0; i < x.rows(); ++i) CHECK(same(tiled.mask().row(i), one_ok.row(0)));

  // Replay of the seeded template draw.
  BoolMatrix tm = BoolMatrix::Constant(5, 6, true);
  tm(0, 0) = false;
  tm(1, 1) = false;
  tm(1, 2) = false;
  tm(3, 5) = false;
  tm(4, 3) = false;
  tm(4, 4) = false;
  const MaskedMatrix tmpl(oracle::gaussian(5, 6, rng), tm);
  const std::uint64_t seed = 77;
  const MaskedMatrix out = inject_pattern(x, tmpl, seed);
  std::mt19937_64 replay(derive_seed(seed, {0}));
  std::uniform_int_distribution<Index> pick(0, tmpl.rows() - 1);
  for (Index i = 0; i < x.rows(); ++i) CHECK(same(out.mask().row(i), tm.row(pick(replay))));
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (out.observed(i, j)) CHECK(out.values()(i, j) == x(i, j));
    }
  }
}

TEST_CASE("scoring") {
  Matrix truth(2, 2);
  truth << 1, 2, 3, 4;
  BoolMatrix held = BoolMatrix::Constant(2, 2, false);
  held(1, 0) = true;
  CHECK(score(truth, truth, held).mse == 0.0);
  Matrix off = truth;
  off(1, 0) += 2.0;
  const Score s = score(off, truth, held);
  CHECK(s.mse == 4.0);
  CHECK(s.rmse == 2.0);
  CHECK_THROWS_AS(score(off, truth, BoolMatrix::Constant(2, 2, false)), InputError);

  std::mt19937_64 rng(8);
  const Matrix t = oracle::gaussian(9, 7, rng);
  const Matrix c = oracle::gaussian(9, 7, rng);
  const BoolMatrix h = BoolMatrix(!oracle::random_mask(9, 7, 0.3, rng).array());
  double acc = 0.0;
  int cnt = 0;
  for (Index i = 0; i < 9; ++i) {
    for (Index j = 0; j < 7; ++j) {
      if (h(i, j)) {
        acc += (c(i, j) - t(i, j)) * (c(i, j) - t(i, j));
        ++cnt;
      }
    }
  }
  const Score r = score(c, t, h);
  CHECK(r.mse == doctest::Approx(acc / cnt).epsilon(1e-14));
  CHECK(r.abs_errors.size() == static_cast<std::size_t>(cnt));

  // Only held-out cells matter.
  Matrix c2 = c;
  for (Index i = 0; i < 9; ++i) {
    for (Index j = 0; j < 7; ++j) {
      if (!h(i, j)) c2(i, j) += 100.0;
    }
  }
  CHECK(score(c2, t, h).mse == r.mse);
}

TEST_CASE("folds are disjoint and cover the observed cells") {
  std::mt19937_64 rng(21);
  const MaskedMatrix x = inject_mcar(oracle::gaussian(15, 12, rng), 0.2, 4);
  for (int k : {2, 5}) {
    const auto folds = make_folds(x, k, 99);
    REQUIRE(folds.size() == static_cast<std::size_t>(k));
    for (Index i = 0; i < x.rows(); ++i) {
      for (Index j = 0; j < x.cols(); ++j) {
        int hits = 0;
        for (const auto& f : folds) hits += f(i, j) ? 1 : 0;
        CHECK(hits == (x.observed(i, j) ? 1 : 0));
      }
    }
    for (const auto& f : folds) CHECK_NOTHROW(x.hide(f));
    const auto again = make_folds(x, k, 99);
    for (int f = 0; f < k; ++f) CHECK(same(again[f], folds[f]));
  }
  CHECK_THROWS_AS(make_folds(x, 1, 1), InputError);
}

TEST_CASE("cross-validation") {
  std::mt19937_64 rng(31);
  const MaskedMatrix x = inject_mcar(oracle::gaussian(6, 4, rng), 0.1, 2);
  const Imputer col_mean = [](const MaskedMatrix& y, const Params&) {
    return mean_impute(y, MeanAxis::cols).completed;
  };

  SUBCASE("single point") {
    const CvResult res = cross_validate(x, col_mean, {Params{{"a", 1.0}}}, 5, 7);
    CHECK(res.best_index == 0);
    CHECK(res.best.at("a") == 1.0);
    CHECK(std::isfinite(res.table[0].mean_error));
    CHECK(res.table[0].fold_errors.size() == 5);
  }

  SUBCASE("two folds by hand") {
    const std::uint64_t seed = 13;
    const CvResult res = cross_validate(x, col_mean, {Params{}}, 2, seed);
    const auto folds = make_folds(x, 2, seed);
    double total = 0.0;
    for (const auto& f : folds) {
      double acc = 0.0;
      int cnt = 0;
      for (Index j = 0; j < x.cols(); ++j) {
        double sum = 0.0;
        int m = 0;
        for (Index i = 0; i < x.rows(); ++i) {
          if (x.observed(i, j) && !f(i, j)) {
            sum += x.values()(i, j);
            ++m;
          }
        }
        for (Index i = 0; i < x.rows(); ++i) {
          if (f(i, j)) {
            const double e = sum / m - x.values()(i, j);
            acc += e * e;
            ++cnt;
          }
        }
      }
      total += acc / cnt;
    }
    CHECK(res.table[0].mean_error == doctest::Approx(total / 2).epsilon(1e-13));
  }

  SUBCASE("ties go to the earliest point and failures score infinity") {
    const Imputer flaky = [&](const MaskedMatrix& y, const Params& pr) {
      if (pr.at("a") < 0) throw NumericalError("boom");
      return col_mean(y, pr);
    };
    const CvResult res =
        cross_validate(x, flaky, {Params{{"a", -1}}, Params{{"a", 2}}, Params{{"a", 1}}}, 3, 5);
    CHECK(std::isinf(res.table[0].mean_error));
    CHECK_FALSE(res.table[0].failure.empty());
    CHECK(res.best_index == 1);
  }
}

TEST_CASE("grids") {
  const auto g = log_grid(-2, 2, 9);
  REQUIRE(g.size() == 9);
  CHECK(g.front() == doctest::Approx(100.0));
  CHECK(g.back() == doctest::Approx(0.01));
  CHECK(g[4] == doctest::Approx(1.0));
  CHECK(penalty_grid(2, 1, {1, 2, 3}).size() == 9);
}

TEST_CASE("one-step selection with a single candidate grid") {
  std::mt19937_64 rng(41);
  const MaskedMatrix x = inject_mcar(oracle::gaussian(10, 8, rng), 0.15, 6);
  const PenaltySpec pen{2, 2, 1.0, 1.0};
  const OnestepSelection sel = select_onestep_model(x, {pen}, 3, 2);
  CHECK(sel.table.size() == 3);
  CHECK((sel.choice == "rcm-cols" || sel.choice == "rcm-rows" || sel.choice == "trcm"));
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (x.observed(i, j)) CHECK(sel.report.completed(i, j) == x.values()(i, j));
    }
  }
  CHECK_THROWS_AS(select_onestep_model(x, {}, 3, 2), InputError);
  CHECK_THROWS_AS(select_onestep_model(x, {pen, PenaltySpec{1, 2, 1, 1}}, 3, 2), InputError);
}

namespace {

std::map<std::string, int> selection_counts(const CovStructure& row, const CovStructure& col,
                                            int reps) {
  ExperimentSpec spec;
  spec.n = row.dim;
  spec.p = col.dim;
  spec.row = row;
  spec.col = col;
  spec.missing_fraction = 0.25;
  std::map<std::string, int> counts;
  const auto grid = penalty_grid(2, 2, log_grid(-1, 1, 3));
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t rs = derive_seed(123, {static_cast<std::uint64_t>(r)});
    const Matrix truth = simulate_truth(spec, rs);
    const MaskedMatrix x = inject_mcar(truth, 0.25, derive_seed(rs, {1}));
    ++counts[select_onestep_model(x, grid, 5, derive_seed(rs, {2})).choice];
  }
  return counts;
}

}  // namespace

TEST_CASE("one-step selection follows the generating structure") {
  const Index d = 30;
  const int reps = 20;
  const CovStructure ar_row = numbered_structure(1, true, d);
  const CovStructure ar_col = numbered_structure(1, false, d);
  const CovStructure eye{CovStructure::Kind::identity, d, 0.0, 5};

  auto marginal = selection_counts(eye, ar_col, reps);
  INFO("identity rows: cols " << marginal["rcm-cols"] << " rows " << marginal["rcm-rows"]
                              << " trcm " << marginal["trcm"]);
  CHECK(marginal["rcm-cols"] + marginal["rcm-rows"] > reps / 2);

  auto both = selection_counts(ar_row, ar_col, reps);
  INFO("both active: cols " << both["rcm-cols"] << " rows " << both["rcm-rows"] << " trcm "
                            << both["trcm"]);
  CHECK(both["trcm"] > reps / 2);
}

TEST_CASE("experiment harness") {
  ExperimentSpec spec;
  spec.n = 8;
  spec.p = 6;
  spec.row = {CovStructure::Kind::identity, 8, 0.0, 5};
  spec.col = {CovStructure::Kind::identity, 6, 0.0, 5};

  SUBCASE("additive truth is recovered by the additive mean fill") {
    spec.noise = ExperimentSpec::Noise::none;
    spec.mean_scale = 2.0;
    spec.missing_fraction = 0.2;
    spec.replicates = 3;
    spec.methods = {MethodSpec{"mean-additive"}};
    const ExperimentResult res = run_experiment(spec);
    REQUIRE(res.rows.size() == 3);
    for (const auto& row : res.rows) {
      CHECK_FALSE(row.failed);
      CHECK(row.mse < 1e-16);
    }
  }

  SUBCASE("identical specs give identical tables") {
    spec.row = numbered_structure(1, true, 8);
    spec.col = numbered_structure(1, false, 6);
    spec.replicates = 3;
    spec.seed = 17;
    spec.folds = 3;
    MethodSpec onestep{"trcm-onestep"};
    onestep.rho_grid = {1.0, 0.1};
    MethodSpec svd{"svd"};
    svd.rank_grid = {1, 2};
    spec.methods = {onestep, svd, MethodSpec{"mean-cols"}};
    const ExperimentResult a = run_experiment(spec);
    const ExperimentResult b = run_experiment(spec);
    REQUIRE(a.rows.size() == 9);
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
      CHECK(a.rows[k].mse == b.rows[k].mse);
      CHECK(a.rows[k].params == b.rows[k].params);
      CHECK(a.rows[k].choice == b.rows[k].choice);
    }
    CHECK(a.summary.size() == 3);
    CHECK(a.summary[0].succeeded == 3);
  }

  SUBCASE("bad specs are rejected") {
    spec.replicates = 0;
    CHECK_THROWS_AS(run_experiment(spec), InputError);
  }
}

TEST_CASE("mean and standard error") {
  const auto [m, se] = mean_se({1.0, 2.0, 3.0, std::nan("")});
  CHECK(m == doctest::Approx(2.0));
  CHECK(se == doctest::Approx(1.0 / std::sqrt(3.0)));
}
