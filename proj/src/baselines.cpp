#include <trcm/baselines.hpp>

#include <trcm/error.hpp>
#include <trcm/kernels.hpp>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace trcm {

void BaselineOptions::validate() const {
  if (!(svd_rel_tol > 0.0)) throw InputError("svd rel_tol must be positive");
  if (svd_max_iters < 1) throw InputError("svd iteration cap must be positive");
  if (min_overlap < 2) throw InputError("knn overlap minimum must be at least 2");
}

namespace {

Vector observed_col_means(const MaskedMatrix& x) {
  Vector m(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    double acc = 0.0;
    for (Index i : x.col_observed(j)) acc += x.values()(i, j);
    m(j) = acc / static_cast<double>(x.col_observed(j).size());
  }
  return m;
}

Vector observed_row_means(const MaskedMatrix& x) {
  Vector m(x.rows());
  for (Index i = 0; i < x.rows(); ++i) {
    double acc = 0.0;
    for (Index j : x.row_observed(i)) acc += x.values()(i, j);
    m(i) = acc / static_cast<double>(x.row_observed(i).size());
  }
  return m;
}

double rank_key(double c) { return std::round(std::abs(c) * 1e12) / 1e12; }

Matrix rank_k(const Matrix& a, int rank) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Index k = rank;
  return svd.matrixU().leftCols(k) * svd.singularValues().head(k).asDiagonal() *
         svd.matrixV().leftCols(k).transpose();
}

}  // namespace

ImputationReport svd_impute(const MaskedMatrix& x, int rank, const BaselineOptions& opts) {
  opts.validate();
  if (rank < 1 || rank > std::min(x.rows(), x.cols())) {
    throw InputError("svd_impute: rank must be in [1, min(n, p)]");
  }
  ImputationReport rep;
  rep.method = "svd";
  rep.params["rank"] = rank;
  rep.initial_objective = std::nan("");
  const auto cells = x.missing_cells();
  Matrix cur = x.filled(Matrix::Zero(x.rows(), x.cols()).rowwise() +
                        observed_col_means(x).transpose());
  if (cells.empty()) {
    rep.completed = cur;
    return rep;
  }
  rep.converged = false;
  for (int it = 1; it <= opts.svd_max_iters; ++it) {
    const Vector mu = cur.colwise().mean().transpose();
    Matrix fit = rank_k(cur.rowwise() - mu.transpose(), rank);
    fit.rowwise() += mu.transpose();
    double change = 0.0;
    for (const Cell& c : cells) {
      change = std::max(change, std::abs(fit(c.row, c.col) - cur(c.row, c.col)));
      cur(c.row, c.col) = fit(c.row, c.col);
    }
    rep.objective_trace.push_back(change);
    rep.iterations = it;
    if (change < opts.svd_rel_tol) {
      rep.converged = true;
      break;
    }
  }
  if (!rep.converged) {
    rep.notes.push_back("svd iteration cap reached, last change " +
                        std::to_string(rep.objective_trace.back()));
  }
  rep.completed = std::move(cur);
  return rep;
}

ImputationReport knn_impute(const MaskedMatrix& x, int k, const BaselineOptions& opts) {
  opts.validate();
  const Index n = x.rows();
  if (k < 1 || k >= n) throw InputError("knn_impute: k must be in [1, n)");
  ImputationReport rep;
  rep.method = "knn";
  rep.params["k"] = k;
  rep.params["abs_correlation_weights"] =
      opts.knn_weight == BaselineOptions::KnnWeight::abs_correlation ? 1.0 : 0.0;
  rep.initial_objective = std::nan("");

  const Vector mu = observed_col_means(x);
  Matrix centered = x.values();
  centered.rowwise() -= mu.transpose();
  const Matrix corr = kernels::row_correlation(centered, x.mask(), opts.min_overlap);

  Matrix out = x.filled(Matrix::Zero(n, x.cols()));
  int fallbacks = 0;
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const IndexList& miss = x.row_missing(i);
    if (miss.empty()) continue;
    std::iota(order.begin(), order.end(), Index{0});
    // Valid neighbors first by |corr| descending, ties by lower index. The
    // key is rounded so that rounding noise cannot reorder exact ties.
    auto key = [&](Index r) {
      return (r == i || std::isnan(corr(i, r))) ? -1.0 : rank_key(corr(i, r));
    };
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return key(a) > key(b); });
    for (Index j : miss) {
      double num = 0.0;
      double den = 0.0;
      int used = 0;
      for (Index r : order) {
        if (used == k) break;
        if (r == i || std::isnan(corr(i, r))) break;
        if (!x.observed(r, j)) continue;
        const double w = opts.knn_weight == BaselineOptions::KnnWeight::abs_correlation
                             ? std::abs(corr(i, r))
                             : 1.0;
        num += w * centered(r, j);
        den += w;
        ++used;
      }
      if (used == 0 || !(den > 0.0)) {
        out(i, j) = mu(j);
        ++fallbacks;
      } else {
        out(i, j) = mu(j) + num / den;
      }
    }
  }
  rep.params["fallback_cells"] = fallbacks;
  if (fallbacks > 0) {
    rep.notes.push_back(std::to_string(fallbacks) + " cells fell back to the column mean");
  }
  rep.completed = std::move(out);
  return rep;
}

ImputationReport mean_impute(const MaskedMatrix& x, MeanAxis axis) {
  ImputationReport rep;
  rep.initial_objective = std::nan("");
  Matrix fill;
  switch (axis) {
    case MeanAxis::cols:
      rep.method = "mean-cols";
      fill = Matrix::Zero(x.rows(), x.cols()).rowwise() + observed_col_means(x).transpose();
      break;
    case MeanAxis::rows:
      rep.method = "mean-rows";
      fill = Matrix::Zero(x.rows(), x.cols()).colwise() + observed_row_means(x);
      break;
    case MeanAxis::additive: {
      rep.method = "mean-additive";
      const MeanFit fit = estimate_means(x);
      fill = fit.params.matrix();
      rep.iterations = fit.iterations;
      rep.converged = fit.converged;
      break;
    }
  }
  rep.objective_trace.assign(static_cast<std::size_t>(rep.iterations), std::nan(""));
  rep.completed = x.filled(fill);
  return rep;
}

}  // namespace trcm
