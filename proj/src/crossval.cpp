#include "egreg/crossval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "egreg/envscore.hpp"
#include "egreg/rng.hpp"

namespace egreg::sim {

namespace {

MatrixXd rows_of(const MatrixXd& m, const std::vector<Index>& idx) {
  MatrixXd out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
  return out;
}

// True when a should be preferred over b at equal CV score.
bool prefer(const ModelParams& a, const ModelParams& b) {
  const Index au = a.u.value_or(0), bu = b.u.value_or(0);
  if (au != bu) return au < bu;
  const Index ad = a.d.value_or(0), bd = b.d.value_or(0);
  if (ad != bd) return ad < bd;
  return a.lambda.value_or(0) > b.lambda.value_or(0);
}

Index resolve_d(const ModelParams& p, Method method, Index rank) {
  if (p.d) {
    if (*p.d < 1 || *p.d > rank) {
      throw DimensionError("grid value d=" + std::to_string(*p.d) +
                           " exceeds training-fold rank " + std::to_string(rank));
    }
    return *p.d;
  }
  if (method == Method::niece || method == Method::egreg) return rank;
  throw ParameterError(std::string(method_name(method)) + " grid points need d");
}

}  // namespace

std::vector<std::vector<Index>> fold_partition(Index n, Index k, std::uint64_t seed) {
  if (k < 2) throw ParameterError("cross-validation needs k >= 2");
  if (n < k) throw ParameterError("cross-validation needs n >= k");
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(stream_seed(seed, 0xF01D5ULL));
  // Fisher-Yates with an explicit draw so the permutation does not depend on
  // the standard library's shuffle implementation.
  for (Index i = n - 1; i > 0; --i) {
    const Index j = static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  Index start = 0;
  for (Index f = 0; f < k; ++f) {
    const Index size = n / k + (f < n % k ? 1 : 0);
    folds[static_cast<std::size_t>(f)].assign(perm.begin() + start, perm.begin() + start + size);
    start += size;
  }
  return folds;
}

std::vector<double> log_grid(double lo, double hi, Index count) {
  if (!(lo > 0) || !(hi >= lo) || count < 1) throw ParameterError("invalid log grid");
  std::vector<double> g(static_cast<std::size_t>(count));
  if (count == 1) {
    g[0] = lo;
    return g;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (Index i = 0; i < count; ++i) {
    g[static_cast<std::size_t>(i)] =
        std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1));
  }
  return g;
}

CvPlan::CvPlan(const MatrixXd& x, Index k, std::uint64_t seed)
    : n_(x.rows()), partition_(fold_partition(x.rows(), k, seed)) {
  folds_.reserve(partition_.size());
  for (std::size_t f = 0; f < partition_.size(); ++f) {
    Fold fold;
    fold.test = partition_[f];
    std::sort(fold.test.begin(), fold.test.end());
    for (std::size_t g = 0; g < partition_.size(); ++g) {
      if (g != f) fold.train.insert(fold.train.end(), partition_[g].begin(), partition_[g].end());
    }
    std::sort(fold.train.begin(), fold.train.end());
    const MatrixXd xtr = rows_of(x, fold.train);
    const RowVectorXd mean = xtr.colwise().mean();
    fold.x_train = xtr.rowwise() - mean;
    fold.x_test = rows_of(x, fold.test).rowwise() - mean;
    fold.svd = thin_svd(fold.x_train);
    fold.x_test_v = fold.x_test * fold.svd.V;
    folds_.push_back(std::move(fold));
  }
}

Index CvPlan::min_rank() const {
  Index r = folds_.front().svd.rank();
  for (const Fold& f : folds_) r = std::min(r, f.svd.rank());
  return r;
}

std::vector<MatrixXd> CvPlan::fold_predictions(const MatrixXd& y, Method method,
                                               const std::vector<ModelParams>& grid) const {
  if (y.rows() != n_) throw ShapeError("response row count differs from the CV plan");
  std::vector<MatrixXd> preds(grid.size(), MatrixXd::Zero(n_, y.cols()));
  for (const Fold& fold : folds_) {
    const MatrixXd ytr = rows_of(y, fold.train);
    const RowVectorXd ymean = ytr.colwise().mean();
    const MatrixXd yc = ytr.rowwise() - ymean;
    const SvdFactorsd& svd = fold.svd;
    const Index r = svd.rank();
    const MatrixXd uty = svd.U.transpose() * yc;  // r x q
    const Index m = static_cast<Index>(fold.test.size());

    EnvelopeScoresd scores;
    if (method == Method::niece || method == Method::egreg) {
      scores = sample_envelope_scores(svd, yc, r);
    }
    SimplsPath<double> path;
    MatrixXd t_test;
    if (method == Method::simpls) {
      Index max_d = 0;
      for (const ModelParams& p : grid) max_d = std::max(max_d, resolve_d(p, method, r));
      path = simpls_path(fold.x_train, yc, max_d);
      t_test = fold.x_test * path.R;
    }

    for (std::size_t g = 0; g < grid.size(); ++g) {
      const ModelParams& p = grid[g];
      MatrixXd pred = MatrixXd::Zero(m, y.cols());
      switch (method) {
        case Method::pcr: {
          const Index d = resolve_d(p, method, r);
          pred = fold.x_test_v.leftCols(d) *
                 (svd.D.head(d).cwiseInverse().asDiagonal() * uty.topRows(d));
          break;
        }
        case Method::ridge: {
          if (!p.lambda || !(*p.lambda > 0)) throw ParameterError("ridge grid needs lambda > 0");
          const VectorXd w = svd.D.array() / (svd.D.array().square() + *p.lambda);
          pred = fold.x_test_v * (w.asDiagonal() * uty);
          break;
        }
        case Method::niece: {
          const Index d = resolve_d(p, method, r);
          if (!p.u) throw ParameterError("NIECE grid points need u");
          const Index u = *p.u;
          if (u < 1 || u > d) throw DimensionError("NIECE grid needs 1 <= u <= d");
          const std::vector<Index> ranked = scores.ranked_within(d);
          for (Index k = 0; k < u; ++k) {
            const Index j = ranked[static_cast<std::size_t>(k)];
            pred.noalias() += fold.x_test_v.col(j) * (uty.row(j) / svd.D(j));
          }
          break;
        }
        case Method::egreg: {
          const Index d = resolve_d(p, method, r);
          const double lambda = p.lambda.value_or(0.0);
          if (!(lambda >= 0)) throw ParameterError("EgReg grid needs lambda >= 0");
          for (Index j = 0; j < d; ++j) {
            const double phi = scores.phi(j);
            if (!(phi + lambda > 0)) continue;
            const double w = phi / (phi + lambda) / svd.D(j);
            pred.noalias() += fold.x_test_v.col(j) * (uty.row(j) * w);
          }
          break;
        }
        case Method::simpls: {
          const Index a = std::min(resolve_d(p, method, r), path.components());
          if (a > 0) pred = t_test.leftCols(a) * path.Q.leftCols(a).transpose();
          break;
        }
      }
      pred.rowwise() += ymean;
      for (Index i = 0; i < m; ++i) preds[g].row(fold.test[static_cast<std::size_t>(i)]) = pred.row(i);
    }
  }
  return preds;
}

MatrixXd CvPlan::held_out_predictions(const MatrixXd& y, Method method,
                                      const ModelParams& params) const {
  return fold_predictions(y, method, {params}).front();
}

CvResult CvPlan::evaluate(const MatrixXd& y, Method method,
                          const std::vector<ModelParams>& grid) const {
  if (grid.empty()) throw ParameterError("cross-validation grid is empty");
  const std::vector<MatrixXd> preds = fold_predictions(y, method, grid);
  CvResult res;
  res.table.reserve(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double score = (y - preds[g]).squaredNorm() / static_cast<double>(n_);
    res.table.push_back({grid[g], score});
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < res.table.size(); ++g) {
    const double s = res.table[g].score, sb = res.table[best].score;
    if (s < sb || (s == sb && prefer(res.table[g].params, res.table[best].params))) best = g;
  }
  res.best = res.table[best].params;
  res.best_score = res.table[best].score;
  return res;
}

CvResult kfold_cv(const Datasetd& data, Method method, const std::vector<ModelParams>& grid,
                  Index k, std::uint64_t seed) {
  if (grid.empty()) throw ParameterError("cross-validation grid is empty");
  const CvPlan plan(data.X, k, seed);
  return plan.evaluate(data.Y, method, grid);
}

}  // namespace egreg::sim
