#include <doctest.h>

#include <set>

#include "egreg/crossval.hpp"
#include "test_support.hpp"

using namespace egreg;
using namespace egreg::sim;
using testing_support::gaussian;

namespace {

MatrixXd rows(const MatrixXd& m, const std::vector<Index>& idx) {
  MatrixXd out(static_cast<Index>(idx.size()), m.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Index>(i)) = m.row(idx[i]);
  return out;
}

// Held-out score computed by refitting through the public estimators on each
// training fold and predicting the test rows.
double brute_cv(const MatrixXd& x, const MatrixXd& y, Method method, const ModelParams& p, Index k,
                std::uint64_t seed) {
  double sse = 0;
  for (const std::vector<Index>& test : fold_partition(x.rows(), k, seed)) {
    std::set<Index> held(test.begin(), test.end());
    std::vector<Index> train;
    for (Index i = 0; i < x.rows(); ++i)
      if (!held.count(i)) train.push_back(i);
    const Datasetd d(rows(x, train), rows(y, train));
    const Index r = thin_svd(center_standardize(d, Scaling::center).X).rank();
    FittedModeld m;
    switch (method) {
      case Method::pcr: m = fit_pcr(d, *p.d); break;
      case Method::ridge: m = fit_ridge(d, *p.lambda); break;
      case Method::niece: m = fit_niece(d, *p.u, p.d.value_or(r)); break;
      case Method::egreg: m = fit_egreg(d, p.d.value_or(r), *p.lambda); break;
      case Method::simpls: m = fit_simpls(d, *p.d); break;
    }
    sse += (predict(m, rows(x, test)) - rows(y, test)).squaredNorm();
  }
  return sse / static_cast<double>(x.rows());
}

ModelParams params(std::optional<Index> d, std::optional<Index> u, std::optional<double> l) {
  ModelParams p;
  p.d = d;
  p.u = u;
  p.lambda = l;
  return p;
}

}  // namespace

TEST_CASE("fold_partition is a seeded partition into near-equal blocks") {
  const auto folds = fold_partition(23, 5, 7);
  REQUIRE(folds.size() == 5);
  std::vector<int> seen(23, 0);
  for (const auto& f : folds) {
    CHECK((f.size() == 4 || f.size() == 5));
    for (Index i : f) ++seen[static_cast<std::size_t>(i)];
  }
  for (int s : seen) CHECK(s == 1);
  CHECK(fold_partition(23, 5, 7) == folds);
  CHECK(fold_partition(23, 5, 8) != folds);
  CHECK_THROWS_AS(fold_partition(10, 1, 0), ParameterError);
  CHECK_THROWS_AS(fold_partition(3, 4, 0), ParameterError);
}

TEST_CASE("log_grid endpoints and spacing") {
  const auto g = log_grid(1e-2, 1e2, 5);
  REQUIRE(g.size() == 5);
  CHECK(g[0] == doctest::Approx(1e-2));
  CHECK(g[2] == doctest::Approx(1.0));
  CHECK(g[4] == doctest::Approx(1e2));
  CHECK(log_grid(3, 9, 1) == std::vector<double>{3});
  CHECK_THROWS_AS(log_grid(0, 1, 3), ParameterError);
  CHECK_THROWS_AS(log_grid(2, 1, 3), ParameterError);
}

TEST_CASE("CV scores match refitting every fold through the estimators") {
  std::mt19937_64 rng(1);
  for (auto [n, p] : {std::pair{40, 8}, std::pair{30, 45}}) {
    const MatrixXd x = gaussian(n, p, rng) + MatrixXd::Constant(n, p, 2.0);
    const MatrixXd y = x * gaussian(p, 2, rng) + gaussian(n, 2, rng);
    const Datasetd data(x, y);
    const std::uint64_t seed = 17;
    struct Case {
      Method m;
      std::vector<ModelParams> grid;
    };
    const std::vector<Case> cases = {
        {Method::pcr, {params(1, {}, {}), params(5, {}, {})}},
        {Method::ridge, {params({}, {}, 0.1), params({}, {}, 10.0)}},
        {Method::niece, {params({}, 2, {}), params(6, 3, {})}},
        {Method::egreg, {params({}, {}, 0.0), params(4, {}, 0.5), params({}, {}, 3.0)}},
        {Method::simpls, {params(1, {}, {}), params(3, {}, {})}}};
    for (const Case& c : cases) {
      const CvResult res = kfold_cv(data, c.m, c.grid, 5, seed);
      REQUIRE(res.table.size() == c.grid.size());
      for (std::size_t i = 0; i < c.grid.size(); ++i) {
        const double oracle = brute_cv(x, y, c.m, c.grid[i], 5, seed);
        CHECK(res.table[i].score == doctest::Approx(oracle).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("held-out predictions match the brute-force refits") {
  std::mt19937_64 rng(2);
  const MatrixXd x = gaussian(24, 6, rng);
  const MatrixXd y = x * gaussian(6, 1, rng) + gaussian(24, 1, rng);
  const CvPlan plan(x, 4, 3);
  const MatrixXd pred = plan.held_out_predictions(y, Method::ridge, params({}, {}, 0.4));
  const double sse = (pred - y).squaredNorm() / 24;
  CHECK(sse == doctest::Approx(brute_cv(x, y, Method::ridge, params({}, {}, 0.4), 4, 3)).epsilon(1e-10));
}

TEST_CASE("kfold_cv: single point, duplicates, ties and errors") {
  std::mt19937_64 rng(3);
  const MatrixXd x = gaussian(30, 5, rng);
  const MatrixXd y = x * gaussian(5, 1, rng) + gaussian(30, 1, rng);
  const Datasetd data(x, y);

  const CvResult one = kfold_cv(data, Method::pcr, {params(2, {}, {})}, 5, 1);
  CHECK(one.best == params(2, {}, {}));

  const CvResult dup = kfold_cv(data, Method::pcr, {params(3, {}, {}), params(3, {}, {})}, 5, 1);
  CHECK(dup.table[0].score == dup.table[1].score);
  CHECK(dup.best == params(3, {}, {}));

  // A zero response scores every grid point identically: tie-breaks decide.
  const Datasetd zero(x, MatrixXd::Zero(30, 1));
  CHECK(kfold_cv(zero, Method::pcr, {params(4, {}, {}), params(2, {}, {})}, 5, 1).best.d == 2);
  CHECK(kfold_cv(zero, Method::ridge, {params({}, {}, 1.0), params({}, {}, 5.0)}, 5, 1).best.lambda == 5.0);
  CHECK(kfold_cv(zero, Method::niece, {params({}, 3, {}), params({}, 1, {})}, 5, 1).best.u == 1);
  CHECK(kfold_cv(zero, Method::egreg, {params(3, {}, 1.0), params(2, {}, 1.0), params(2, {}, 4.0)}, 5, 1).best ==
        params(2, {}, 4.0));

  CHECK_THROWS_AS(kfold_cv(data, Method::pcr, {}, 5, 1), ParameterError);
  CHECK_THROWS_AS(kfold_cv(data, Method::pcr, {params({}, {}, {})}, 5, 1), ParameterError);
  CHECK_THROWS_AS(kfold_cv(data, Method::niece, {params(2, 3, {})}, 5, 1), DimensionError);
  CHECK_THROWS_AS(kfold_cv(data, Method::pcr, {params(2, {}, {})}, 1, 1), ParameterError);
  CHECK_THROWS_AS(kfold_cv(data, Method::pcr, {params(2, {}, {})}, 31, 1), ParameterError);
}

TEST_CASE("kfold_cv recovers a planted envelope dimension") {
  // Material PCs lead with a wide gap, so sample PCs barely mix material and
  // immaterial directions; u is tuned over the step-2 grid the studies use.
  const Index n = 2000, p = 10, u_star = 4;
  std::mt19937_64 vrng(99);
  const MatrixXd v = testing_support::random_basis(p, p, vrng);
  VectorXd eig(p);
  eig << 4, 3.4, 2.9, 2.5, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05;
  const VectorXd beta = 0.1 * (v.col(0) - v.col(1) + v.col(2) - v.col(3));
  std::vector<ModelParams> grid;
  for (Index u = 2; u <= p; u += 2) grid.push_back(params({}, u, {}));
  int hits = 0;
  for (int run = 0; run < 50; ++run) {
    std::mt19937_64 rng(500 + run);
    const MatrixXd x = gaussian(n, p, rng) * eig.cwiseSqrt().asDiagonal() * v.transpose();
    const MatrixXd y = x * beta + gaussian(n, 1, rng);
    if (kfold_cv(Datasetd(x, y), Method::niece, grid, 10, run).best.u == u_star) ++hits;
  }
  CHECK(hits >= 40);
}
