#include <doctest.h>

#include "egreg/estimators.hpp"
#include "test_support.hpp"

using namespace egreg;
using testing_support::centered;
using testing_support::gaussian;

namespace {

Datasetd centered_data(Index n, Index p, Index q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const MatrixXd x = gaussian(n, p, rng);
  const MatrixXd y = x * gaussian(p, q, rng) + gaussian(n, q, rng);
  return center_standardize(Datasetd(x, y), Scaling::center);
}

MatrixXd least_squares(const MatrixXd& x, const MatrixXd& y) {
  return x.colPivHouseholderQr().solve(y);
}

// Projection of y onto span(a) through a QR factorization.
MatrixXd project(const MatrixXd& a, const MatrixXd& y) {
  return a * least_squares(a, y);
}

// Indices of the top-u scores among the leading d PCs of x, by direct
// evaluation of v' Sxy Syx v and a stable sort.
std::vector<Index> brute_top(const MatrixXd& v, const MatrixXd& sxy, Index d, Index u) {
  std::vector<std::pair<double, Index>> s;
  for (Index j = 0; j < d; ++j) s.push_back({-(sxy.transpose() * v.col(j)).squaredNorm(), j});
  std::stable_sort(s.begin(), s.end(), [](auto a, auto b) { return a.first < b.first; });
  std::vector<Index> out;
  for (Index k = 0; k < u; ++k) out.push_back(s[k].second);
  return out;
}

// Optimization form of EgReg: Gamma from brute-force scores, eta from the
// normal equations of the reduced ridge problem.
MatrixXd egreg_normal_equations(const MatrixXd& x, const MatrixXd& y, Index d, double lambda) {
  Eigen::JacobiSVD<MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const MatrixXd sxy = x.transpose() * y / static_cast<double>(x.rows());
  MatrixXd gamma(x.cols(), d);
  for (Index j = 0; j < d; ++j) {
    const double phi = (sxy.transpose() * svd.matrixV().col(j)).squaredNorm();
    gamma.col(j) = svd.matrixV().col(j) * std::sqrt(phi) / svd.singularValues()(j);
  }
  const MatrixXd xg = x * gamma;
  const MatrixXd lhs = xg.transpose() * xg + lambda * MatrixXd::Identity(d, d);
  const MatrixXd eta = lhs.ldlt().solve(xg.transpose() * y);
  return gamma * eta;
}

}  // namespace

TEST_CASE("fit_pcr: full rank equals least squares") {
  const Datasetd c = centered_data(40, 6, 2, 1);
  const FittedModeld m = fit_pcr(c, 6);
  CHECK((m.beta - least_squares(c.X, c.Y)).norm() < 1e-8 * m.beta.norm());
  CHECK(m.method == Method::pcr);
  CHECK(*m.params.d == 6);
}

TEST_CASE("fit_pcr: orthonormal design gives X'Y/n") {
  std::mt19937_64 rng(2);
  const Index n = 16, p = 4;
  MatrixXd h = centered(gaussian(n, p, rng));
  // Orthonormalize the centered columns, then scale to squared norm n.
  Eigen::HouseholderQR<MatrixXd> qr(h);
  h = MatrixXd(qr.householderQ() * MatrixXd::Identity(n, p)) * std::sqrt(static_cast<double>(n));
  h = centered(h);  // orthonormal columns of centered data remain centered
  Datasetd c(h, gaussian(n, 1, rng));
  c = center_standardize(c, Scaling::center);
  REQUIRE((c.X.transpose() * c.X / n - MatrixXd::Identity(p, p)).norm() < 1e-10);
  const FittedModeld m = fit_pcr(c, p);
  CHECK((m.beta - c.X.transpose() * c.Y / n).norm() < 1e-10);
}

TEST_CASE("fit_pcr: fitted values are the projection onto the leading d PCs") {
  const Datasetd c = centered_data(30, 12, 2, 3);
  Eigen::JacobiSVD<MatrixXd> svd(c.X, Eigen::ComputeThinU);
  const MatrixXd u4 = svd.matrixU().leftCols(4);
  const FittedModeld m = fit_pcr(c, 4);
  CHECK((c.X * m.beta - u4 * u4.transpose() * c.Y).norm() < 1e-8);
  CHECK_THROWS_AS(fit_pcr(c, 13), DimensionError);
  CHECK_THROWS_AS(fit_pcr(c, 0), DimensionError);
}

TEST_CASE("fit_pcr: variance-ranked PCs miss a low-variance material PC") {
  const Index n = 100, p = 10;
  std::mt19937_64 rng(5);
  const MatrixXd u = testing_support::centered_basis(n, p, rng);
  const MatrixXd v = testing_support::random_basis(p, p, rng);
  VectorXd sig = VectorXd::Ones(p);
  sig(9) = 1e-3;
  const MatrixXd x = u * sig.asDiagonal() * v.transpose();
  const MatrixXd y = 1000.0 * x * v.col(9) + 1e-5 * centered(gaussian(n, 1, rng));
  Datasetd d(x, y);
  d.centered = true;
  const FittedModeld pcr9 = fit_pcr(d, 9);
  const MatrixXd material = x * v.col(9) * 1000.0;
  // Fitted values carry nothing of the material direction.
  CHECK(std::abs((x * pcr9.beta).col(0).dot(material.col(0))) < 1e-6);
  const FittedModeld niece1 = fit_niece(d, 1, 10);
  CHECK(((x * niece1.beta) - material).norm() < 1e-3 * material.norm());
}

TEST_CASE("fit_ridge: normal equations oracle and shrinkage factor") {
  const Datasetd c = centered_data(20, 5, 1, 7);
  for (double lambda : {0.01, 1.0, 30.0}) {
    const FittedModeld m = fit_ridge(c, lambda);
    const MatrixXd lhs = c.X.transpose() * c.X + lambda * MatrixXd::Identity(5, 5);
    const MatrixXd oracle = lhs.ldlt().solve(c.X.transpose() * c.Y);
    CHECK((m.beta - oracle).norm() < 1e-8 * oracle.norm());
  }
  // Unit singular values: every PC shrunk by one half at lambda = 1.
  std::mt19937_64 rng(1);
  const MatrixXd u = testing_support::centered_basis(8, 3, rng);
  const MatrixXd v = testing_support::random_basis(3, 3, rng);
  Datasetd unit(MatrixXd(u * v.transpose()), gaussian(8, 1, rng));
  unit.centered = true;
  const FittedModeld half = fit_ridge(unit, 1.0);
  CHECK((unit.X * half.beta - 0.5 * u * u.transpose() * unit.Y).norm() < 1e-12);
}

TEST_CASE("fit_ridge: norm decreases in lambda; lambda must be positive") {
  const Datasetd c = centered_data(25, 30, 2, 9);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {1e-3, 1e-1, 1.0, 10.0, 1e3, 1e6}) {
    const double nrm = fit_ridge(c, lambda).beta.norm();
    CHECK(nrm < prev);
    prev = nrm;
  }
  CHECK(prev < 1e-3);
  CHECK_THROWS_AS(fit_ridge(c, 0.0), ParameterError);
  CHECK_THROWS_AS(fit_ridge(c, -1.0), ParameterError);
}

TEST_CASE("fit_niece: fitted values project onto the top-scored PCs") {
  for (auto [n, p] : {std::pair{40, 10}, std::pair{15, 30}}) {
    const Datasetd c = centered_data(n, p, 2, 11 + n);
    Eigen::JacobiSVD<MatrixXd> svd(c.X, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Index r = std::min(n - 1, p);
    const MatrixXd sxy = c.X.transpose() * c.Y / n;
    for (Index u : {Index{1}, Index{3}, r}) {
      const std::vector<Index> top = brute_top(svd.matrixV(), sxy, r, u);
      MatrixXd xv(n, u);
      for (Index k = 0; k < u; ++k) xv.col(k) = c.X * svd.matrixV().col(top[k]);
      const FittedModeld m = fit_niece(c, u, r);
      CHECK((c.X * m.beta - project(xv, c.Y)).norm() < 1e-8 * c.Y.norm());
    }
  }
}

TEST_CASE("fit_niece: u = d = r equals PCR; errors") {
  const Datasetd c = centered_data(30, 8, 1, 13);
  CHECK((fit_niece(c, 8).beta - fit_pcr(c, 8).beta).norm() < 1e-10);
  CHECK_THROWS_AS(fit_niece(c, 9, 8), DimensionError);
  CHECK_THROWS_AS(fit_niece(c, 2, 9), DimensionError);
  CHECK_THROWS_AS(fit_niece(c, 0, 8), DimensionError);
}

TEST_CASE("fit_niece equals PCR when scores follow the spectrum") {
  // Response built so that score order matches singular-value order.
  std::mt19937_64 rng(15);
  const Index n = 30, p = 5;
  const MatrixXd u = testing_support::centered_basis(n, p, rng);
  const MatrixXd v = testing_support::random_basis(p, p, rng);
  const VectorXd sig = (VectorXd(5) << 5, 4, 3, 2, 1).finished();
  const MatrixXd x = u * sig.asDiagonal() * v.transpose();
  const MatrixXd y = u * VectorXd::Ones(p);  // phi_j proportional to sigma_j^2
  Datasetd d(x, y);
  d.centered = true;
  for (Index k = 1; k <= p; ++k) CHECK((fit_niece(d, k, p).beta - fit_pcr(d, k).beta).norm() < 1e-10);
}

TEST_CASE("fit_niece: consistency for a planted envelope as n grows") {
  const Index p = 6;
  std::mt19937_64 vrng(4);
  const MatrixXd v = testing_support::random_basis(p, p, vrng);
  const VectorXd eig = (VectorXd(6) << 8, 4, 2, 1, 0.5, 0.25).finished();
  const VectorXd beta = v.col(1) * 1.5 - v.col(4);
  auto err = [&](Index n) {
    double total = 0;
    for (int rep = 0; rep < 10; ++rep) {
      std::mt19937_64 rng(n * 100 + rep);
      const MatrixXd x = gaussian(n, p, rng) * eig.cwiseSqrt().asDiagonal() * v.transpose();
      const MatrixXd y = x * beta + gaussian(n, 1, rng);
      total += (fit_niece(Datasetd(x, y), 2, p).beta - beta).norm();
    }
    return total / 10;
  };
  CHECK(err(4000) < err(100));
  CHECK(err(4000) < 0.1);
}

TEST_CASE("fit_egreg: lambda = 0 reproduces NIECE with u = d") {
  for (auto [n, p] : {std::pair{30, 10}, std::pair{12, 25}, std::pair{20, 20}}) {
    const Datasetd c = centered_data(n, p, 2, 21 + p);
    const Index r = thin_svd(c.X).rank();
    for (Index d : {Index{1}, Index{4}, r}) {
      const FittedModeld e = fit_egreg(c, d, 0.0);
      const FittedModeld nc = fit_niece(c, d, d);
      CHECK((c.X * (e.beta - nc.beta)).norm() < 1e-8);
      CHECK_FALSE(e.zero_score_limit);
    }
  }
}

TEST_CASE("fit_egreg: spectral form equals the optimization form") {
  for (auto [n, p, q] : {std::tuple{30, 10, 2}, std::tuple{12, 25, 1}, std::tuple{20, 20, 3}}) {
    const Datasetd c = centered_data(n, p, q, 41 + p);
    const Index r = thin_svd(c.X).rank();
    for (double lambda : {0.0, 0.1, 1.0, 10.0}) {
      for (Index d : {Index{2}, r}) {
        const FittedModeld e = fit_egreg(c, d, lambda);
        const MatrixXd oracle = egreg_normal_equations(c.X, c.Y, d, lambda);
        CHECK((e.beta - oracle).norm() < 1e-8 * std::max(1.0, oracle.norm()));
      }
    }
  }
}

TEST_CASE("fit_egreg: Gamma-hat and fitted values follow the spectral form") {
  const Datasetd c = centered_data(30, 10, 2, 77);
  const SvdFactorsd f = thin_svd(c.X);
  const EnvelopeScoresd s = envelope_scores(f, cross_cov(c).Sxy, 10);
  const double lambda = 0.3;
  const FittedModeld e = fit_egreg(c, 6, lambda);
  MatrixXd fitted = MatrixXd::Zero(30, 2);
  const std::vector<Index> ranked = s.ranked_within(6);
  for (Index k = 0; k < 6; ++k) {
    const Index j = ranked[k];
    fitted += f.U.col(j) * (s.phi(j) / (s.phi(j) + lambda)) * (f.U.col(j).transpose() * c.Y);
    CHECK((e.gamma_hat.col(k) - f.V.col(j) * std::sqrt(s.phi(j)) / f.D(j)).norm() < 1e-12);
  }
  CHECK((c.X * e.beta - fitted).norm() < 1e-8);
  // Coefficients lie in span(V_d).
  const MatrixXd vd = f.V.leftCols(6);
  CHECK((e.beta - vd * vd.transpose() * e.beta).norm() < 1e-8);
}

TEST_CASE("fit_egreg: equal scores give uniform shrinkage") {
  std::mt19937_64 rng(19);
  const Index n = 20, p = 4;
  const MatrixXd u = testing_support::centered_basis(n, p, rng);
  const MatrixXd v = testing_support::random_basis(p, p, rng);
  const VectorXd sig = (VectorXd(4) << 4, 3, 2, 1).finished();
  const MatrixXd x = u * sig.asDiagonal() * v.transpose();
  // u_j'y proportional to 1/sigma_j makes every phi equal.
  const MatrixXd y = u * sig.cwiseInverse();
  Datasetd d(x, y);
  d.centered = true;
  const double phi = 1.0 / (n * n);
  const double lambda = 2.5 * phi;
  const FittedModeld e = fit_egreg(d, p, lambda);
  CHECK((x * e.beta - (phi / (phi + lambda)) * u * u.transpose() * y).norm() < 1e-10);
}

TEST_CASE("fit_egreg: norm nonincreasing in lambda; zero-score limit flagged") {
  const Datasetd c = centered_data(25, 15, 2, 31);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 1e-3, 0.1, 1.0, 10.0, 100.0}) {
    const double nrm = fit_egreg(c, 10, lambda).beta.norm();
    CHECK(nrm <= prev);
    prev = nrm;
  }
  Datasetd zero = c;
  zero.Y.setZero();
  const FittedModeld e = fit_egreg(zero, 5, 0.0);
  CHECK(e.zero_score_limit);
  CHECK(e.beta.isZero(0));
  CHECK_FALSE(fit_egreg(zero, 5, 1.0).zero_score_limit);
  CHECK_THROWS_AS(fit_egreg(c, 5, -1.0), ParameterError);
  CHECK_THROWS_AS(fit_egreg(c, 16, 1.0), DimensionError);
}

TEST_CASE("fit_simpls: first direction and full-component least squares") {
  const Datasetd c = centered_data(50, 10, 1, 51);
  const FittedModeld one = fit_simpls(c, 1);
  const VectorXd xty = c.X.transpose() * c.Y;
  CHECK(std::abs(std::abs(one.beta.col(0).normalized().dot(xty.normalized())) - 1) < 1e-12);

  const FittedModeld full = fit_simpls(c, 10);
  const MatrixXd ls = least_squares(c.X, c.Y);
  CHECK((full.beta - ls).norm() < 1e-6 * ls.norm());
  CHECK_FALSE(full.early_stop);
  CHECK(*full.params.components == 10);

  const Datasetd c3 = centered_data(60, 8, 3, 52);
  const MatrixXd ls3 = least_squares(c3.X, c3.Y);
  CHECK((fit_simpls(c3, 8).beta - ls3).norm() < 1e-6 * ls3.norm());
}

TEST_CASE("fit_simpls: rank bound, zero response, dimension error") {
  const Datasetd c = centered_data(30, 12, 3, 53);
  const FittedModeld m = fit_simpls(c, 2);
  Eigen::JacobiSVD<MatrixXd> s(m.beta);
  CHECK(s.singularValues()(2) < 1e-10 * s.singularValues()(0));

  Datasetd zero = c;
  zero.Y.setZero();
  const FittedModeld z = fit_simpls(zero, 3);
  CHECK(z.early_stop);
  CHECK(*z.params.components == 0);
  CHECK(z.beta.isZero(0));
  CHECK_THROWS_AS(fit_simpls(c, 13), DimensionError);
}

TEST_CASE("fit_simpls: scores are orthonormal") {
  const Datasetd c = centered_data(40, 15, 2, 54);
  const SimplsPath<double> path = simpls_path(c.X, c.Y, 6);
  const MatrixXd t = c.X * path.R;
  CHECK((t.transpose() * t - MatrixXd::Identity(6, 6)).norm() < 1e-8);
}

TEST_CASE("permuting predictors permutes coefficient rows for every method") {
  const Datasetd c = centered_data(25, 7, 2, 61);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(7);
  perm.indices() << 3, 0, 6, 1, 5, 2, 4;
  Datasetd cp = c;
  cp.X = c.X * perm;
  auto check = [&](const FittedModeld& a, const FittedModeld& b) {
    CHECK((perm.transpose() * a.beta - b.beta).norm() < 1e-8 * std::max(1.0, a.beta.norm()));
  };
  check(fit_pcr(c, 4), fit_pcr(cp, 4));
  check(fit_ridge(c, 0.7), fit_ridge(cp, 0.7));
  check(fit_niece(c, 3, 7), fit_niece(cp, 3, 7));
  check(fit_egreg(c, 5, 0.01), fit_egreg(cp, 5, 0.01));
  check(fit_simpls(c, 3), fit_simpls(cp, 3));
}

TEST_CASE("predict: centering, idempotence and the standardized chain") {
  std::mt19937_64 rng(71);
  const MatrixXd x = gaussian(30, 5, rng) * 2.0 + MatrixXd::Constant(30, 5, 3.0);
  const MatrixXd y = x * gaussian(5, 2, rng) + gaussian(30, 2, rng) + MatrixXd::Constant(30, 2, -4.0);
  const Datasetd raw(x, y);

  const FittedModeld m = fit_ridge(raw, 0.5);  // auto-centered
  const Datasetd c = center_standardize(raw, Scaling::center);
  const MatrixXd expect = (c.X * m.beta).rowwise() + c.transform.y_mean;
  CHECK((predict(m, x) - expect).norm() < 1e-10);
  CHECK((predict(m, c.transform.x_mean) - c.transform.y_mean).norm() < 1e-12);

  const FittedModeld mc = fit_pcr(c, 3);
  CHECK((predict(mc, c.transform.x_mean) - c.transform.y_mean).norm() < 1e-12);

  const Datasetd s = center_standardize(raw, Scaling::standardize);
  const FittedModeld ms = fit_egreg(s, 4, 0.1);
  // Manual chain: standardize x, multiply, undo the response scaling.
  RowVectorXd xm = x.colwise().mean(), ym = y.colwise().mean();
  RowVectorXd xs(5), ys(2);
  for (Index j = 0; j < 5; ++j) xs(j) = std::sqrt((x.col(j).array() - xm(j)).square().sum() / 29);
  for (Index j = 0; j < 2; ++j) ys(j) = std::sqrt((y.col(j).array() - ym(j)).square().sum() / 29);
  const MatrixXd z = (x.rowwise() - xm).array().rowwise() / xs.array();
  const MatrixXd manual =
      ((z * ms.beta).array().rowwise() * ys.array()).matrix().rowwise() + ym;
  CHECK((predict(ms, x) - manual).norm() < 1e-10);

  CHECK_THROWS_AS(predict(m, MatrixXd::Zero(2, 4)), ShapeError);
}

TEST_CASE("method names round trip") {
  for (Method m : {Method::pcr, Method::ridge, Method::niece, Method::egreg, Method::simpls}) {
    CHECK(parse_method(method_name(m)) == m);
  }
  CHECK(parse_method("pls") == Method::simpls);
  CHECK_FALSE(parse_method("lasso").has_value());
}
