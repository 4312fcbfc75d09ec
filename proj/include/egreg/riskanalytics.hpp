#pragma once

// Finite-sample prediction risk, conditional on X and on the envelope scores.
// The scores are treated as fixed (e.g. estimated from an independent copy of
// the response); only the noise E is random.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "egreg/envscore.hpp"
#include "egreg/estimators.hpp"
#include "egreg/matrixcore.hpp"

namespace egreg {

/// True model y' = x' beta* + eps' with Var(x) = Sigma_x, Var(eps) = Sigma_eps.
template <typename Scalar>
struct TruthSpec {
  Mat<Scalar> beta_star;  ///< p x q
  Mat<Scalar> Sigma_x;    ///< p x p
  Mat<Scalar> Sigma_eps;  ///< q x q

  Index p() const { return beta_star.rows(); }
  Index q() const { return beta_star.cols(); }

  void validate() const {
    if (Sigma_x.rows() != p() || Sigma_x.cols() != p()) throw ShapeError("Sigma_x must be p x p");
    if (Sigma_eps.rows() != q() || Sigma_eps.cols() != q()) {
      throw ShapeError("Sigma_eps must be q x q");
    }
    check_pd(Sigma_x, "Sigma_x");
    check_pd(Sigma_eps, "Sigma_eps");
  }

 private:
  static void check_pd(const Mat<Scalar>& m, const char* name) {
    const Scalar scale = std::max<Scalar>(Scalar(1), m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-10) * scale) {
      throw ContractError(std::string(name) + " must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(m, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues()(0) > 0)) {
      throw ContractError(std::string(name) + " must be positive definite");
    }
  }
};

using TruthSpecd = TruthSpec<double>;

/// Reducible risk split into squared bias and variance, plus the irreducible
/// part shared by every estimator living in span(V_d).
template <typename Scalar>
struct RiskReport {
  Scalar bias_sq = 0;
  Scalar variance = 0;
  Scalar reducible = 0;
  Scalar irreducible = 0;
  Method method = Method::egreg;
};

using RiskReportd = RiskReport<double>;

/// E||x_new'(P_{V_d} beta* - beta*)||^2 = tr{(Q beta*)' Sigma_x (Q beta*)}, Q = I - V_d V_d'.
template <typename Scalar>
Scalar irreducible_risk(const SvdFactors<Scalar>& svd, const TruthSpec<Scalar>& truth, Index d) {
  if (d < 1 || d > svd.rank()) throw DimensionError("irreducible_risk needs 1 <= d <= r");
  if (truth.p() != svd.p()) throw ShapeError("truth and SVD disagree on p");
  const auto vd = svd.V.leftCols(d);
  const Mat<Scalar> resid = truth.beta_star - vd * (vd.transpose() * truth.beta_star);
  return std::max<Scalar>(Scalar(0), (resid.transpose() * truth.Sigma_x * resid).trace());
}

/// Reducible risk of EgReg(d, lambda):
///   variance = tr{Sigma_eps} tr{V_d D^-2 Phi^2 (Phi + lambda)^-2 V_d' Sigma_x}
///   bias^2   = lambda^2 tr{beta*' A Sigma_x A beta*},  A = V_d (Phi + lambda)^-1 V_d'.
template <typename Scalar>
RiskReport<Scalar> reducible_risk_egreg(const SvdFactors<Scalar>& svd,
                                        const EnvelopeScores<Scalar>& scores,
                                        const TruthSpec<Scalar>& truth, Index d, Scalar lambda) {
  if (!(lambda > 0)) {
    throw ParameterError("reducible_risk_egreg needs lambda > 0; use reducible_risk_niece for "
                         "the lambda -> 0+ limit");
  }
  if (d < 1 || d > svd.rank() || d > scores.d()) {
    throw DimensionError("reducible_risk_egreg needs 1 <= d <= min(r, scores.d())");
  }
  if (truth.p() != svd.p()) throw ShapeError("truth and SVD disagree on p");
  const auto vd = svd.V.leftCols(d);
  const Vec<Scalar> phi = scores.phi.head(d);
  const Vec<Scalar> sigma = svd.D.head(d);
  const Mat<Scalar> vsv = vd.transpose() * truth.Sigma_x * vd;  // d x d

  const Vec<Scalar> shrink = phi.array() / (phi.array() + lambda);
  const Vec<Scalar> w = shrink.array().square() / sigma.array().square();
  const Scalar variance = truth.Sigma_eps.trace() * (w.array() * vsv.diagonal().array()).sum();

  const Mat<Scalar> coord =
      (phi.array() + lambda).inverse().matrix().asDiagonal() * (vd.transpose() * truth.beta_star);
  const Scalar bias_sq = lambda * lambda * (coord.transpose() * vsv * coord).trace();

  RiskReport<Scalar> r;
  r.bias_sq = std::max<Scalar>(Scalar(0), bias_sq);
  r.variance = std::max<Scalar>(Scalar(0), variance);
  r.reducible = r.bias_sq + r.variance;
  r.irreducible = irreducible_risk(svd, truth, d);
  r.method = Method::egreg;
  return r;
}

/// Reducible risk of NIECE(u) over the leading d PCs:
///   variance = tr{Sigma_eps} tr{V_(u) D_(u)^-2 V_(u)' Sigma_x}
///   bias^2   = tr{beta*' M Sigma_x M beta*},  M = V_(u) V_(u)' - V_d V_d'  (zero when u = d).
template <typename Scalar>
RiskReport<Scalar> reducible_risk_niece(const SvdFactors<Scalar>& svd,
                                        const EnvelopeScores<Scalar>& scores,
                                        const TruthSpec<Scalar>& truth, Index u, Index d) {
  if (d < 1 || d > svd.rank() || d > scores.d()) {
    throw DimensionError("reducible_risk_niece needs 1 <= d <= min(r, scores.d())");
  }
  if (u < 1 || u > d) throw DimensionError("reducible_risk_niece needs 1 <= u <= d");
  if (truth.p() != svd.p()) throw ShapeError("truth and SVD disagree on p");
  const std::vector<Index> ranked = scores.ranked_within(d);

  Scalar variance_trace = 0;
  for (Index k = 0; k < u; ++k) {
    const Index j = ranked[static_cast<std::size_t>(k)];
    const auto v = svd.V.col(j);
    variance_trace += v.dot(truth.Sigma_x * v) / (svd.D(j) * svd.D(j));
  }

  Scalar bias_sq = 0;
  if (u < d) {
    Mat<Scalar> rest(svd.p(), d - u);
    for (Index k = u; k < d; ++k) rest.col(k - u) = svd.V.col(ranked[static_cast<std::size_t>(k)]);
    const Mat<Scalar> proj = rest * (rest.transpose() * truth.beta_star);
    bias_sq = (proj.transpose() * truth.Sigma_x * proj).trace();
  }

  RiskReport<Scalar> r;
  r.bias_sq = std::max<Scalar>(Scalar(0), bias_sq);
  r.variance = std::max<Scalar>(Scalar(0), truth.Sigma_eps.trace() * variance_trace);
  r.reducible = r.bias_sq + r.variance;
  r.irreducible = irreducible_risk(svd, truth, d);
  r.method = Method::niece;
  return r;
}

template <typename Scalar>
struct LambdaThreshold {
  /// +infinity when beta* = 0 (any lambda > 0 improves on NIECE).
  Scalar value = 0;
  bool unbounded = false;
  /// Directions with zero score were left out of sigma_1(Phi^-1 D^2).
  bool zero_scores_excluded = false;
};

/// Any 0 < lambda < tr{Sigma_eps} / (sigma_1(beta* beta*') sigma_1(Phi_d^-1 D_d^2))
/// gives EgReg(d, lambda) a strictly smaller reducible risk than NIECE(u = d).
template <typename Scalar>
LambdaThreshold<Scalar> lambda_guarantee_threshold(const SvdFactors<Scalar>& svd,
                                                   const EnvelopeScores<Scalar>& scores,
                                                   const TruthSpec<Scalar>& truth, Index d) {
  if (d < 1 || d > svd.rank() || d > scores.d()) {
    throw DimensionError("lambda_guarantee_threshold needs 1 <= d <= min(r, scores.d())");
  }
  LambdaThreshold<Scalar> t;
  Scalar ratio_max = 0;
  bool any_positive = false;
  for (Index j = 0; j < d; ++j) {
    if (scores.phi(j) > 0) {
      ratio_max = std::max(ratio_max, svd.D(j) * svd.D(j) / scores.phi(j));
      any_positive = true;
    } else {
      t.zero_scores_excluded = true;
    }
  }
  if (!any_positive) throw ContractError("all envelope scores are zero; no threshold exists");

  const Mat<Scalar> bbt = truth.beta_star * truth.beta_star.transpose();
  const Scalar beta_top =
      truth.beta_star.size() == 0
          ? Scalar(0)
          : Eigen::SelfAdjointEigenSolver<Mat<Scalar>>(bbt, Eigen::EigenvaluesOnly)
                .eigenvalues()
                .maxCoeff();
  if (!(beta_top > 0)) {
    t.value = std::numeric_limits<Scalar>::infinity();
    t.unbounded = true;
    return t;
  }
  t.value = truth.Sigma_eps.trace() / (beta_top * ratio_max);
  return t;
}

/// (1/R) sum_i tr{(beta_i - beta*)' Sigma_x (beta_i - beta*)}
template <typename Scalar>
Scalar empirical_risk(const std::vector<Mat<Scalar>>& beta_hats, const TruthSpec<Scalar>& truth) {
  if (beta_hats.empty()) throw ParameterError("empirical_risk needs at least one replication");
  Scalar total = 0;
  for (const Mat<Scalar>& b : beta_hats) {
    if (b.rows() != truth.p() || b.cols() != truth.q()) {
      throw ShapeError("coefficient estimate shape differs from beta*");
    }
    const Mat<Scalar> diff = b - truth.beta_star;
    total += (diff.transpose() * truth.Sigma_x * diff).trace();
  }
  return total / static_cast<Scalar>(beta_hats.size());
}

}  // namespace egreg
