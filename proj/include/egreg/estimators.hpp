#pragma once

// The five PC-based regression estimators (PCR, ridge, NIECE, EgReg, SIMPLS)
// and prediction. Every SVD-based fit is computed from the thin SVD of the
// centered predictor matrix, never from normal equations, so p > n is fine.
//
// Ridge and EgReg use the unscaled penalty lambda * ||.||_F^2 (no factor n).

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "egreg/envscore.hpp"
#include "egreg/matrixcore.hpp"

namespace egreg {

enum class Method { pcr, ridge, niece, egreg, simpls };

inline std::string_view method_name(Method m) {
  switch (m) {
    case Method::pcr: return "pcr";
    case Method::ridge: return "ridge";
    case Method::niece: return "niece";
    case Method::egreg: return "egreg";
    case Method::simpls: return "simpls";
  }
  return "unknown";
}

inline std::optional<Method> parse_method(std::string_view s) {
  if (s == "pcr") return Method::pcr;
  if (s == "ridge") return Method::ridge;
  if (s == "niece") return Method::niece;
  if (s == "egreg") return Method::egreg;
  if (s == "simpls" || s == "pls") return Method::simpls;
  return std::nullopt;
}

struct ModelParams {
  std::optional<Index> d;
  std::optional<Index> u;
  std::optional<double> lambda;
  /// SIMPLS only: number of components actually extracted.
  std::optional<Index> components;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

template <typename Scalar>
struct FittedModel {
  Mat<Scalar> beta;  ///< p x q
  Method method = Method::pcr;
  ModelParams params;
  Mat<Scalar> gamma_hat;  ///< p x d reduction matrix, EgReg only
  Transform<Scalar> transform;
  /// EgReg with lambda = 0: directions with a zero score were given zero
  /// weight (the lambda -> 0+ limit) instead of 0/0.
  bool zero_score_limit = false;
  /// SIMPLS stopped before the requested number of components.
  bool early_stop = false;

  Index p() const { return beta.rows(); }
  Index q() const { return beta.cols(); }
};

using FittedModeld = FittedModel<double>;

namespace detail {

template <typename Scalar>
Dataset<Scalar> ensure_centered(const Dataset<Scalar>& data) {
  if (data.centered) return data;
  return center_standardize(data, Scaling::center);
}

template <typename Scalar>
void check_d(Index d, const SvdFactors<Scalar>& svd) {
  if (d < 1 || d > svd.rank()) {
    throw DimensionError("d=" + std::to_string(d) + " must lie in [1, r=" +
                         std::to_string(svd.rank()) + "]");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Coefficients from a precomputed SVD of centered X and a centered response.

/// beta = V_d diag(1/sigma) U_d' Y
template <typename Scalar, typename DY>
Mat<Scalar> pcr_coefficients(const SvdFactors<Scalar>& svd, const Eigen::MatrixBase<DY>& y,
                             Index d) {
  detail::check_d(d, svd);
  const Mat<Scalar> uty = svd.U.leftCols(d).transpose() * y;
  return svd.V.leftCols(d) * (svd.D.head(d).cwiseInverse().asDiagonal() * uty);
}

/// beta = V diag(sigma / (sigma^2 + lambda)) U' Y
template <typename Scalar, typename DY>
Mat<Scalar> ridge_coefficients(const SvdFactors<Scalar>& svd, const Eigen::MatrixBase<DY>& y,
                               Scalar lambda) {
  if (!(lambda > 0)) throw ParameterError("ridge lambda must be positive");
  const Vec<Scalar> w = svd.D.array() / (svd.D.array().square() + lambda);
  return svd.V * (w.asDiagonal() * (svd.U.transpose() * y));
}

/// beta = V_(u) D_(u)^{-1} U_(u)' Y over the top-u scored PCs among the leading d.
template <typename Scalar, typename DY>
Mat<Scalar> niece_coefficients(const SvdFactors<Scalar>& svd,
                               const EnvelopeScores<Scalar>& scores,
                               const Eigen::MatrixBase<DY>& y, Index u, Index d) {
  detail::check_d(d, svd);
  if (d > scores.d()) throw DimensionError("scores cover fewer than d PCs");
  if (u < 1 || u > d) {
    throw DimensionError("NIECE needs 1 <= u <= d, got u=" + std::to_string(u));
  }
  const std::vector<Index> ranked = scores.ranked_within(d);
  Mat<Scalar> beta = Mat<Scalar>::Zero(svd.p(), y.cols());
  for (Index k = 0; k < u; ++k) {
    const Index j = ranked[static_cast<std::size_t>(k)];
    beta.noalias() += svd.V.col(j) * ((svd.U.col(j).transpose() * y) / svd.D(j));
  }
  return beta;
}

template <typename Scalar>
struct EgregFit {
  Mat<Scalar> beta;       ///< p x q
  Mat<Scalar> gamma_hat;  ///< p x d, columns in ranked order
  Mat<Scalar> eta;        ///< d x q
  bool zero_score_limit = false;
};

/// Gamma = V_(d) D_(d)^{-1} Phi_(d)^{1/2}; since X Gamma = U_(d) Phi^{1/2}, the
/// reduced ridge problem is diagonal and eta_j = sqrt(phi_j)/(phi_j + lambda) u_(j)'Y.
template <typename Scalar, typename DY>
EgregFit<Scalar> egreg_fit(const SvdFactors<Scalar>& svd, const EnvelopeScores<Scalar>& scores,
                           const Eigen::MatrixBase<DY>& y, Index d, Scalar lambda) {
  detail::check_d(d, svd);
  if (d > scores.d()) throw DimensionError("scores cover fewer than d PCs");
  if (!(lambda >= 0)) throw ParameterError("EgReg lambda must be nonnegative");
  const std::vector<Index> ranked = scores.ranked_within(d);
  EgregFit<Scalar> f;
  f.gamma_hat.resize(svd.p(), d);
  f.eta.resize(d, y.cols());
  for (Index k = 0; k < d; ++k) {
    const Index j = ranked[static_cast<std::size_t>(k)];
    const Scalar phi = scores.phi(j);
    const Scalar root = std::sqrt(phi);
    f.gamma_hat.col(k) = svd.V.col(j) * (root / svd.D(j));
    if (phi + lambda > 0) {
      f.eta.row(k) = (svd.U.col(j).transpose() * y) * (root / (phi + lambda));
    } else {
      f.eta.row(k).setZero();
      f.zero_score_limit = true;
    }
  }
  f.beta = f.gamma_hat * f.eta;
  return f;
}

template <typename Scalar>
struct SimplsPath {
  Mat<Scalar> R;  ///< p x a weights, X R gives the unit-norm scores
  Mat<Scalar> Q;  ///< q x a response loadings
  Index components() const { return R.cols(); }
  bool early_stop = false;

  /// Coefficients using the first `a` components.
  Mat<Scalar> coefficients(Index a) const {
    return R.leftCols(a) * Q.leftCols(a).transpose();
  }
};

inline constexpr double kSimplsDeflationTol = 1e-12;

/// SIMPLS for centered X and Y: each weight vector is the dominant left
/// singular vector of the current cross-product S, and S is deflated by the
/// orthonormalized X-loadings. Stops early once S vanishes.
template <typename DX, typename DY>
SimplsPath<typename DX::Scalar> simpls_path(const Eigen::MatrixBase<DX>& x,
                                            const Eigen::MatrixBase<DY>& y, Index max_comp) {
  using Scalar = typename DX::Scalar;
  const Index p = x.cols();
  const Index q = y.cols();
  Mat<Scalar> s = x.transpose() * y;
  const Scalar stop = static_cast<Scalar>(kSimplsDeflationTol) * x.norm() * y.norm();
  Mat<Scalar> r_all(p, max_comp), q_all(q, max_comp), v_all(p, max_comp);
  Index a = 0;
  SimplsPath<Scalar> path;
  for (; a < max_comp; ++a) {
    if (!(s.norm() > stop)) break;
    Vec<Scalar> w;
    if (q == 1) {
      w = s.col(0);
    } else {
      Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(s.transpose() * s);
      w = s * es.eigenvectors().col(q - 1);
    }
    Vec<Scalar> t = x * w;
    const Scalar tn = t.norm();
    if (!(tn > 0)) break;
    t /= tn;
    w /= tn;
    Vec<Scalar> v = x.transpose() * t;
    for (int pass = 0; pass < 2 && a > 0; ++pass) {
      v -= v_all.leftCols(a) * (v_all.leftCols(a).transpose() * v);
    }
    const Scalar vn = v.norm();
    if (!(vn > 0)) break;
    v /= vn;
    r_all.col(a) = w;
    q_all.col(a) = y.transpose() * t;
    v_all.col(a) = v;
    s -= v * (v.transpose() * s);
  }
  path.R = r_all.leftCols(a);
  path.Q = q_all.leftCols(a);
  path.early_stop = a < max_comp;
  return path;
}

// ---------------------------------------------------------------------------
// Fits on a dataset. Uncentered input is centered first and the shift kept in
// the model's transform.

template <typename Scalar>
FittedModel<Scalar> fit_pcr(const Dataset<Scalar>& data, Index d) {
  const Dataset<Scalar> c = detail::ensure_centered(data);
  const SvdFactors<Scalar> svd = thin_svd(c.X);
  FittedModel<Scalar> m;
  m.beta = pcr_coefficients(svd, c.Y, d);
  m.method = Method::pcr;
  m.params.d = d;
  m.transform = c.transform;
  return m;
}

template <typename Scalar>
FittedModel<Scalar> fit_ridge(const Dataset<Scalar>& data, Scalar lambda) {
  if (!(lambda > 0)) throw ParameterError("ridge lambda must be positive");
  const Dataset<Scalar> c = detail::ensure_centered(data);
  const SvdFactors<Scalar> svd = thin_svd(c.X);
  FittedModel<Scalar> m;
  m.beta = ridge_coefficients(svd, c.Y, lambda);
  m.method = Method::ridge;
  m.params.lambda = static_cast<double>(lambda);
  m.transform = c.transform;
  return m;
}

/// NIECE with u PCs selected among the leading d by envelope score.
template <typename Scalar>
FittedModel<Scalar> fit_niece(const Dataset<Scalar>& data, Index u, Index d) {
  const Dataset<Scalar> c = detail::ensure_centered(data);
  const SvdFactors<Scalar> svd = thin_svd(c.X);
  detail::check_d(d, svd);
  const EnvelopeScores<Scalar> scores = envelope_scores(svd, cross_cov(c).Sxy, d);
  FittedModel<Scalar> m;
  m.beta = niece_coefficients(svd, scores, c.Y, u, d);
  m.method = Method::niece;
  m.params.u = u;
  m.params.d = d;
  m.transform = c.transform;
  return m;
}

/// NIECE with d defaulting to the numerical rank of X.
template <typename Scalar>
FittedModel<Scalar> fit_niece(const Dataset<Scalar>& data, Index u) {
  const Dataset<Scalar> c = detail::ensure_centered(data);
  return fit_niece(c, u, thin_svd(c.X).rank());
}

template <typename Scalar>
FittedModel<Scalar> fit_egreg(const Dataset<Scalar>& data, Index d, Scalar lambda) {
  if (!(lambda >= 0)) throw ParameterError("EgReg lambda must be nonnegative");
  const Dataset<Scalar> c = detail::ensure_centered(data);
  const SvdFactors<Scalar> svd = thin_svd(c.X);
  detail::check_d(d, svd);
  const EnvelopeScores<Scalar> scores = envelope_scores(svd, cross_cov(c).Sxy, d);
  EgregFit<Scalar> f = egreg_fit(svd, scores, c.Y, d, lambda);
  FittedModel<Scalar> m;
  m.beta = std::move(f.beta);
  m.gamma_hat = std::move(f.gamma_hat);
  m.zero_score_limit = f.zero_score_limit;
  m.method = Method::egreg;
  m.params.d = d;
  m.params.lambda = static_cast<double>(lambda);
  m.transform = c.transform;
  return m;
}

template <typename Scalar>
FittedModel<Scalar> fit_simpls(const Dataset<Scalar>& data, Index d) {
  const Dataset<Scalar> c = detail::ensure_centered(data);
  const SvdFactors<Scalar> svd = thin_svd(c.X);
  detail::check_d(d, svd);
  const SimplsPath<Scalar> path = simpls_path(c.X, c.Y, d);
  FittedModel<Scalar> m;
  m.beta = path.components() > 0 ? path.coefficients(path.components())
                                 : Mat<Scalar>::Zero(c.p(), c.q());
  m.method = Method::simpls;
  m.params.d = d;
  m.params.components = path.components();
  m.early_stop = path.early_stop;
  m.transform = c.transform;
  return m;
}

/// Predictions for predictors on the original (pre-transform) scale; the
/// result is on the original response scale.
template <typename Scalar, typename Derived>
Mat<Scalar> predict(const FittedModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x_new) {
  if (x_new.cols() != model.p()) {
    throw ShapeError("model expects " + std::to_string(model.p()) + " predictors, got " +
                     std::to_string(x_new.cols()));
  }
  const Mat<Scalar> xt = model.transform.apply_x(x_new);
  return model.transform.restore_y(xt * model.beta);
}

}  // namespace egreg
