#pragma once

// Dense foundation shared by every estimator: data containers, centering and
// standardization, the thin SVD with a deterministic sign convention, sample
// cross-covariances and a subspace distance.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "egreg/errors.hpp"

namespace egreg {

using Index = Eigen::Index;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using MatrixXd = Mat<double>;
using VectorXd = Vec<double>;
using RowVectorXd = RowVec<double>;

enum class Scaling { center, standardize };

/// Column shifts and scales applied at ingestion, kept so that new predictors
/// can be mapped into the fitted coordinate system and predictions mapped back.
template <typename Scalar>
struct Transform {
  RowVec<Scalar> x_mean;
  RowVec<Scalar> x_scale;
  RowVec<Scalar> y_mean;
  RowVec<Scalar> y_scale;

  static Transform identity(Index p, Index q) {
    return {RowVec<Scalar>::Zero(p), RowVec<Scalar>::Ones(p), RowVec<Scalar>::Zero(q),
            RowVec<Scalar>::Ones(q)};
  }

  Index p() const { return x_mean.size(); }
  Index q() const { return y_mean.size(); }

  template <typename Derived>
  Mat<Scalar> apply_x(const Eigen::MatrixBase<Derived>& x_raw) const {
    if (x_raw.cols() != p()) {
      throw ShapeError("predictor matrix has " + std::to_string(x_raw.cols()) +
                       " columns, transform expects " + std::to_string(p()));
    }
    return ((x_raw.rowwise() - x_mean).array().rowwise() / x_scale.array()).matrix();
  }

  template <typename Derived>
  Mat<Scalar> apply_y(const Eigen::MatrixBase<Derived>& y_raw) const {
    if (y_raw.cols() != q()) throw ShapeError("response column count mismatch");
    return ((y_raw.rowwise() - y_mean).array().rowwise() / y_scale.array()).matrix();
  }

  template <typename Derived>
  Mat<Scalar> restore_y(const Eigen::MatrixBase<Derived>& y_fit) const {
    if (y_fit.cols() != q()) throw ShapeError("response column count mismatch");
    return ((y_fit.array().rowwise() * y_scale.array()).matrix().rowwise() + y_mean);
  }
};

/// Predictor matrix X (n x p) and response matrix Y (n x q).
template <typename Scalar>
struct Dataset {
  Mat<Scalar> X;
  Mat<Scalar> Y;
  bool centered = false;
  bool standardized = false;
  Transform<Scalar> transform;

  Dataset() = default;

  template <typename DX, typename DY>
  Dataset(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DY>& y) : X(x), Y(y) {
    if (X.rows() < 2) throw ShapeError("dataset needs at least two rows");
    if (X.cols() < 1 || Y.cols() < 1) throw ShapeError("dataset needs p >= 1 and q >= 1");
    if (X.rows() != Y.rows()) {
      throw ShapeError("X has " + std::to_string(X.rows()) + " rows but Y has " +
                       std::to_string(Y.rows()));
    }
    transform = Transform<Scalar>::identity(X.cols(), Y.cols());
  }

  Index n() const { return X.rows(); }
  Index p() const { return X.cols(); }
  Index q() const { return Y.cols(); }
};

using Datasetd = Dataset<double>;

namespace detail {

template <typename Scalar>
RowVec<Scalar> column_sd(const Mat<Scalar>& centered) {
  const Scalar denom = static_cast<Scalar>(centered.rows() - 1);
  return (centered.colwise().squaredNorm() / denom).array().sqrt().matrix();
}

template <typename Scalar>
void check_scale(const RowVec<Scalar>& sd, const Mat<Scalar>& raw, const char* which) {
  for (Index j = 0; j < sd.size(); ++j) {
    const Scalar mag = raw.col(j).cwiseAbs().maxCoeff();
    if (!(sd(j) > 64 * std::numeric_limits<Scalar>::epsilon() * mag)) {
      throw DegenerateColumnError(std::string("constant ") + which + " column " +
                                      std::to_string(j) + " cannot be standardized",
                                  j);
    }
  }
}

template <typename Derived>
bool columns_centered(const Eigen::MatrixBase<Derived>& m, double tol = 1e-10) {
  using Scalar = typename Derived::Scalar;
  for (Index j = 0; j < m.cols(); ++j) {
    const Scalar mean = m.col(j).mean();
    const Scalar mag = m.col(j).cwiseAbs().maxCoeff();
    if (std::abs(mean) > tol * std::max<Scalar>(Scalar(1), mag)) return false;
  }
  return true;
}

}  // namespace detail

/// Center (and optionally scale to unit sample standard deviation, divisor
/// n - 1) every column of X and Y. The shifts and scales are stored in the
/// returned dataset's transform, composed with any transform already present.
template <typename Scalar>
Dataset<Scalar> center_standardize(const Dataset<Scalar>& raw, Scaling mode) {
  Dataset<Scalar> out = raw;
  const RowVec<Scalar> xm = raw.X.colwise().mean();
  const RowVec<Scalar> ym = raw.Y.colwise().mean();
  out.X = raw.X.rowwise() - xm;
  out.Y = raw.Y.rowwise() - ym;
  RowVec<Scalar> xs = RowVec<Scalar>::Ones(raw.p());
  RowVec<Scalar> ys = RowVec<Scalar>::Ones(raw.q());
  if (mode == Scaling::standardize) {
    xs = detail::column_sd(out.X);
    ys = detail::column_sd(out.Y);
    detail::check_scale(xs, raw.X, "predictor");
    detail::check_scale(ys, raw.Y, "response");
    out.X = (out.X.array().rowwise() / xs.array()).matrix();
    out.Y = (out.Y.array().rowwise() / ys.array()).matrix();
  }
  // Compose with the incoming transform: raw = prev_mean + prev_scale * (mean + scale * z).
  const Transform<Scalar>& prev = raw.transform;
  out.transform.x_mean = prev.x_mean + (prev.x_scale.array() * xm.array()).matrix();
  out.transform.x_scale = (prev.x_scale.array() * xs.array()).matrix();
  out.transform.y_mean = prev.y_mean + (prev.y_scale.array() * ym.array()).matrix();
  out.transform.y_scale = (prev.y_scale.array() * ys.array()).matrix();
  out.centered = true;
  out.standardized = raw.standardized || mode == Scaling::standardize;
  return out;
}

/// Thin SVD X = U diag(D) V' truncated to the numerical rank.
template <typename Scalar>
struct SvdFactors {
  Mat<Scalar> U;  ///< n x r, orthonormal columns
  Vec<Scalar> D;  ///< r singular values, descending, positive
  Mat<Scalar> V;  ///< p x r, orthonormal columns

  Index rank() const { return D.size(); }
  Index n() const { return U.rows(); }
  Index p() const { return V.rows(); }
};

using SvdFactorsd = SvdFactors<double>;

inline constexpr double kDefaultRankTol = 1e-10;

/// Singular values not exceeding rel_tol * sigma_1 are dropped. Each column of
/// V is signed so that its largest-magnitude entry is positive (first such
/// entry on exact ties); the matching column of U is flipped with it.
template <typename Derived>
SvdFactors<typename Derived::Scalar> thin_svd(const Eigen::MatrixBase<Derived>& x,
                                              double rel_tol = kDefaultRankTol) {
  using Scalar = typename Derived::Scalar;
  if (!(rel_tol > 0)) throw ParameterError("rank tolerance must be positive");
  if (x.rows() == 0 || x.cols() == 0) throw RankError("empty matrix has rank zero");
  const Mat<Scalar> xm = x;
  Eigen::BDCSVD<Mat<Scalar>> svd(xm, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec<Scalar>& s = svd.singularValues();
  if (s.size() == 0 || !(s(0) > 0)) throw RankError("all-zero matrix has rank zero");
  Index r = 0;
  while (r < s.size() && s(r) > static_cast<Scalar>(rel_tol) * s(0)) ++r;

  SvdFactors<Scalar> f;
  f.U = svd.matrixU().leftCols(r);
  f.D = s.head(r);
  f.V = svd.matrixV().leftCols(r);
  for (Index j = 0; j < r; ++j) {
    Index arg = 0;
    f.V.col(j).cwiseAbs().maxCoeff(&arg);
    if (f.V(arg, j) < 0) {
      f.V.col(j) *= Scalar(-1);
      f.U.col(j) *= Scalar(-1);
    }
  }
  return f;
}

/// Sample covariance Sx = X'X/n and cross-covariance Sxy = X'Y/n.
template <typename Scalar>
struct CovPair {
  Mat<Scalar> Sx;
  Mat<Scalar> Sxy;
};

template <typename Scalar>
CovPair<Scalar> cross_cov(const Dataset<Scalar>& data) {
  if (!detail::columns_centered(data.X) || !detail::columns_centered(data.Y)) {
    throw ContractError("cross_cov requires column-centered X and Y");
  }
  const Scalar n = static_cast<Scalar>(data.n());
  CovPair<Scalar> c;
  c.Sx = (data.X.transpose() * data.X) / n;
  c.Sx = Scalar(0.5) * (c.Sx + c.Sx.transpose()).eval();
  c.Sxy = (data.X.transpose() * data.Y) / n;
  return c;
}

template <typename Derived>
bool is_orthonormal(const Eigen::MatrixBase<Derived>& a, double tol = 1e-8) {
  using Scalar = typename Derived::Scalar;
  const Mat<Scalar> gram = a.transpose() * a;
  return (gram - Mat<Scalar>::Identity(a.cols(), a.cols())).cwiseAbs().maxCoeff() <= tol;
}

/// Frobenius distance ||AA' - BB'|| between the column spaces of two
/// orthonormal bases of equal size.
template <typename DA, typename DB>
typename DA::Scalar subspace_distance(const Eigen::MatrixBase<DA>& a,
                                      const Eigen::MatrixBase<DB>& b) {
  using Scalar = typename DA::Scalar;
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("subspace_distance needs bases of identical shape");
  }
  if (!is_orthonormal(a) || !is_orthonormal(b)) {
    throw ContractError("subspace_distance needs orthonormal bases");
  }
  const Mat<Scalar> diff = a * a.transpose() - b * b.transpose();
  return diff.norm();
}

}  // namespace egreg
