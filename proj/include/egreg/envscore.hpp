#pragma once

// Envelope scores and the NIECE subspace construction, both from population
// matrices (M, B) and from a sample SVD.

#include <Eigen/Dense>

#include <algorithm>
#include <numeric>
#include <vector>

#include "egreg/matrixcore.hpp"

namespace egreg {

/// Scores phi_j for the leading d singular directions, kept in original PC
/// order, plus the ranking that sorts them.
template <typename Scalar>
struct EnvelopeScores {
  Vec<Scalar> phi;
  /// 0-based PC indices sorted by descending phi. Ties go to the larger
  /// singular value, then to the smaller index.
  std::vector<Index> order;
  /// Groups of PC indices sharing an identical score.
  std::vector<std::vector<Index>> tie_breaks;

  Index d() const { return phi.size(); }

  /// Ranking restricted to the leading `d` PCs (indices < d), order preserved.
  std::vector<Index> ranked_within(Index d) const {
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(d));
    for (Index j : order) {
      if (j < d) out.push_back(j);
    }
    return out;
  }
};

using EnvelopeScoresd = EnvelopeScores<double>;

enum class BasisSource { population, sample };

template <typename Scalar>
struct EnvelopeBasis {
  Mat<Scalar> basis;  ///< p x u, orthonormal columns
  Index u = 0;
  BasisSource source = BasisSource::sample;
  /// False when the eigenvalues of M were not distinct, in which case the
  /// eigenvectors (and so the returned span) are not uniquely determined.
  bool unique = true;
  EnvelopeScores<Scalar> scores;
};

using EnvelopeBasisd = EnvelopeBasis<double>;

namespace detail {

template <typename Scalar>
EnvelopeScores<Scalar> rank_scores(Vec<Scalar> phi, const Vec<Scalar>& spectrum) {
  EnvelopeScores<Scalar> s;
  phi = phi.cwiseMax(Scalar(0));
  s.phi = std::move(phi);
  const Index d = s.phi.size();
  s.order.resize(static_cast<std::size_t>(d));
  std::iota(s.order.begin(), s.order.end(), Index{0});
  std::sort(s.order.begin(), s.order.end(), [&](Index a, Index b) {
    if (s.phi(a) != s.phi(b)) return s.phi(a) > s.phi(b);
    if (spectrum(a) != spectrum(b)) return spectrum(a) > spectrum(b);
    return a < b;
  });
  for (std::size_t i = 0; i < s.order.size();) {
    std::size_t j = i + 1;
    while (j < s.order.size() && s.phi(s.order[j]) == s.phi(s.order[i])) ++j;
    if (j - i > 1) {
      s.tie_breaks.emplace_back(s.order.begin() + static_cast<std::ptrdiff_t>(i),
                                s.order.begin() + static_cast<std::ptrdiff_t>(j));
    }
    i = j;
  }
  return s;
}

template <typename Scalar>
Mat<Scalar> select_columns(const Mat<Scalar>& m, const std::vector<Index>& idx) {
  Mat<Scalar> out(m.rows(), static_cast<Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Index>(k)) = m.col(idx[k]);
  return out;
}

}  // namespace detail

/// phi_j = v_j' Sxy Syx v_j = ||Sxy' v_j||^2 for the leading d right singular vectors.
template <typename Scalar, typename Derived>
EnvelopeScores<Scalar> envelope_scores(const SvdFactors<Scalar>& svd,
                                       const Eigen::MatrixBase<Derived>& sxy, Index d) {
  if (d < 1 || d > svd.rank()) {
    throw DimensionError("envelope score count d=" + std::to_string(d) +
                         " must lie in [1, r=" + std::to_string(svd.rank()) + "]");
  }
  if (sxy.rows() != svd.p()) throw ShapeError("Sxy row count must equal p");
  const Mat<Scalar> proj = sxy.transpose() * svd.V.leftCols(d);  // q x d
  return detail::rank_scores<Scalar>(proj.colwise().squaredNorm().transpose(), svd.D.head(d));
}

/// Same scores computed from a centered response through X'Y/n = V D U'Y/n,
/// which avoids forming Sxy when the SVD is already available.
template <typename Scalar, typename Derived>
EnvelopeScores<Scalar> sample_envelope_scores(const SvdFactors<Scalar>& svd,
                                              const Eigen::MatrixBase<Derived>& y, Index d) {
  if (d < 1 || d > svd.rank()) {
    throw DimensionError("envelope score count d=" + std::to_string(d) +
                         " must lie in [1, r=" + std::to_string(svd.rank()) + "]");
  }
  if (y.rows() != svd.n()) throw ShapeError("response row count must equal n");
  const Scalar n = static_cast<Scalar>(svd.n());
  const Mat<Scalar> uty = svd.U.leftCols(d).transpose() * y;  // d x q
  const Vec<Scalar> phi =
      (svd.D.head(d).array().square() * uty.rowwise().squaredNorm().array()) / (n * n);
  return detail::rank_scores<Scalar>(phi, svd.D.head(d));
}

inline constexpr double kEigenGapTol = 1e-8;

/// NIECE from population matrices: the span of the u_star eigenvectors of M
/// (among its leading d) with the largest scores v_j' B v_j.
template <typename DM, typename DB>
EnvelopeBasis<typename DM::Scalar> population_niece(const Eigen::MatrixBase<DM>& m,
                                                    const Eigen::MatrixBase<DB>& b, Index d,
                                                    Index u_star) {
  using Scalar = typename DM::Scalar;
  const Index p = m.rows();
  if (m.cols() != p || b.rows() != p || b.cols() != p) {
    throw ShapeError("population_niece needs square M and B of equal size");
  }
  if (u_star < 1 || u_star > d || d > p) {
    throw DimensionError("population_niece needs 0 < u* <= d <= p");
  }
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> es(Mat<Scalar>(m), Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw ContractError("eigendecomposition of M failed");
  // Descending order.
  const Vec<Scalar> evals = es.eigenvalues().reverse();
  Mat<Scalar> evecs = es.eigenvectors().rowwise().reverse();
  if (!(evals(p - 1) > 0)) throw ContractError("M must be positive definite");

  EnvelopeBasis<Scalar> out;
  out.source = BasisSource::population;
  for (Index j = 0; j + 1 < p; ++j) {
    if ((evals(j) - evals(j + 1)) <= static_cast<Scalar>(kEigenGapTol) * evals(0)) {
      out.unique = false;
    }
  }
  for (Index j = 0; j < p; ++j) {
    Index arg = 0;
    evecs.col(j).cwiseAbs().maxCoeff(&arg);
    if (evecs(arg, j) < 0) evecs.col(j) *= Scalar(-1);
  }
  const Mat<Scalar> vd = evecs.leftCols(d);
  const Mat<Scalar> bv = Mat<Scalar>(b) * vd;
  const Vec<Scalar> phi = vd.cwiseProduct(bv).colwise().sum().transpose();
  out.scores = detail::rank_scores<Scalar>(phi, evals.head(d));
  const std::vector<Index> top(out.scores.order.begin(),
                               out.scores.order.begin() + static_cast<std::ptrdiff_t>(u_star));
  out.basis = detail::select_columns(vd, top);
  out.u = u_star;
  return out;
}

/// Sample NIECE basis: the columns of V-hat at the top-u ranked scores.
template <typename Scalar>
EnvelopeBasis<Scalar> sample_niece_basis(const SvdFactors<Scalar>& svd,
                                         const EnvelopeScores<Scalar>& scores, Index u) {
  if (u < 1 || u > scores.d()) {
    throw DimensionError("NIECE dimension u=" + std::to_string(u) + " must lie in [1, d=" +
                         std::to_string(scores.d()) + "]");
  }
  EnvelopeBasis<Scalar> out;
  const std::vector<Index> top(scores.order.begin(),
                               scores.order.begin() + static_cast<std::ptrdiff_t>(u));
  out.basis = detail::select_columns(svd.V, top);
  out.u = u;
  out.source = BasisSource::sample;
  out.scores = scores;
  return out;
}

}  // namespace egreg
