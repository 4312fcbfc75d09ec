#pragma once

// k-fold cross-validation over a parameter grid for any of the five methods.
// A CvPlan caches the per-fold SVDs of X so that many responses (simulation
// replications) can be scored against the same predictor matrix cheaply.

#include <cstdint>
#include <vector>

#include "egreg/estimators.hpp"
#include "egreg/matrixcore.hpp"

namespace egreg::sim {

struct CvPoint {
  ModelParams params;
  double score = 0;  ///< held-out squared error summed over responses, averaged over rows
};

struct CvResult {
  ModelParams best;
  double best_score = 0;
  std::vector<CvPoint> table;
};

/// Seeded shuffle of 0..n-1 cut into k contiguous blocks (sizes differ by at most one).
std::vector<std::vector<Index>> fold_partition(Index n, Index k, std::uint64_t seed);

/// `count` values equally spaced on the log scale from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, Index count);

class CvPlan {
 public:
  CvPlan(const MatrixXd& x, Index k, std::uint64_t seed);

  Index folds() const { return static_cast<Index>(folds_.size()); }
  Index n() const { return n_; }
  /// Smallest numerical rank among the training folds.
  Index min_rank() const;
  const std::vector<std::vector<Index>>& partition() const { return partition_; }

  /// Scores every grid point. For NIECE and EgReg an absent d means the rank
  /// of each training fold.
  CvResult evaluate(const MatrixXd& y, Method method, const std::vector<ModelParams>& grid) const;

  /// Out-of-fold predictions (n x q, original row order) for one parameter set.
  MatrixXd held_out_predictions(const MatrixXd& y, Method method,
                                const ModelParams& params) const;

 private:
  struct Fold {
    std::vector<Index> train;
    std::vector<Index> test;
    MatrixXd x_train;  ///< centered on the training mean
    MatrixXd x_test;   ///< centered on the training mean
    SvdFactorsd svd;
    MatrixXd x_test_v;  ///< x_test * V
  };

  std::vector<MatrixXd> fold_predictions(const MatrixXd& y, Method method,
                                         const std::vector<ModelParams>& grid) const;

  Index n_ = 0;
  std::vector<std::vector<Index>> partition_;
  std::vector<Fold> folds_;
};

/// Tunes `method` over `grid` by k-fold CV. Ties in the score go to the
/// smaller u, then the smaller d, then the larger lambda.
CvResult kfold_cv(const Datasetd& data, Method method, const std::vector<ModelParams>& grid,
                  Index k, std::uint64_t seed);

}  // namespace egreg::sim
