#pragma once

// Data generators and the simulation study drivers. Within a study grid point
// X and beta* are drawn once; each replication redraws only the noise E.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "egreg/estimators.hpp"
#include "egreg/matrixcore.hpp"
#include "egreg/riskanalytics.hpp"

namespace egreg::sim {

enum class Spectrum {
  exponential_decay,  ///< eigenvalue i of Sigma_x is 10 exp(-decay_gamma (i - 1))
  unit                ///< every eigenvalue of Sigma_x is 1
};

/// Predictor envelope model y' = x' V_P alpha + eps' with Sigma_x = V diag(eig) V'.
struct EnvelopeSimConfig {
  Index n = 100;
  Index p = 0;
  Index q = 1;
  double decay_gamma = 1.0;
  Spectrum spectrum = Spectrum::exponential_decay;
  std::vector<Index> P;  ///< 1-based eigenvector indices spanning the envelope
  MatrixXd alpha;        ///< |P| x q
  MatrixXd Sigma_eps;    ///< q x q
  std::uint64_t seed = 1;
  Index replications = 100;

  Index u_star() const { return static_cast<Index>(P.size()); }
  void validate() const;
};

/// A generated design: fixed X and truth, with the noise redrawn per replication.
struct SimDesign {
  Datasetd data;           ///< raw X and the response of replication 0
  TruthSpecd truth;
  MatrixXd planted_basis;  ///< p x u* envelope basis V_P; empty for baseline designs
  VectorXd eigenvalues;    ///< eigenvalues of Sigma_x in generator order
  MatrixXd eps_factor;     ///< lower Cholesky factor of Sigma_eps
  std::uint64_t seed = 0;

  /// X beta* + E with E drawn from the replication's own stream.
  MatrixXd response(Index replication) const;
};

/// Eigenvalue i (0-based) of the generator's Sigma_x.
double envelope_eigenvalue(const EnvelopeSimConfig& cfg, Index i);

SimDesign gen_envelope_model(const EnvelopeSimConfig& cfg);

enum class BaselineKind { ar1, cs };

/// AR1: rho^|i-j|.  CS: rho 11' + (1 - rho) I.
MatrixXd baseline_covariance(BaselineKind kind, Index p, double rho);

/// (2, -2, 1, -1, 1/2, -1/2, 0, ..., 0), truncated when p < 6.
VectorXd default_baseline_beta(Index p);

SimDesign gen_baseline(BaselineKind kind, Index n, Index p, double rho,
                       const std::optional<VectorXd>& beta_star, double sigma_eps_sq,
                       std::uint64_t seed);

enum class StudyKind { p1, u_star, baseline, double_descent };
enum class StudyMethod { pcr, ridge, niece, egreg, egreg_r, simpls };

std::string_view study_kind_name(StudyKind k);
std::optional<StudyKind> parse_study_kind(std::string_view s);
std::string_view study_method_name(StudyMethod m);
std::optional<StudyMethod> parse_study_method(std::string_view s);
std::string_view baseline_kind_name(BaselineKind k);
std::optional<BaselineKind> parse_baseline_kind(std::string_view s);

struct TunerConfig {
  Index folds = 10;
  Index lambda_count = 50;
  /// Upper bound on d and u grids.
  Index max_components = 230;
};

struct StudyConfig {
  StudyKind kind = StudyKind::p1;
  Index n = 100;
  Index replications = 100;
  std::uint64_t seed = 1;
  /// p/n ratios, or u*/n ratios for the double-descent study.
  std::vector<double> grid;
  std::vector<StudyMethod> methods;
  TunerConfig tuner;
  unsigned threads = 1;

  double decay_gamma = 1.0;
  /// Noise variance; the baseline study defaults to 1.
  double sigma_eps_sq = 10.0;
  Index p1_start = 7;
  /// u* for the envelope-dimension study; absent means min(n, p) / 2.
  std::optional<Index> u_star;
  BaselineKind baseline_kind = BaselineKind::ar1;
  double rho = 0.5;

  /// Grid, methods and fixed settings used for each study in its reference setup.
  static StudyConfig defaults(StudyKind kind);
  void validate() const;
};

struct MethodRisk {
  StudyMethod method;
  double risk = 0;  ///< empirical risk over the replications
  double se = 0;    ///< Monte Carlo standard error
};

struct GridPointResult {
  double grid_value = 0;
  Index p = 0;
  Index u_star = 0;  ///< 0 for baseline designs
  std::vector<MethodRisk> risks;

  double risk(StudyMethod m) const;
};

struct StudyResult {
  StudyConfig config;
  std::vector<GridPointResult> points;

  /// study,grid_value,n,p,u_star,method,risk,se,replications; 17 significant digits.
  std::string to_csv() const;
};

/// The design for one grid point, seeded from the study seed and grid index.
SimDesign study_design(const StudyConfig& cfg, std::size_t grid_index);

StudyResult run_study(const StudyConfig& cfg);

}  // namespace egreg::sim
