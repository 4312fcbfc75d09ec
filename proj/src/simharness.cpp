#include "egreg/simharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include "egreg/crossval.hpp"
#include "egreg/envscore.hpp"
#include "egreg/parallel.hpp"
#include "egreg/rng.hpp"

namespace egreg::sim {

namespace {

constexpr std::uint64_t kDesignStream = 0;
constexpr std::uint64_t kFoldStream = 0xC0FFEEULL;

MatrixXd lower_cholesky(const MatrixXd& m, const char* name) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw ContractError(std::string(name) + " must be positive definite");
  }
  return llt.matrixL();
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of R's diagonal moved into Q.
MatrixXd random_orthogonal(Index p, Rng& rng) {
  const MatrixXd z = standard_normal(p, p, rng);
  Eigen::HouseholderQR<MatrixXd> qr(z);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(p, p);
  const MatrixXd& r = qr.matrixQR();
  for (Index j = 0; j < p; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

std::string fmt17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<ModelParams> component_grid(Index upper, Index start, Index step, bool as_u) {
  std::vector<ModelParams> grid;
  if (upper < start) {
    ModelParams p;
    if (as_u) p.u = std::max<Index>(1, upper); else p.d = std::max<Index>(1, upper);
    grid.push_back(p);
    return grid;
  }
  for (Index k = start; k <= upper; k += step) {
    ModelParams p;
    if (as_u) p.u = k; else p.d = k;
    grid.push_back(p);
  }
  return grid;
}

double prediction_risk(const MatrixXd& beta, const TruthSpecd& truth) {
  const MatrixXd diff = beta - truth.beta_star;
  return (diff.transpose() * truth.Sigma_x * diff).trace();
}

}  // namespace

void EnvelopeSimConfig::validate() const {
  if (n < 2 || p < 1 || q < 1) throw ParameterError("envelope design needs n >= 2, p >= 1, q >= 1");
  if (P.empty()) throw ParameterError("envelope index set P is empty");
  std::set<Index> seen;
  for (Index i : P) {
    if (i < 1 || i > p) {
      throw DimensionError("envelope index " + std::to_string(i) + " outside 1.." +
                           std::to_string(p));
    }
    if (!seen.insert(i).second) throw ParameterError("envelope index set P has duplicates");
  }
  if (alpha.rows() != u_star() || alpha.cols() != q) {
    throw ShapeError("alpha must be |P| x q");
  }
  if (Sigma_eps.rows() != q || Sigma_eps.cols() != q) throw ShapeError("Sigma_eps must be q x q");
  if (spectrum == Spectrum::exponential_decay && !(decay_gamma > 0)) {
    throw ParameterError("eigenvalue decay rate must be positive");
  }
  if (replications < 1) throw ParameterError("replications must be positive");
}

double envelope_eigenvalue(const EnvelopeSimConfig& cfg, Index i) {
  if (cfg.spectrum == Spectrum::unit) return 1.0;
  return 10.0 * std::exp(-cfg.decay_gamma * static_cast<double>(i));
}

MatrixXd SimDesign::response(Index replication) const {
  Rng rng = make_stream(seed, 1 + static_cast<std::uint64_t>(replication));
  const MatrixXd e = standard_normal(data.n(), truth.q(), rng) * eps_factor.transpose();
  return data.X * truth.beta_star + e;
}

SimDesign gen_envelope_model(const EnvelopeSimConfig& cfg) {
  cfg.validate();
  SimDesign out;
  out.seed = cfg.seed;
  out.eps_factor = lower_cholesky(cfg.Sigma_eps, "Sigma_eps");
  Rng rng = make_stream(cfg.seed, kDesignStream);
  const MatrixXd v = random_orthogonal(cfg.p, rng);
  out.eigenvalues.resize(cfg.p);
  for (Index i = 0; i < cfg.p; ++i) out.eigenvalues(i) = envelope_eigenvalue(cfg, i);

  MatrixXd sigma_x = v * out.eigenvalues.asDiagonal() * v.transpose();
  sigma_x = 0.5 * (sigma_x + sigma_x.transpose()).eval();
  out.planted_basis.resize(cfg.p, cfg.u_star());
  for (Index k = 0; k < cfg.u_star(); ++k) {
    out.planted_basis.col(k) = v.col(cfg.P[static_cast<std::size_t>(k)] - 1);
  }
  out.truth.beta_star = out.planted_basis * cfg.alpha;
  out.truth.Sigma_x = std::move(sigma_x);
  out.truth.Sigma_eps = cfg.Sigma_eps;

  const VectorXd root = out.eigenvalues.cwiseSqrt();
  const MatrixXd x = standard_normal(cfg.n, cfg.p, rng) * root.asDiagonal() * v.transpose();
  out.data = Datasetd(x, MatrixXd::Zero(cfg.n, cfg.q));
  out.data.Y = out.response(0);
  return out;
}

MatrixXd baseline_covariance(BaselineKind kind, Index p, double rho) {
  if (!(rho >= 0 && rho < 1)) throw ParameterError("rho must lie in [0, 1)");
  if (p < 1) throw ParameterError("baseline covariance needs p >= 1");
  MatrixXd s(p, p);
  for (Index i = 0; i < p; ++i) {
    for (Index j = 0; j < p; ++j) {
      if (kind == BaselineKind::ar1) {
        s(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
      } else {
        s(i, j) = i == j ? 1.0 : rho;
      }
    }
  }
  return s;
}

VectorXd default_baseline_beta(Index p) {
  const double head[] = {2, -2, 1, -1, 0.5, -0.5};
  VectorXd b = VectorXd::Zero(p);
  for (Index i = 0; i < std::min<Index>(p, 6); ++i) b(i) = head[i];
  return b;
}

SimDesign gen_baseline(BaselineKind kind, Index n, Index p, double rho,
                       const std::optional<VectorXd>& beta_star, double sigma_eps_sq,
                       std::uint64_t seed) {
  if (n < 2) throw ParameterError("baseline design needs n >= 2");
  if (!(sigma_eps_sq > 0)) throw ParameterError("noise variance must be positive");
  SimDesign out;
  out.seed = seed;
  out.truth.Sigma_x = baseline_covariance(kind, p, rho);
  out.truth.beta_star = beta_star ? MatrixXd(*beta_star) : MatrixXd(default_baseline_beta(p));
  if (out.truth.beta_star.rows() != p) throw ShapeError("beta* must have p rows");
  out.truth.Sigma_eps = MatrixXd::Constant(1, 1, sigma_eps_sq);
  out.eps_factor = MatrixXd::Constant(1, 1, std::sqrt(sigma_eps_sq));
  const MatrixXd l = lower_cholesky(out.truth.Sigma_x, "Sigma_x");
  Rng rng = make_stream(seed, kDesignStream);
  const MatrixXd x = standard_normal(n, p, rng) * l.transpose();
  out.data = Datasetd(x, MatrixXd::Zero(n, 1));
  out.data.Y = out.response(0);
  return out;
}

std::string_view study_kind_name(StudyKind k) {
  switch (k) {
    case StudyKind::p1: return "P1";
    case StudyKind::u_star: return "u_star";
    case StudyKind::baseline: return "baseline";
    case StudyKind::double_descent: return "double_descent";
  }
  return "unknown";
}

std::optional<StudyKind> parse_study_kind(std::string_view s) {
  for (StudyKind k : {StudyKind::p1, StudyKind::u_star, StudyKind::baseline,
                      StudyKind::double_descent}) {
    if (study_kind_name(k) == s) return k;
  }
  return std::nullopt;
}

std::string_view study_method_name(StudyMethod m) {
  switch (m) {
    case StudyMethod::pcr: return "pcr";
    case StudyMethod::ridge: return "ridge";
    case StudyMethod::niece: return "niece";
    case StudyMethod::egreg: return "egreg";
    case StudyMethod::egreg_r: return "egreg_r";
    case StudyMethod::simpls: return "simpls";
  }
  return "unknown";
}

std::optional<StudyMethod> parse_study_method(std::string_view s) {
  for (StudyMethod m : {StudyMethod::pcr, StudyMethod::ridge, StudyMethod::niece,
                        StudyMethod::egreg, StudyMethod::egreg_r, StudyMethod::simpls}) {
    if (study_method_name(m) == s) return m;
  }
  if (s == "pls") return StudyMethod::simpls;
  return std::nullopt;
}

std::string_view baseline_kind_name(BaselineKind k) {
  return k == BaselineKind::ar1 ? "AR1" : "CS";
}

std::optional<BaselineKind> parse_baseline_kind(std::string_view s) {
  if (s == "AR1" || s == "ar1") return BaselineKind::ar1;
  if (s == "CS" || s == "cs") return BaselineKind::cs;
  return std::nullopt;
}

StudyConfig StudyConfig::defaults(StudyKind kind) {
  StudyConfig c;
  c.kind = kind;
  c.grid = {0.25, 0.5, 1, 2, 4};
  c.methods = {StudyMethod::pcr,   StudyMethod::ridge,   StudyMethod::niece,
               StudyMethod::egreg, StudyMethod::egreg_r, StudyMethod::simpls};
  if (kind == StudyKind::u_star) c.u_star = 5;
  if (kind == StudyKind::baseline) c.sigma_eps_sq = 1.0;
  if (kind == StudyKind::double_descent) {
    c.grid = {0.2, 0.5, 0.8, 1.0, 1.25, 2.0, 3.0, 5.0};
    c.methods = {StudyMethod::niece, StudyMethod::egreg, StudyMethod::egreg_r};
  }
  return c;
}

void StudyConfig::validate() const {
  if (n < 2) throw ParameterError("study needs n >= 2");
  if (replications < 1) throw ParameterError("study needs at least one replication");
  if (grid.empty()) throw ParameterError("study grid is empty");
  for (double g : grid) {
    if (!(g > 0)) throw ParameterError("study grid values must be positive");
  }
  if (methods.empty()) throw ParameterError("study needs at least one method");
  if (tuner.folds < 2 || tuner.folds > n) throw ParameterError("folds must lie in [2, n]");
  if (tuner.lambda_count < 1 || tuner.max_components < 1) {
    throw ParameterError("tuner grid sizes must be positive");
  }
  if (!(sigma_eps_sq > 0)) throw ParameterError("noise variance must be positive");
  if (kind == StudyKind::p1 && p1_start < 1) throw ParameterError("P(1) must be >= 1");
  if (kind == StudyKind::u_star && u_star && *u_star < 1) {
    throw ParameterError("u_star must be >= 1");
  }
  if (kind == StudyKind::baseline && !(rho >= 0 && rho < 1)) {
    throw ParameterError("rho must lie in [0, 1)");
  }
  // Building each design checks the per-grid-point feasibility constraints.
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Index g_p = std::lround(grid[i] * static_cast<double>(n));
    if (kind == StudyKind::double_descent) {
      const Index us = g_p;
      const Index p = std::lround(1.5 * static_cast<double>(us));
      if (us < 1 || p1_start + us - 1 > p) {
        throw ParameterError("double_descent grid value " + fmt17(grid[i]) + " gives u*=" +
                             std::to_string(us) + ", p=" + std::to_string(p) +
                             ": infeasible because P(1) + u* - 1 > p");
      }
    } else if (kind == StudyKind::p1) {
      if (p1_start + 9 > g_p) {
        throw ParameterError("P1 grid value " + fmt17(grid[i]) + " gives p=" +
                             std::to_string(g_p) + ": infeasible because P(1) + 9 > p");
      }
    } else if (kind == StudyKind::u_star) {
      const Index us = u_star ? *u_star : std::min(n, g_p) / 2;
      if (us < 1 || 2 * us - 1 > g_p) {
        throw ParameterError("u_star grid value " + fmt17(grid[i]) +
                             ": infeasible because 2u* - 1 > p");
      }
    } else if (g_p < 1) {
      throw ParameterError("baseline grid value gives p < 1");
    }
  }
}

double GridPointResult::risk(StudyMethod m) const {
  for (const MethodRisk& r : risks) {
    if (r.method == m) return r.risk;
  }
  throw ParameterError("method " + std::string(study_method_name(m)) + " not in study result");
}

std::string StudyResult::to_csv() const {
  std::ostringstream os;
  os << "study,grid_value,n,p,u_star,method,risk,se,replications\n";
  for (const GridPointResult& g : points) {
    for (const MethodRisk& r : g.risks) {
      os << study_kind_name(config.kind) << ',' << fmt17(g.grid_value) << ',' << config.n << ','
         << g.p << ',' << g.u_star << ',' << study_method_name(r.method) << ',' << fmt17(r.risk)
         << ',' << fmt17(r.se) << ',' << config.replications << '\n';
    }
  }
  return os.str();
}

SimDesign study_design(const StudyConfig& cfg, std::size_t grid_index) {
  const double g = cfg.grid.at(grid_index);
  const std::uint64_t seed = stream_seed(cfg.seed, grid_index);
  const Index n = cfg.n;
  if (cfg.kind == StudyKind::baseline) {
    const Index p = std::lround(g * static_cast<double>(n));
    return gen_baseline(cfg.baseline_kind, n, p, cfg.rho, std::nullopt, cfg.sigma_eps_sq, seed);
  }

  EnvelopeSimConfig e;
  e.n = n;
  e.q = 1;
  e.seed = seed;
  e.replications = cfg.replications;
  e.decay_gamma = cfg.decay_gamma;
  e.Sigma_eps = MatrixXd::Constant(1, 1, cfg.sigma_eps_sq);
  switch (cfg.kind) {
    case StudyKind::p1: {
      e.p = std::lround(g * static_cast<double>(n));
      for (Index k = 0; k < 10; ++k) e.P.push_back(cfg.p1_start + k);
      e.alpha.resize(10, 1);
      for (Index k = 0; k < 10; ++k) e.alpha(k, 0) = k % 2 == 0 ? 1.0 : -1.0;
      break;
    }
    case StudyKind::u_star: {
      e.p = std::lround(g * static_cast<double>(n));
      const Index us = cfg.u_star ? *cfg.u_star : std::min(n, e.p) / 2;
      e.alpha.resize(us, 1);
      for (Index j = 0; j < us; ++j) {
        e.P.push_back(2 * j + 1);
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        e.alpha(j, 0) = us == 1 ? 0.1
                                : sign * (0.1 + static_cast<double>(j) * 0.9 /
                                                    static_cast<double>(us - 1));
      }
      break;
    }
    case StudyKind::double_descent: {
      const Index us = std::lround(g * static_cast<double>(n));
      e.p = std::lround(1.5 * static_cast<double>(us));
      e.spectrum = Spectrum::unit;
      VectorXd eta(us);
      for (Index j = 0; j < us; ++j) {
        e.P.push_back(cfg.p1_start + j);
        eta(j) = j % 2 == 0 ? 1.0 : -1.0;
      }
      e.alpha = std::sqrt(10.0) * eta / eta.norm();
      break;
    }
    case StudyKind::baseline: break;
  }
  return gen_envelope_model(e);
}

namespace {

struct GridPointWork {
  const StudyConfig& cfg;
  const SimDesign& design;
  Index u_star = 0;
  MatrixXd xc;
  SvdFactorsd svd;
  CvPlan plan;
  Index cv_rank = 0;

  GridPointWork(const StudyConfig& c, const SimDesign& d, std::uint64_t fold_seed)
      : cfg(c),
        design(d),
        xc(d.data.X.rowwise() - d.data.X.colwise().mean()),
        svd(thin_svd(xc)),
        plan(d.data.X, c.tuner.folds, fold_seed) {
    u_star = d.planted_basis.cols();
    cv_rank = std::min(plan.min_rank(), cfg.tuner.max_components);
  }

  MatrixXd estimate(StudyMethod method, const MatrixXd& y) const {
    const MatrixXd yc = y.rowwise() - y.colwise().mean();
    const Index r = svd.rank();
    switch (method) {
      case StudyMethod::pcr: {
        const CvResult cv = plan.evaluate(y, Method::pcr, component_grid(cv_rank, 1, 1, false));
        return pcr_coefficients(svd, yc, *cv.best.d);
      }
      case StudyMethod::simpls: {
        const CvResult cv =
            plan.evaluate(y, Method::simpls, component_grid(cv_rank, 1, 1, false));
        const SimplsPath<double> path = simpls_path(xc, yc, *cv.best.d);
        return path.components() > 0 ? path.coefficients(path.components())
                                     : MatrixXd::Zero(xc.cols(), yc.cols());
      }
      case StudyMethod::ridge: {
        const double s1 = svd.D(0) * svd.D(0);
        std::vector<ModelParams> grid;
        for (double l : log_grid(1e-4 * s1, 1e2 * s1, cfg.tuner.lambda_count)) {
          ModelParams p;
          p.lambda = l;
          grid.push_back(p);
        }
        const CvResult cv = plan.evaluate(y, Method::ridge, grid);
        return ridge_coefficients(svd, yc, *cv.best.lambda);
      }
      case StudyMethod::niece: {
        const EnvelopeScoresd scores = sample_envelope_scores(svd, yc, r);
        Index u = 0;
        if (cfg.kind == StudyKind::double_descent) {
          u = std::min({u_star, cfg.n - 1, r});
        } else {
          const CvResult cv =
              plan.evaluate(y, Method::niece, component_grid(cv_rank, 2, 2, true));
          u = *cv.best.u;
        }
        return niece_coefficients(svd, scores, yc, u, r);
      }
      case StudyMethod::egreg:
      case StudyMethod::egreg_r: {
        const EnvelopeScoresd scores = sample_envelope_scores(svd, yc, r);
        double top = scores.phi.maxCoeff();
        if (!(top > 0)) top = 1.0;
        const std::vector<double> lambdas =
            log_grid(1e-6 * top, 1e2 * top, cfg.tuner.lambda_count);
        std::vector<ModelParams> grid;
        const std::vector<ModelParams> ds = method == StudyMethod::egreg
                                                ? component_grid(cv_rank, 2, 2, false)
                                                : std::vector<ModelParams>{ModelParams{}};
        for (const ModelParams& dp : ds) {
          for (double l : lambdas) {
            ModelParams p = dp;
            p.lambda = l;
            grid.push_back(p);
          }
        }
        const CvResult cv = plan.evaluate(y, Method::egreg, grid);
        const Index d = cv.best.d.value_or(r);
        return egreg_fit(svd, scores, yc, d, *cv.best.lambda).beta;
      }
    }
    throw ParameterError("unknown study method");
  }
};

}  // namespace

StudyResult run_study(const StudyConfig& cfg) {
  cfg.validate();
  StudyResult result;
  result.config = cfg;
  for (std::size_t gi = 0; gi < cfg.grid.size(); ++gi) {
    const SimDesign design = study_design(cfg, gi);
    const GridPointWork work(cfg, design, stream_seed(design.seed, kFoldStream));

    const std::size_t reps = static_cast<std::size_t>(cfg.replications);
    const std::size_t nm = cfg.methods.size();
    std::vector<double> risks(reps * nm);
    std::vector<MatrixXd> betas(reps * nm);
    parallel_for(reps, cfg.threads, [&](std::size_t rep) {
      const MatrixXd y = design.response(static_cast<Index>(rep));
      for (std::size_t m = 0; m < nm; ++m) {
        betas[rep * nm + m] = work.estimate(cfg.methods[m], y);
      }
    });

    GridPointResult point;
    point.grid_value = cfg.grid[gi];
    point.p = design.data.p();
    point.u_star = work.u_star;
    for (std::size_t m = 0; m < nm; ++m) {
      std::vector<MatrixXd> method_betas;
      std::vector<double> per_rep;
      for (std::size_t rep = 0; rep < reps; ++rep) {
        method_betas.push_back(betas[rep * nm + m]);
        per_rep.push_back(prediction_risk(betas[rep * nm + m], design.truth));
      }
      const double mean = empirical_risk(method_betas, design.truth);
      double ss = 0;
      for (double v : per_rep) ss += (v - mean) * (v - mean);
      const double se =
          reps > 1 ? std::sqrt(ss / static_cast<double>(reps - 1) / static_cast<double>(reps))
                   : 0.0;
      point.risks.push_back({cfg.methods[m], mean, se});
    }
    result.points.push_back(std::move(point));
  }
  return result;
}

}  // namespace egreg::sim
