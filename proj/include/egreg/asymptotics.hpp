#pragma once

// Limiting risks when u* and n diverge with u*/n -> gamma, in the regime where
// the envelope block of Sigma_x and of the score matrix are both the identity.
//
// Here lambda follows the scaled convention: the EgReg ridge penalty is
// n * lambda * ||eta||^2. Divide the unscaled penalty of the estimators by n
// to compare.

#include <cmath>
#include <limits>
#include <vector>

#include "egreg/errors.hpp"

namespace egreg {

struct LimitConfig {
  double gamma = 1;         ///< lim u*/n
  double c_sq = 1;          ///< tr{Gamma' beta* beta*' Gamma}
  double tr_sigma_eps = 1;  ///< tr{Sigma_eps}

  void validate() const {
    if (!(gamma > 0) || !(c_sq > 0) || !(tr_sigma_eps > 0)) {
      throw ParameterError("LimitConfig fields must be strictly positive");
    }
  }
};

inline constexpr double kNieceSingularBand = 1e-9;

namespace detail {

inline void check_stieltjes_args(double z, double gamma) {
  if (!(z < 0)) throw DomainError("Stieltjes transform evaluated only for z < 0");
  if (!(gamma > 0)) throw DomainError("aspect ratio gamma must be positive");
}

inline double mp_root(double z, double gamma) {
  const double a = 1 - gamma - z;
  double disc = a * a - 4 * gamma * z;
  if (disc < 0 && disc > -1e-14) disc = 0;
  return std::sqrt(disc);
}

}  // namespace detail

/// Stieltjes transform of the Marchenko-Pastur law with ratio gamma,
///   m(z) = [1 - gamma - z - sqrt((1 - gamma - z)^2 - 4 gamma z)] / (2 gamma z),
/// principal root. Evaluated in whichever algebraically equal form avoids
/// subtracting nearly equal numbers.
inline double stieltjes_m(double z, double gamma) {
  detail::check_stieltjes_args(z, gamma);
  const double a = 1 - gamma - z;
  const double s = detail::mp_root(z, gamma);
  if (a >= 0) return 2 / (a + s);
  return (a - s) / (2 * gamma * z);
}

/// dm/dz. Differentiating gamma z m^2 + (z + gamma - 1) m + 1 = 0 gives
/// m' = m (1 + gamma m) / sqrt((1 - gamma - z)^2 - 4 gamma z).
inline double stieltjes_m_prime(double z, double gamma) {
  detail::check_stieltjes_args(z, gamma);
  const double m = stieltjes_m(z, gamma);
  const double s = detail::mp_root(z, gamma);
  return m * (1 + gamma * m) / s;
}

/// tr{Sigma_eps} gamma / (1 - gamma) below the threshold,
/// c^2 (1 - 1/gamma) + tr{Sigma_eps} / (gamma - 1) above it.
inline double limiting_risk_niece(const LimitConfig& cfg) {
  cfg.validate();
  if (std::abs(cfg.gamma - 1) <= kNieceSingularBand) {
    throw SingularityError("limiting NIECE risk diverges at gamma = 1");
  }
  if (cfg.gamma < 1) return cfg.tr_sigma_eps * cfg.gamma / (1 - cfg.gamma);
  return cfg.c_sq * (1 - 1 / cfg.gamma) + cfg.tr_sigma_eps / (cfg.gamma - 1);
}

/// c^2 lambda^2 m'(-lambda) + tr{Sigma_eps} gamma (m(-lambda) - lambda m'(-lambda))
inline double limiting_risk_egreg(const LimitConfig& cfg, double lambda) {
  cfg.validate();
  if (!(lambda > 0)) throw DomainError("limiting EgReg risk needs lambda > 0");
  const double m = stieltjes_m(-lambda, cfg.gamma);
  const double mp = stieltjes_m_prime(-lambda, cfg.gamma);
  return cfg.c_sq * lambda * lambda * mp + cfg.tr_sigma_eps * cfg.gamma * (m - lambda * mp);
}

/// lambda* = tr{Sigma_eps} gamma / c^2
inline double optimal_lambda(const LimitConfig& cfg) {
  cfg.validate();
  return cfg.tr_sigma_eps * cfg.gamma / cfg.c_sq;
}

struct RiskCurve {
  std::vector<double> gamma_grid;
  std::vector<double> niece_risk;  ///< NaN inside the gamma = 1 band
  std::vector<double> egreg_risk_at_opt;
  std::vector<double> lambda_star;
};

/// Limiting NIECE risk and EgReg risk at lambda* along a grid of gamma values;
/// c^2 and tr{Sigma_eps} come from `base`, its gamma is ignored.
inline RiskCurve risk_curve(const LimitConfig& base, const std::vector<double>& gamma_grid) {
  RiskCurve c;
  c.gamma_grid = gamma_grid;
  for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
    if (!(gamma_grid[i] > 0)) throw ParameterError("gamma grid must be positive");
    if (i > 0 && !(gamma_grid[i] > gamma_grid[i - 1])) {
      throw ParameterError("gamma grid must be strictly ascending");
    }
    LimitConfig cfg = base;
    cfg.gamma = gamma_grid[i];
    const double ls = optimal_lambda(cfg);
    c.lambda_star.push_back(ls);
    c.egreg_risk_at_opt.push_back(limiting_risk_egreg(cfg, ls));
    c.niece_risk.push_back(std::abs(cfg.gamma - 1) <= kNieceSingularBand
                               ? std::numeric_limits<double>::quiet_NaN()
                               : limiting_risk_niece(cfg));
  }
  return c;
}

}  // namespace egreg
