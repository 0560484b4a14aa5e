#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace pstrat {

// Weibull with shape alpha and log rate beta = log(eta):
//   log f(t) = log(alpha) + (alpha - 1) log t + beta - e^beta t^alpha
//   G(t)     = exp(-e^beta t^alpha)
// All sub-models of the switching-trial likelihood are built from this family,
// possibly location shifted.
struct WeibullParams {
  double shape = 1.0;     // alpha, > 0
  double log_rate = 0.0;  // beta, unconstrained
};

inline bool weibull_valid(const WeibullParams& p) {
  return p.shape > 0.0 && std::isfinite(p.shape) && std::isfinite(p.log_rate);
}

// t^alpha through the exp/log path: one code path, consistent rounding, and
// graceful under/overflow in the log domain.
inline double pow_pos(double t, double a) {
  if (t == 0.0) return 0.0;
  return std::exp(a * std::log(t));
}

inline double weibull_log_pdf(double t, const WeibullParams& p) {
  if (!(t > 0.0)) throw std::domain_error("weibull_log_pdf: t must be > 0");
  return std::log(p.shape) + (p.shape - 1.0) * std::log(t) + p.log_rate -
         std::exp(p.log_rate) * pow_pos(t, p.shape);
}

inline double weibull_log_survival(double t, const WeibullParams& p) {
  if (t < 0.0) throw std::domain_error("weibull_log_survival: t must be >= 0");
  return -std::exp(p.log_rate) * pow_pos(t, p.shape);
}

inline double weibull_cumulative_hazard(double t, const WeibullParams& p) {
  return -weibull_log_survival(t, p);
}

inline double weibull_hazard(double t, const WeibullParams& p) {
  if (!(t > 0.0)) throw std::domain_error("weibull_hazard: t must be > 0");
  return p.shape * pow_pos(t, p.shape - 1.0) * std::exp(p.log_rate);
}

inline double weibull_mean(const WeibullParams& p) {
  // exp(-beta/alpha) Gamma(1 + 1/alpha), evaluated via lgamma so small shapes
  // do not overflow the Gamma factor prematurely
  return std::exp(-p.log_rate / p.shape + std::lgamma(1.0 + 1.0 / p.shape));
}

// Inverse-CDF draw: G(t) = u  =>  t = (-log u * e^{-beta})^{1/alpha}.
inline double weibull_sample(const WeibullParams& p, double u) {
  if (!(u > 0.0 && u < 1.0)) throw std::domain_error("weibull_sample: u must be in (0,1)");
  return std::exp((std::log(-std::log(u)) - p.log_rate) / p.shape);
}

}  // namespace pstrat
