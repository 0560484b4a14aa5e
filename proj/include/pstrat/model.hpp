#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "pstrat/data.hpp"
#include "pstrat/rng.hpp"
#include "pstrat/weibull.hpp"

namespace pstrat {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Full parameter vector of the switching-trial model. kappa is a fixed
// sensitivity parameter, carried along but never updated.
struct Theta {
  double pi = 0.5;          // P(never switches)
  WeibullParams sw;         // switching time
  WeibullParams y0_ns;      // control survival, non-switchers
  WeibullParams y0_sw;      // control survival residual past the switch, switchers (rate tilted by lambda*log s)
  WeibullParams y1_ns;      // treated survival residual, non-switchers
  WeibullParams y1_sw;      // treated survival residual, switchers (rate tilted by lambda*log s)
  double lambda = 0.0;      // shared switch-time association
  double kappa = 0.0;       // cross-world linkage in [0,1], fixed per run
};

inline bool theta_valid(const Theta& t) {
  return t.pi > 0.0 && t.pi < 1.0 && weibull_valid(t.sw) && weibull_valid(t.y0_ns) &&
         weibull_valid(t.y0_sw) && weibull_valid(t.y1_ns) && weibull_valid(t.y1_sw) &&
         std::isfinite(t.lambda) && t.kappa >= 0.0 && t.kappa <= 1.0;
}

// Residual parameters for a switcher at time s: the log rate picks up
// lambda * log(s).
inline WeibullParams tilted(const WeibullParams& base, double lambda, double s) {
  return WeibullParams{base.shape, base.log_rate + lambda * std::log(s)};
}

struct GammaHyper {
  double shape = 1.0;
  double scale = 10.0;
};
struct NormalHyper {
  double mean = 0.0;
  double var = 1.0e4;
};

enum class LambdaPriorKind { Normal, ImproperUniform };

// Hyperparameters. Defaults are the application values: uniform Beta for pi,
// diffuse Gamma(1, 10) for shapes except the informative treated non-switcher
// shape, diffuse normals for locations except the two treated log rates.
struct PriorSpec {
  double pi_a = 1.0, pi_b = 1.0;
  GammaHyper sw_shape{1.0, 10.0};
  GammaHyper y0_ns_shape{1.0, 10.0};
  GammaHyper y0_sw_shape{1.0, 10.0};
  GammaHyper y1_ns_shape{125.0, 0.01};
  GammaHyper y1_sw_shape{1.0, 10.0};
  NormalHyper sw_loc{0.0, 1.0e4};
  NormalHyper y0_ns_loc{0.0, 1.0e4};
  NormalHyper y0_sw_loc{0.0, 1.0e4};
  NormalHyper y1_ns_loc{0.0, 1.0};
  NormalHyper y1_sw_loc{0.0, 1.0};
  LambdaPriorKind lambda_kind = LambdaPriorKind::Normal;
  NormalHyper lambda_prior{0.0, 1.0e4};
};

inline double log_gamma_pdf(double x, const GammaHyper& g) {
  if (!(x > 0.0)) return kNegInf;
  return (g.shape - 1.0) * std::log(x) - x / g.scale - std::lgamma(g.shape) -
         g.shape * std::log(g.scale);
}

inline double log_normal_pdf(double x, const NormalHyper& n) {
  const double d = x - n.mean;
  return -0.5 * std::log(2.0 * M_PI * n.var) - d * d / (2.0 * n.var);
}

inline double log_beta_pdf(double x, double a, double b) {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) -
         std::lgamma(a) - std::lgamma(b);
}

// kappa has a point-mass prior at its fixed value and contributes nothing; an
// improper uniform lambda prior likewise contributes 0.
inline double log_prior(const Theta& t, const PriorSpec& p) {
  if (!(t.pi > 0.0 && t.pi < 1.0)) return kNegInf;
  if (t.sw.shape <= 0.0 || t.y0_ns.shape <= 0.0 || t.y0_sw.shape <= 0.0 ||
      t.y1_ns.shape <= 0.0 || t.y1_sw.shape <= 0.0)
    return kNegInf;
  double lp = log_beta_pdf(t.pi, p.pi_a, p.pi_b);
  lp += log_gamma_pdf(t.sw.shape, p.sw_shape);
  lp += log_gamma_pdf(t.y0_ns.shape, p.y0_ns_shape);
  lp += log_gamma_pdf(t.y0_sw.shape, p.y0_sw_shape);
  lp += log_gamma_pdf(t.y1_ns.shape, p.y1_ns_shape);
  lp += log_gamma_pdf(t.y1_sw.shape, p.y1_sw_shape);
  lp += log_normal_pdf(t.sw.log_rate, p.sw_loc);
  lp += log_normal_pdf(t.y0_ns.log_rate, p.y0_ns_loc);
  lp += log_normal_pdf(t.y0_sw.log_rate, p.y0_sw_loc);
  lp += log_normal_pdf(t.y1_ns.log_rate, p.y1_ns_loc);
  lp += log_normal_pdf(t.y1_sw.log_rate, p.y1_sw_loc);
  if (p.lambda_kind == LambdaPriorKind::Normal) lp += log_normal_pdf(t.lambda, p.lambda_prior);
  return lp;
}

// Event/censoring block for a possibly location-shifted Weibull: the density
// of (t - shift) when the event is observed, the survival of (t - shift)
// otherwise. A nonpositive event-time argument means the shifted model cannot
// produce the observation (-inf); a nonpositive censored argument carries
// survival 1.
inline double shifted_block(double t, double shift, const WeibullParams& p, bool event) {
  const double arg = t - shift;
  if (event) {
    if (!(arg > 0.0)) return kNegInf;
    return weibull_log_pdf(arg, p);
  }
  if (arg <= 0.0) return 0.0;
  return weibull_log_survival(arg, p);
}

// One unit's factor of the complete-switching-status-data posterior kernel.
// Controls split on the (possibly imputed) status; treated units shift the
// observed survival time by kappa * y0_star.
inline double unit_log_complete(const PatientRecord& rec, const AugmentedUnit& aug,
                                const Theta& th) {
  const double log_pi = std::log(th.pi);
  const double log_1mpi = std::log1p(-th.pi);
  if (rec.z == 0) {
    if (!aug.s_star.is_switcher()) {
      // control non-switcher: outcome under the non-switcher sub-model
      return log_pi + shifted_block(rec.y_tilde, 0.0, th.y0_ns, rec.y_event == 1);
    }
    if (rec.s_event == 1) {
      const double s = rec.s_tilde;
      double v = log_1mpi + weibull_log_pdf(s, th.sw);
      v += shifted_block(rec.y_tilde, s, tilted(th.y0_sw, th.lambda, s), rec.y_event == 1);
      return v;
    }
    // switching censored: only the switch-time survival enters
    return log_1mpi + weibull_log_survival(rec.c, th.sw);
  }
  const double shift = th.kappa > 0.0 ? th.kappa * aug.y0_star.value() : 0.0;
  if (!aug.s_star.is_switcher()) {
    return log_pi + shifted_block(rec.y_tilde, shift, th.y1_ns, rec.y_event == 1);
  }
  const double s = aug.s_star.time;
  return log_1mpi + weibull_log_pdf(s, th.sw) +
         shifted_block(rec.y_tilde, shift, tilted(th.y1_sw, th.lambda, s), rec.y_event == 1);
}

inline double log_complete_posterior(const Dataset& data, const std::vector<AugmentedUnit>& aug,
                                     const Theta& th, const PriorSpec& prior) {
  double lp = log_prior(th, prior);
  if (lp == kNegInf) return kNegInf;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    lp += unit_log_complete(data.records[i], aug[i], th);
    if (lp == kNegInf) return kNegInf;
  }
  return lp;
}

// Density of the imputed control-arm survival time of a treated unit under its
// current stratum sub-model. This is the augmentation weight that makes the
// imputation target and the parameter updates conditionals of one joint law;
// it vanishes at kappa = 0 where no imputation happens.
inline double log_y0_augment_density(const PatientRecord& rec, const AugmentedUnit& aug,
                                     const Theta& th) {
  if (rec.z == 0 || th.kappa == 0.0) return 0.0;
  const double y0 = aug.y0_star.value();
  if (!aug.s_star.is_switcher()) return shifted_block(y0, 0.0, th.y0_ns, true);
  const double s = aug.s_star.time;
  return shifted_block(y0, s, tilted(th.y0_sw, th.lambda, s), true);
}

// Observed-data log likelihood. Control factors are closed form; the doubly
// censored control is a two-component mixture combined by log-sum-exp. Treated
// factors integrate the latent (status, control outcome) pair by Monte Carlo
// from the prior generative law. Diagnostic use only; never called inside the
// sampler.
inline double log_observed_likelihood(const Dataset& data, const Theta& th, int mc_size,
                                      std::uint64_t seed) {
  const double log_pi = std::log(th.pi);
  const double log_1mpi = std::log1p(-th.pi);
  double total = 0.0;
  std::vector<double> terms(static_cast<std::size_t>(mc_size));

  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    double lu;
    switch (classify(rec)) {
      case ObservedPattern::KnownNonSwitcher:
        lu = log_pi + weibull_log_pdf(rec.y_tilde, th.y0_ns);
        break;
      case ObservedPattern::KnownSwitcherDead:
      case ObservedPattern::KnownSwitcherCensored: {
        const double s = rec.s_tilde;
        lu = log_1mpi + weibull_log_pdf(s, th.sw) +
             shifted_block(rec.y_tilde, s, tilted(th.y0_sw, th.lambda, s), rec.y_event == 1);
        break;
      }
      case ObservedPattern::AmbiguousControl:
        lu = log_sum_exp(log_pi + weibull_log_survival(rec.c, th.y0_ns),
                         log_1mpi + weibull_log_survival(rec.c, th.sw));
        break;
      case ObservedPattern::TreatedUncensored:
      case ObservedPattern::TreatedCensored: {
        // log-mean-exp of the conditional treated-outcome density/survival
        // over mc_size prior draws of the latent (status, control outcome)
        // pair, independent per unit
        Rng rng(derive_seed(seed, i + 1));
        double m = kNegInf;
        for (int k = 0; k < mc_size; ++k) {
          double t;
          if (rng.uniform() < th.pi) {
            const double y0 = weibull_sample(th.y0_ns, rng.uniform());
            t = shifted_block(rec.y_tilde, th.kappa * y0, th.y1_ns, rec.y_event == 1);
          } else {
            const double s = weibull_sample(th.sw, rng.uniform());
            const double y0 = s + weibull_sample(tilted(th.y0_sw, th.lambda, s), rng.uniform());
            t = shifted_block(rec.y_tilde, th.kappa * y0, tilted(th.y1_sw, th.lambda, s),
                              rec.y_event == 1);
          }
          terms[static_cast<std::size_t>(k)] = t;
          m = std::max(m, t);
        }
        if (m == kNegInf) {
          lu = kNegInf;
        } else {
          double acc = 0.0;
          for (const double t : terms) acc += std::exp(t - m);
          lu = m + std::log(acc / mc_size);
        }
        break;
      }
    }
    total += lu;
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

}  // namespace pstrat
