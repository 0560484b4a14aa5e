#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "pstrat/data.hpp"
#include "pstrat/estimands.hpp"
#include "pstrat/model.hpp"
#include "pstrat/rng.hpp"

namespace pstrat {

// Metropolis blocks in sweep order. pi is not listed: it has an exact
// conjugate step and always precedes the sweep.
enum class ParamBlock : int {
  sw_shape = 0,
  sw_loc,
  y0_ns_shape,
  y0_ns_loc,
  y0_sw_shape,
  y0_sw_loc,
  y1_ns_shape,
  y1_ns_loc,
  y1_sw_shape,
  y1_sw_loc,
  lambda_assoc,
};
inline constexpr int kNumBlocks = 11;

inline bool block_is_shape(ParamBlock b) {
  switch (b) {
    case ParamBlock::sw_shape:
    case ParamBlock::y0_ns_shape:
    case ParamBlock::y0_sw_shape:
    case ParamBlock::y1_ns_shape:
    case ParamBlock::y1_sw_shape:
      return true;
    default:
      return false;
  }
}

inline double get_param(const Theta& t, ParamBlock b) {
  switch (b) {
    case ParamBlock::sw_shape: return t.sw.shape;
    case ParamBlock::sw_loc: return t.sw.log_rate;
    case ParamBlock::y0_ns_shape: return t.y0_ns.shape;
    case ParamBlock::y0_ns_loc: return t.y0_ns.log_rate;
    case ParamBlock::y0_sw_shape: return t.y0_sw.shape;
    case ParamBlock::y0_sw_loc: return t.y0_sw.log_rate;
    case ParamBlock::y1_ns_shape: return t.y1_ns.shape;
    case ParamBlock::y1_ns_loc: return t.y1_ns.log_rate;
    case ParamBlock::y1_sw_shape: return t.y1_sw.shape;
    case ParamBlock::y1_sw_loc: return t.y1_sw.log_rate;
    case ParamBlock::lambda_assoc: return t.lambda;
  }
  throw std::logic_error("get_param: bad block");
}

inline void set_param(Theta& t, ParamBlock b, double v) {
  switch (b) {
    case ParamBlock::sw_shape: t.sw.shape = v; return;
    case ParamBlock::sw_loc: t.sw.log_rate = v; return;
    case ParamBlock::y0_ns_shape: t.y0_ns.shape = v; return;
    case ParamBlock::y0_ns_loc: t.y0_ns.log_rate = v; return;
    case ParamBlock::y0_sw_shape: t.y0_sw.shape = v; return;
    case ParamBlock::y0_sw_loc: t.y0_sw.log_rate = v; return;
    case ParamBlock::y1_ns_shape: t.y1_ns.shape = v; return;
    case ParamBlock::y1_ns_loc: t.y1_ns.log_rate = v; return;
    case ParamBlock::y1_sw_shape: t.y1_sw.shape = v; return;
    case ParamBlock::y1_sw_loc: t.y1_sw.log_rate = v; return;
    case ParamBlock::lambda_assoc: t.lambda = v; return;
  }
  throw std::logic_error("set_param: bad block");
}

inline const char* block_name(ParamBlock b) {
  switch (b) {
    case ParamBlock::sw_shape: return "alpha_s";
    case ParamBlock::sw_loc: return "beta_s";
    case ParamBlock::y0_ns_shape: return "alpha_y_ns";
    case ParamBlock::y0_ns_loc: return "beta_y_ns";
    case ParamBlock::y0_sw_shape: return "alpha_y_sw";
    case ParamBlock::y0_sw_loc: return "beta_y_sw";
    case ParamBlock::y1_ns_shape: return "nu_y_ns";
    case ParamBlock::y1_ns_loc: return "gamma_y_ns";
    case ParamBlock::y1_sw_shape: return "nu_y_sw";
    case ParamBlock::y1_sw_loc: return "gamma_y_sw";
    case ParamBlock::lambda_assoc: return "lambda";
  }
  throw std::logic_error("block_name: bad block");
}

inline double log_prior_component(ParamBlock b, const Theta& t, const PriorSpec& p) {
  switch (b) {
    case ParamBlock::sw_shape: return log_gamma_pdf(t.sw.shape, p.sw_shape);
    case ParamBlock::sw_loc: return log_normal_pdf(t.sw.log_rate, p.sw_loc);
    case ParamBlock::y0_ns_shape: return log_gamma_pdf(t.y0_ns.shape, p.y0_ns_shape);
    case ParamBlock::y0_ns_loc: return log_normal_pdf(t.y0_ns.log_rate, p.y0_ns_loc);
    case ParamBlock::y0_sw_shape: return log_gamma_pdf(t.y0_sw.shape, p.y0_sw_shape);
    case ParamBlock::y0_sw_loc: return log_normal_pdf(t.y0_sw.log_rate, p.y0_sw_loc);
    case ParamBlock::y1_ns_shape: return log_gamma_pdf(t.y1_ns.shape, p.y1_ns_shape);
    case ParamBlock::y1_ns_loc: return log_normal_pdf(t.y1_ns.log_rate, p.y1_ns_loc);
    case ParamBlock::y1_sw_shape: return log_gamma_pdf(t.y1_sw.shape, p.y1_sw_shape);
    case ParamBlock::y1_sw_loc: return log_normal_pdf(t.y1_sw.log_rate, p.y1_sw_loc);
    case ParamBlock::lambda_assoc:
      return p.lambda_kind == LambdaPriorKind::Normal ? log_normal_pdf(t.lambda, p.lambda_prior)
                                                      : 0.0;
  }
  throw std::logic_error("log_prior_component: bad block");
}

// Unit classes for restricting block updates to the units whose complete-data
// factor actually involves the block.
enum class UnitGroup { CtrlNS, CtrlSwObs, CtrlSwCens, TrtNS, TrtSw };

inline UnitGroup unit_group(const PatientRecord& r, const AugmentedUnit& a) {
  if (r.z == 1) return a.s_star.is_switcher() ? UnitGroup::TrtSw : UnitGroup::TrtNS;
  if (!a.s_star.is_switcher()) return UnitGroup::CtrlNS;
  return r.s_event == 1 ? UnitGroup::CtrlSwObs : UnitGroup::CtrlSwCens;
}

inline bool block_touches(ParamBlock b, UnitGroup g, double kappa) {
  switch (b) {
    case ParamBlock::sw_shape:
    case ParamBlock::sw_loc:
      return g == UnitGroup::CtrlSwObs || g == UnitGroup::CtrlSwCens || g == UnitGroup::TrtSw;
    case ParamBlock::y0_ns_shape:
    case ParamBlock::y0_ns_loc:
      return g == UnitGroup::CtrlNS || (kappa > 0.0 && g == UnitGroup::TrtNS);
    case ParamBlock::y0_sw_shape:
    case ParamBlock::y0_sw_loc:
      return g == UnitGroup::CtrlSwObs || (kappa > 0.0 && g == UnitGroup::TrtSw);
    case ParamBlock::y1_ns_shape:
    case ParamBlock::y1_ns_loc:
      return g == UnitGroup::TrtNS;
    case ParamBlock::y1_sw_shape:
    case ParamBlock::y1_sw_loc:
      return g == UnitGroup::TrtSw;
    case ParamBlock::lambda_assoc:
      return g == UnitGroup::CtrlSwObs || g == UnitGroup::TrtSw;
  }
  throw std::logic_error("block_touches: bad block");
}

// Complete-data factor plus the treated-unit augmentation weight; the target
// every sampler step is a conditional of.
inline double unit_log_target(const PatientRecord& rec, const AugmentedUnit& aug,
                              const Theta& th) {
  const double v = unit_log_complete(rec, aug, th);
  if (v == kNegInf) return kNegInf;
  return v + log_y0_augment_density(rec, aug, th);
}

struct McmcConfig {
  long n_iter = 125000;
  long burn_in = 25000;
  long thin = 20;
  int n_chains = 3;
  std::uint64_t seed = 0;
  std::array<double, kNumBlocks> proposal_scales{0.1, 0.1, 0.1, 0.1, 0.1, 0.1,
                                                 0.1, 0.1, 0.1, 0.1, 0.1};
  bool adapt_burnin = true;
  int threads = 1;
};

inline void validate_mcmc_config(const McmcConfig& c) {
  if (c.burn_in < 0 || c.burn_in >= c.n_iter)
    throw std::invalid_argument("mcmc: need 0 <= burn_in < n_iter");
  if (c.thin < 1) throw std::invalid_argument("mcmc: thin must be >= 1");
  if (c.n_chains < 1) throw std::invalid_argument("mcmc: n_chains must be >= 1");
  for (const double s : c.proposal_scales)
    if (!(s > 0.0)) throw std::invalid_argument("mcmc: proposal scales must be positive");
}

struct ChainDraws {
  std::vector<Theta> thetas;
  std::vector<long> iters;                    // absolute iteration index of each kept draw
  std::vector<std::array<double, 3>> snaps;   // ace_ns, e_y0_ns, e_y1_ns
  std::array<long, kNumBlocks> proposals{};   // post-burn-in counts
  std::array<long, kNumBlocks> accepts{};
  std::array<double, kNumBlocks> final_scales{};
};

struct Draws {
  std::vector<ChainDraws> chains;
  double kappa = 0.0;
};

// --- imputation steps ---

// Exact conditional stratum draw for a doubly censored control: non-switcher
// with probability pi survival(c; control non-switcher model) over the
// two-component mixture, else a switcher whose time is censored at c.
inline SwitchStatus impute_ambiguous_control(const PatientRecord& rec, const Theta& th,
                                             double u) {
  const double log_ns = std::log(th.pi) + weibull_log_survival(rec.c, th.y0_ns);
  const double log_sw = std::log1p(-th.pi) + weibull_log_survival(rec.c, th.sw);
  const double p_ns = std::exp(log_ns - log_sum_exp(log_ns, log_sw));
  return u < p_ns ? SwitchStatus::non_switcher() : SwitchStatus::at(rec.c);
}

// Semi-continuous independence proposal for a treated unit's latent status.
inline SwitchStatus propose_switch_status(const Theta& th, double u1, double u2) {
  if (u1 < th.pi) return SwitchStatus::non_switcher();
  return SwitchStatus::at(weibull_sample(th.sw, u2));
}

// Acceptance probability for a proposed status change, given the log posterior
// ratio. The correction terms divide out the semi-continuous proposal density;
// with kappa > 0 a switch time above the held control outcome is infeasible.
inline double mh_switch_acceptance(const SwitchStatus& current, const SwitchStatus& cand,
                                   double log_r, const Theta& th,
                                   std::optional<double> y0_star = std::nullopt) {
  if (th.kappa > 0.0 && cand.is_switcher() && y0_star && cand.time > *y0_star) return 0.0;
  double corr = 0.0;
  if (!current.is_switcher() && cand.is_switcher()) {
    corr = std::log(th.pi) - (std::log1p(-th.pi) + weibull_log_pdf(cand.time, th.sw));
  } else if (current.is_switcher() && !cand.is_switcher()) {
    corr = std::log1p(-th.pi) + weibull_log_pdf(current.time, th.sw) - std::log(th.pi);
  } else if (current.is_switcher() && cand.is_switcher()) {
    corr = weibull_log_pdf(current.time, th.sw) - weibull_log_pdf(cand.time, th.sw);
  }
  const double lp = log_r + corr;
  if (std::isnan(lp)) return 0.0;
  return lp >= 0.0 ? 1.0 : std::exp(lp);
}

// Candidate control-arm outcome for a treated unit, drawn from the sub-model
// matching its current stratum.
inline double propose_treated_y0(const AugmentedUnit& aug, const Theta& th, Rng& rng) {
  if (!aug.s_star.is_switcher()) return weibull_sample(th.y0_ns, rng.uniform());
  const double s = aug.s_star.time;
  return s + weibull_sample(tilted(th.y0_sw, th.lambda, s), rng.uniform());
}

// One Metropolis update of the held control-arm outcome (kappa > 0). The
// independence proposal comes from the prior sub-model, whose density ratio
// cancels the augmentation weight: what remains is the treated-outcome block
// ratio, i.e. the change in the unit's complete-data factor. An uncensored
// outcome bounds the feasible region at y_tilde / kappa.
inline double impute_treated_y0(const PatientRecord& rec, const AugmentedUnit& aug,
                                const Theta& th, double cand, double u) {
  const double current = aug.y0_star.value();
  if (rec.y_event == 1 && cand > rec.y_tilde / th.kappa) return current;
  AugmentedUnit a = aug;
  a.y0_star = cand;
  const double log_acc = unit_log_complete(rec, a, th) - unit_log_complete(rec, aug, th);
  if (std::isnan(log_acc)) return current;
  if (log_acc >= 0.0 || u < std::exp(log_acc)) return cand;
  return current;
}

// Exact Beta draw for the non-switcher probability given current stratum counts.
inline double gibbs_pi(long n_ns, long n_sw, double a, double b, Rng& rng) {
  const double x = rng.gamma(a + static_cast<double>(n_ns), 1.0);
  const double y = rng.gamma(b + static_cast<double>(n_sw), 1.0);
  return x / (x + y);
}

// --- parameter blocks ---

namespace detail {

inline double log_gamma_proposal_pdf(double x, double center, double scale) {
  // mean = center, variance = scale^2
  const double k = (center / scale) * (center / scale);
  const double s = scale * scale / center;
  if (!(x > 0.0)) return kNegInf;
  return (k - 1.0) * std::log(x) - x / s - std::lgamma(k) - k * std::log(s);
}

}  // namespace detail

// One Metropolis-Hastings update of a single block. Shapes use an asymmetric
// Gamma proposal centered at the current value (variance scale^2) with the
// proposal-density correction; locations and lambda use a symmetric normal
// random walk. Only units whose factor involves the block enter the ratio.
inline Theta mh_update_parameter(ParamBlock block, const Theta& th, const Dataset& data,
                                 const std::vector<AugmentedUnit>& aug,
                                 const std::vector<UnitGroup>& groups, const PriorSpec& prior,
                                 double scale, Rng& rng, bool* accepted = nullptr) {
  const double cur = get_param(th, block);
  double cand_val;
  double log_prop_corr = 0.0;
  if (block_is_shape(block)) {
    const double k = (cur / scale) * (cur / scale);
    const double s = scale * scale / cur;
    cand_val = rng.gamma(k, s);
    log_prop_corr = detail::log_gamma_proposal_pdf(cur, cand_val, scale) -
                    detail::log_gamma_proposal_pdf(cand_val, cur, scale);
  } else {
    cand_val = rng.normal(cur, scale);
  }

  Theta cand = th;
  set_param(cand, block, cand_val);

  double delta = log_prior_component(block, cand, prior) - log_prior_component(block, th, prior);
  if (delta != kNegInf) {
    for (std::size_t i = 0; i < data.records.size(); ++i) {
      if (!block_touches(block, groups[i], th.kappa)) continue;
      delta += unit_log_target(data.records[i], aug[i], cand) -
               unit_log_target(data.records[i], aug[i], th);
      if (delta == kNegInf) break;
    }
  }

  const double log_acc = delta + log_prop_corr;
  const double u = rng.uniform();
  const bool acc = !std::isnan(log_acc) && (log_acc >= 0.0 || u < std::exp(log_acc));
  if (accepted) *accepted = acc;
  return acc ? cand : th;
}

inline Theta mh_update_parameter(ParamBlock block, const Theta& th, const Dataset& data,
                                 const std::vector<AugmentedUnit>& aug, const PriorSpec& prior,
                                 double scale, Rng& rng, bool* accepted = nullptr) {
  std::vector<UnitGroup> groups(data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i)
    groups[i] = unit_group(data.records[i], aug[i]);
  return mh_update_parameter(block, th, data, aug, groups, prior, scale, rng, accepted);
}

// --- initialization ---

namespace detail {

// coefficient of variation of a unit-rate Weibull as a function of shape
inline double weibull_cv(double shape) {
  const double g1 = std::lgamma(1.0 + 1.0 / shape);
  const double g2 = std::lgamma(1.0 + 2.0 / shape);
  const double ratio = std::exp(g2 - 2.0 * g1);  // E[T^2]/E[T]^2
  return std::sqrt(std::max(ratio - 1.0, 0.0));
}

// method-of-moments fit; falls back to an exponential fit when the sample is
// too small or degenerate
inline WeibullParams weibull_mom(const std::vector<double>& v) {
  double m = 0.0;
  for (const double x : v) m += x;
  m /= v.empty() ? 1.0 : static_cast<double>(v.size());
  if (v.size() < 2 || !(m > 0.0)) {
    const double rate = 1.0 / std::max(m, 0.5);
    return WeibullParams{1.0, std::log(rate)};
  }
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  const double target_cv = sd / m;
  double lo = 0.05, hi = 20.0;
  if (target_cv >= weibull_cv(lo) || target_cv <= weibull_cv(hi)) {
    return WeibullParams{1.0, -std::log(m)};
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    // cv decreases in the shape
    if (weibull_cv(mid) > target_cv)
      lo = mid;
    else
      hi = mid;
  }
  const double shape = 0.5 * (lo + hi);
  const double log_rate = -shape * std::log(m / std::exp(std::lgamma(1.0 + 1.0 / shape)));
  return WeibullParams{shape, log_rate};
}

inline double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

}  // namespace detail

// Moment-based starting point from the observable control-arm subsets; treated
// outcomes seed both treated blocks. Jitter produces overdispersed chain
// starts.
inline Theta initial_theta(const Dataset& data, const PriorSpec& prior, double kappa,
                           double jitter, Rng& rng) {
  std::vector<double> switch_times, ctrl_ns_y, ctrl_sw_resid, treated_y;
  for (const auto& rec : data.records) {
    if (rec.z == 0) {
      if (rec.s_event == 1) {
        switch_times.push_back(rec.s_tilde);
        if (rec.y_event == 1) ctrl_sw_resid.push_back(rec.y_tilde - rec.s_tilde);
      } else if (rec.y_event == 1) {
        ctrl_ns_y.push_back(rec.y_tilde);
      }
    } else if (rec.y_event == 1) {
      treated_y.push_back(rec.y_tilde);
    }
  }
  Theta th;
  th.kappa = kappa;
  th.pi = prior.pi_a / (prior.pi_a + prior.pi_b);
  th.sw = detail::weibull_mom(switch_times);
  th.y0_ns = detail::weibull_mom(ctrl_ns_y);
  th.y0_sw = detail::weibull_mom(ctrl_sw_resid);
  th.y1_ns = detail::weibull_mom(treated_y);
  th.y1_sw = th.y1_ns;
  th.lambda = 0.0;
  if (jitter > 0.0) {
    const auto j = [&](double v) { return v * (1.0 + jitter * rng.uniform(-1.0, 1.0)); };
    th.pi = detail::clamp(j(th.pi), 0.05, 0.95);
    th.sw.shape = j(th.sw.shape);
    th.y0_ns.shape = j(th.y0_ns.shape);
    th.y0_sw.shape = j(th.y0_sw.shape);
    th.y1_ns.shape = j(th.y1_ns.shape);
    th.y1_sw.shape = j(th.y1_sw.shape);
    th.sw.log_rate += jitter * rng.uniform(-1.0, 1.0);
    th.y0_ns.log_rate += jitter * rng.uniform(-1.0, 1.0);
    th.y0_sw.log_rate += jitter * rng.uniform(-1.0, 1.0);
    th.y1_ns.log_rate += jitter * rng.uniform(-1.0, 1.0);
    th.y1_sw.log_rate += jitter * rng.uniform(-1.0, 1.0);
    th.lambda += jitter * rng.uniform(-1.0, 1.0);
  }
  return th;
}

namespace detail {

// truncated inverse-CDF draw: value in (0, bound) for the given sub-model
inline double sample_truncated(const WeibullParams& p, double bound, Rng& rng) {
  const double g = std::exp(weibull_log_survival(bound, p));
  const double u = g + rng.uniform() * (1.0 - g);
  return weibull_sample(p, u);
}

}  // namespace detail

// One pass of status (and, for kappa > 0, outcome) initialization consistent
// with the observed record.
inline std::vector<AugmentedUnit> initial_augmentation(const Dataset& data, const Theta& th,
                                                       Rng& rng) {
  std::vector<AugmentedUnit> aug(data.records.size());
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    auto& a = aug[i];
    if (rec.z == 0) {
      switch (classify(rec)) {
        case ObservedPattern::KnownNonSwitcher:
          a.s_star = SwitchStatus::non_switcher();
          break;
        case ObservedPattern::KnownSwitcherDead:
        case ObservedPattern::KnownSwitcherCensored:
          a.s_star = SwitchStatus::at(rec.s_tilde);
          break;
        case ObservedPattern::AmbiguousControl:
          a.s_star = impute_ambiguous_control(rec, th, rng.uniform());
          break;
        default:
          break;
      }
      a.y0_star = rec.y_tilde;
      continue;
    }
    a.s_star = propose_switch_status(th, rng.uniform(), rng.uniform());
    if (th.kappa > 0.0) {
      const bool bounded = rec.y_event == 1;
      const double bound = bounded ? rec.y_tilde / th.kappa
                                   : std::numeric_limits<double>::infinity();
      if (a.s_star.is_switcher() && bounded && a.s_star.time >= bound)
        a.s_star = SwitchStatus::non_switcher();
      if (!a.s_star.is_switcher()) {
        a.y0_star = bounded ? detail::sample_truncated(th.y0_ns, bound, rng)
                            : weibull_sample(th.y0_ns, rng.uniform());
      } else {
        const double s = a.s_star.time;
        const auto p = tilted(th.y0_sw, th.lambda, s);
        a.y0_star = s + (bounded ? detail::sample_truncated(p, bound - s, rng)
                                 : weibull_sample(p, rng.uniform()));
      }
    }
  }
  return aug;
}

// One sweep of the latent-status conditional: ambiguous controls are exact
// draws, treated units go through the semi-continuous Metropolis step.
inline void sweep_statuses(const Dataset& data, std::vector<AugmentedUnit>& aug,
                           const Theta& th, Rng& rng) {
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    if (rec.z == 0) {
      if (classify(rec) == ObservedPattern::AmbiguousControl)
        aug[i].s_star = impute_ambiguous_control(rec, th, rng.uniform());
      continue;
    }
    const SwitchStatus cand = propose_switch_status(th, rng.uniform(), rng.uniform());
    AugmentedUnit a_cand = aug[i];
    a_cand.s_star = cand;
    const double log_r = unit_log_target(rec, a_cand, th) - unit_log_target(rec, aug[i], th);
    const double p = mh_switch_acceptance(aug[i].s_star, cand, log_r, th,
                                          th.kappa > 0.0 ? aug[i].y0_star : std::nullopt);
    if (rng.uniform() < p) aug[i].s_star = cand;
  }
}

// --- chain driver ---

inline ChainDraws run_chain(const Dataset& data, const PriorSpec& prior, const McmcConfig& cfg,
                            double kappa, std::uint64_t chain_seed) {
  validate_mcmc_config(cfg);
  Rng rng(chain_seed);
  Theta th = initial_theta(data, prior, kappa, 0.2, rng);
  std::vector<AugmentedUnit> aug = initial_augmentation(data, th, rng);
  const std::size_t n = data.records.size();
  std::vector<UnitGroup> groups(n);
  const auto refresh_groups = [&]() {
    for (std::size_t i = 0; i < n; ++i) groups[i] = unit_group(data.records[i], aug[i]);
  };
  refresh_groups();

  ChainDraws out;
  const long expected = (cfg.n_iter - cfg.burn_in) / cfg.thin;
  out.thetas.reserve(static_cast<std::size_t>(std::max(expected, 0L)));

  std::array<double, kNumBlocks> scales = cfg.proposal_scales;
  std::array<long, kNumBlocks> batch_prop{}, batch_acc{};
  std::array<long, kNumBlocks> batch_idx{};
  constexpr long kBatch = 50;

  for (long iter = 1; iter <= cfg.n_iter; ++iter) {
    // latent control-arm outcomes for treated units
    if (kappa > 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& rec = data.records[i];
        if (rec.z != 1) continue;
        const double cand = propose_treated_y0(aug[i], th, rng);
        aug[i].y0_star = impute_treated_y0(rec, aug[i], th, cand, rng.uniform());
      }
    }

    sweep_statuses(data, aug, th, rng);
    refresh_groups();

    // conjugate mixing-weight draw
    long n_ns = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (!aug[i].s_star.is_switcher()) ++n_ns;
    th.pi = gibbs_pi(n_ns, static_cast<long>(n) - n_ns, prior.pi_a, prior.pi_b, rng);

    // Metropolis sweep in fixed order
    for (int bi = 0; bi < kNumBlocks; ++bi) {
      const auto block = static_cast<ParamBlock>(bi);
      bool acc = false;
      th = mh_update_parameter(block, th, data, aug, groups, prior, scales[bi], rng, &acc);
      if (iter <= cfg.burn_in && cfg.adapt_burnin) {
        ++batch_prop[bi];
        if (acc) ++batch_acc[bi];
        if (batch_prop[bi] == kBatch) {
          ++batch_idx[bi];
          const double rate = static_cast<double>(batch_acc[bi]) / kBatch;
          scales[bi] *= std::exp((rate - 0.35) / std::sqrt(static_cast<double>(batch_idx[bi])));
          scales[bi] = detail::clamp(scales[bi], 1e-4, 10.0);
          batch_prop[bi] = 0;
          batch_acc[bi] = 0;
        }
      } else if (iter > cfg.burn_in) {
        ++out.proposals[bi];
        if (acc) ++out.accepts[bi];
      }
    }

    if (iter > cfg.burn_in && (iter - cfg.burn_in) % cfg.thin == 0) {
      out.thetas.push_back(th);
      out.iters.push_back(iter);
      out.snaps.push_back({ace_ns(th), weibull_mean(th.y0_ns),
                           th.kappa * weibull_mean(th.y0_ns) + weibull_mean(th.y1_ns)});
    }
  }
  out.final_scales = scales;
  return out;
}

inline Draws run_chains(const Dataset& data, const PriorSpec& prior, const McmcConfig& cfg,
                        double kappa) {
  validate_mcmc_config(cfg);
  Draws draws;
  draws.kappa = kappa;
  draws.chains.resize(static_cast<std::size_t>(cfg.n_chains));
  const int workers = std::max(1, std::min(cfg.threads, cfg.n_chains));
  if (workers == 1) {
    for (int c = 0; c < cfg.n_chains; ++c)
      draws.chains[static_cast<std::size_t>(c)] =
          run_chain(data, prior, cfg, kappa, derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
    return draws;
  }
  std::vector<std::thread> pool;
  std::size_t next = 0;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t c = static_cast<std::size_t>(w); c < draws.chains.size();
           c += static_cast<std::size_t>(workers)) {
        draws.chains[c] =
            run_chain(data, prior, cfg, kappa, derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
      }
    });
  }
  (void)next;
  for (auto& t : pool) t.join();
  return draws;
}

// --- arm-level censored Weibull fit ---

// Posterior sampler for a single right-censored Weibull sample, used by the
// assignment-only analysis. Priors: shape ~ Gamma(1, 10000), log-rate ~
// N(0, 1e4). Shape moves use the asymmetric Gamma proposal, the log-rate a
// normal random walk, both adapted during burn-in.
inline std::vector<WeibullParams> censored_weibull_fit(const std::vector<double>& times,
                                                       const std::vector<int>& events,
                                                       long n_iter, long burn_in, long thin,
                                                       std::uint64_t seed) {
  if (times.size() != events.size())
    throw std::invalid_argument("censored_weibull_fit: times/events length mismatch");
  if (times.empty()) throw std::invalid_argument("censored_weibull_fit: empty input");
  if (burn_in < 0 || burn_in >= n_iter || thin < 1)
    throw std::invalid_argument("censored_weibull_fit: bad schedule");

  const GammaHyper shape_prior{1.0, 10000.0};
  const NormalHyper loc_prior{0.0, 1e4};
  const auto log_target = [&](const WeibullParams& p) {
    double acc = log_gamma_pdf(p.shape, shape_prior) + log_normal_pdf(p.log_rate, loc_prior);
    for (std::size_t i = 0; i < times.size(); ++i) {
      acc += events[i] ? weibull_log_pdf(times[i], p) : weibull_log_survival(times[i], p);
      if (acc == kNegInf) return kNegInf;
    }
    return acc;
  };

  Rng rng(seed);
  std::vector<double> uncensored;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (events[i]) uncensored.push_back(times[i]);
  WeibullParams cur = detail::weibull_mom(uncensored);
  double cur_target = log_target(cur);

  std::array<double, 2> scales{0.1, 0.1};
  std::array<long, 2> batch_prop{}, batch_acc{}, batch_idx{};
  constexpr long kBatch = 50;

  std::vector<WeibullParams> kept;
  kept.reserve(static_cast<std::size_t>(std::max((n_iter - burn_in) / thin, 0L)));
  for (long iter = 1; iter <= n_iter; ++iter) {
    for (int b = 0; b < 2; ++b) {
      WeibullParams cand = cur;
      double log_prop_corr = 0.0;
      if (b == 0) {
        const double scale = scales[0];
        cand.shape = rng.gamma((cur.shape / scale) * (cur.shape / scale),
                               scale * scale / cur.shape);
        log_prop_corr = detail::log_gamma_proposal_pdf(cur.shape, cand.shape, scale) -
                        detail::log_gamma_proposal_pdf(cand.shape, cur.shape, scale);
      } else {
        cand.log_rate = rng.normal(cur.log_rate, scales[1]);
      }
      const double cand_target = log_target(cand);
      const double log_acc = cand_target - cur_target + log_prop_corr;
      const bool acc =
          !std::isnan(log_acc) && (log_acc >= 0.0 || rng.uniform() < std::exp(log_acc));
      if (acc) {
        cur = cand;
        cur_target = cand_target;
      }
      if (iter <= burn_in) {
        ++batch_prop[b];
        if (acc) ++batch_acc[b];
        if (batch_prop[b] == kBatch) {
          ++batch_idx[b];
          const double rate = static_cast<double>(batch_acc[b]) / kBatch;
          scales[b] *= std::exp((rate - 0.35) / std::sqrt(static_cast<double>(batch_idx[b])));
          scales[b] = detail::clamp(scales[b], 1e-4, 10.0);
          batch_prop[b] = 0;
          batch_acc[b] = 0;
        }
      }
    }
    if (iter > burn_in && (iter - burn_in) % thin == 0) kept.push_back(cur);
  }
  return kept;
}

// --- persistence ---

inline constexpr const char* kDrawsHeader =
    "chain,iter,pi,alpha_s,beta_s,alpha_y_ns,beta_y_ns,alpha_y_sw,beta_y_sw,nu_y_ns,"
    "gamma_y_ns,nu_y_sw,gamma_y_sw,lambda,ace_ns,e_y0_ns,e_y1_ns";

inline void write_draws(const Draws& draws, std::ostream& out) {
  out << kDrawsHeader << '\n';
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& ch = draws.chains[c];
    for (std::size_t k = 0; k < ch.thetas.size(); ++k) {
      const Theta& t = ch.thetas[k];
      out << (c + 1) << ',' << ch.iters[k] << ',' << format_double(t.pi) << ','
          << format_double(t.sw.shape) << ',' << format_double(t.sw.log_rate) << ','
          << format_double(t.y0_ns.shape) << ',' << format_double(t.y0_ns.log_rate) << ','
          << format_double(t.y0_sw.shape) << ',' << format_double(t.y0_sw.log_rate) << ','
          << format_double(t.y1_ns.shape) << ',' << format_double(t.y1_ns.log_rate) << ','
          << format_double(t.y1_sw.shape) << ',' << format_double(t.y1_sw.log_rate) << ','
          << format_double(t.lambda) << ',' << format_double(ch.snaps[k][0]) << ','
          << format_double(ch.snaps[k][1]) << ',' << format_double(ch.snaps[k][2]) << '\n';
    }
  }
}

inline Draws parse_draws(std::istream& in, double kappa) {
  Draws draws;
  draws.kappa = kappa;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("draws: empty input");
  if (csv_trim_eol(line) != kDrawsHeader) throw std::runtime_error("draws: bad header");
  while (std::getline(in, line)) {
    const auto sv = csv_trim_eol(line);
    if (sv.empty()) continue;
    const auto f = csv_split(sv);
    if (f.size() != 17) throw std::runtime_error("draws: expected 17 fields");
    const auto chain = static_cast<std::size_t>(parse_long(f[0]));
    if (chain < 1) throw std::runtime_error("draws: bad chain index");
    if (draws.chains.size() < chain) draws.chains.resize(chain);
    auto& ch = draws.chains[chain - 1];
    Theta t;
    t.kappa = kappa;
    t.pi = parse_double(f[2]);
    t.sw = {parse_double(f[3]), parse_double(f[4])};
    t.y0_ns = {parse_double(f[5]), parse_double(f[6])};
    t.y0_sw = {parse_double(f[7]), parse_double(f[8])};
    t.y1_ns = {parse_double(f[9]), parse_double(f[10])};
    t.y1_sw = {parse_double(f[11]), parse_double(f[12])};
    t.lambda = parse_double(f[13]);
    ch.thetas.push_back(t);
    ch.iters.push_back(parse_long(f[1]));
    ch.snaps.push_back({parse_double(f[14]), parse_double(f[15]), parse_double(f[16])});
  }
  return draws;
}

}  // namespace pstrat
