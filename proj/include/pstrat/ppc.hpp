#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pstrat/data.hpp"
#include "pstrat/generator.hpp"
#include "pstrat/kaplan_meier.hpp"
#include "pstrat/model.hpp"
#include "pstrat/rng.hpp"
#include "pstrat/sampler.hpp"

namespace pstrat {

// Fresh dataset from theta's generative law holding each unit's assignment and
// censoring time fixed; the returned augmentation carries the true latent
// statuses (and control-arm outcomes) of the replicate.
inline std::pair<Dataset, std::vector<AugmentedUnit>> replicate_data(const Theta& th,
                                                                     const Dataset& data,
                                                                     Rng& rng) {
  Dataset rep;
  rep.c_max = data.c_max;
  rep.records.reserve(data.records.size());
  std::vector<AugmentedUnit> aug;
  aug.reserve(data.records.size());
  for (const auto& obs : data.records) {
    auto [rec, lat] = generate_unit(obs.z, obs.c, th, rng);
    rec.id = obs.id;
    rep.records.push_back(rec);
    AugmentedUnit a;
    a.s_star = lat.s0;
    a.y0_star = lat.y0;
    aug.push_back(a);
  }
  return {std::move(rep), std::move(aug)};
}

inline double complete_log_likelihood(const Dataset& data,
                                      const std::vector<AugmentedUnit>& aug, const Theta& th) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.records.size(); ++i)
    acc += unit_log_complete(data.records[i], aug[i], th);
  return acc;
}

// Complete-data information criterion as a discrepancy: -2(L + 12 log n).
inline double disc_bic(const Dataset& data, const std::vector<AugmentedUnit>& aug,
                       const Theta& th) {
  const double l = complete_log_likelihood(data, aug, th);
  return -2.0 * (l + 12.0 * std::log(static_cast<double>(data.records.size())));
}

namespace detail {

// model cumulative hazard of the observed outcome time given arm and latent
// status; shifted by the switching time in the control arm
inline double outcome_cumhaz(const PatientRecord& rec, const SwitchStatus& st,
                             const Theta& th) {
  if (rec.z == 0) {
    if (!st.is_switcher()) return weibull_cumulative_hazard(rec.y_tilde, th.y0_ns);
    const double arg = rec.y_tilde - st.time;
    if (arg <= 0.0) return 0.0;
    return weibull_cumulative_hazard(arg, tilted(th.y0_sw, th.lambda, st.time));
  }
  if (!st.is_switcher()) return weibull_cumulative_hazard(rec.y_tilde, th.y1_ns);
  return weibull_cumulative_hazard(rec.y_tilde, tilted(th.y1_sw, th.lambda, st.time));
}

// -2 [M + delta log(delta - M)] with M = delta - Lambda; the log term drops
// for censored units
inline double deviance_term(int delta, double cumhaz) {
  const double m = static_cast<double>(delta) - cumhaz;
  if (delta == 1) return -2.0 * (m + std::log(1.0 - m));
  return -2.0 * m;
}

}  // namespace detail

// Outcome-time deviance over all units, grouped by arm and latent status.
// Defined for the conditionally independent fit (kappa = 0); the treated
// sub-models then need no held control outcome.
inline double disc_deviance_y(const Dataset& data, const std::vector<AugmentedUnit>& aug,
                              const Theta& th) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    acc += detail::deviance_term(rec.y_event, detail::outcome_cumhaz(rec, aug[i].s_star, th));
  }
  return acc;
}

// Switching-time deviance over control-arm latent switchers, using the
// observed switching columns.
inline double disc_deviance_s(const Dataset& data, const std::vector<AugmentedUnit>& aug,
                              const Theta& th) {
  double acc = 0.0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    if (rec.z != 0 || !aug[i].s_star.is_switcher()) continue;
    acc += detail::deviance_term(rec.s_event, weibull_cumulative_hazard(rec.s_tilde, th.sw));
  }
  return acc;
}

// The three product-limit curves of the check battery: outcome survival by
// latent status (arms pooled) and the switching-time curve for control-arm
// switchers. An empty group yields the unit curve.
inline std::array<KmCurve, 3> ppc_km_curves(const Dataset& data,
                                            const std::vector<AugmentedUnit>& aug) {
  std::array<std::vector<double>, 3> times;
  std::array<std::vector<int>, 3> flags;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    const bool sw = aug[i].s_star.is_switcher();
    const std::size_t g = sw ? 1 : 0;
    times[g].push_back(rec.y_tilde);
    flags[g].push_back(rec.y_event);
    if (rec.z == 0 && sw) {
      times[2].push_back(rec.s_tilde);
      flags[2].push_back(rec.s_event);
    }
  }
  std::array<KmCurve, 3> out;
  for (std::size_t g = 0; g < 3; ++g)
    if (!times[g].empty()) out[g] = km_fit(times[g], flags[g]);
  return out;
}

inline constexpr const char* kPpcKmGroups[3] = {"survival_ns", "survival_sw", "switch"};

// Location, dispersion, and their ratio for the three observable feature
// groups: uncensored outcomes by latent status (contrasting arms) and observed
// control-arm switching times.
struct SignalNoise {
  double signal = std::numeric_limits<double>::quiet_NaN();
  double noise = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
};

namespace detail {

inline void mean_var(const std::vector<double>& v, double& mean, double& var) {
  mean = 0.0;
  for (const double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  var = 0.0;
  for (const double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size() - 1);
}

}  // namespace detail

inline std::array<SignalNoise, 3> disc_signal_noise(const Dataset& data,
                                                    const std::vector<AugmentedUnit>& aug) {
  std::array<std::array<std::vector<double>, 2>, 2> y;  // [status][arm]
  std::vector<double> s_obs;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    const std::size_t g = aug[i].s_star.is_switcher() ? 1 : 0;
    if (rec.y_event == 1) y[g][static_cast<std::size_t>(rec.z)].push_back(rec.y_tilde);
    if (rec.z == 0 && rec.s_event == 1) s_obs.push_back(rec.s_tilde);
  }
  std::array<SignalNoise, 3> out;
  for (std::size_t g = 0; g < 2; ++g) {
    const auto& v0 = y[g][0];
    const auto& v1 = y[g][1];
    if (v0.size() < 2 || v1.size() < 2) continue;
    double m0, var0, m1, var1;
    detail::mean_var(v0, m0, var0);
    detail::mean_var(v1, m1, var1);
    auto& row = out[g];
    row.signal = std::abs(m1 - m0);
    row.noise = std::sqrt(var0 / static_cast<double>(v0.size()) +
                          var1 / static_cast<double>(v1.size()));
    row.ratio = row.signal / row.noise;
    row.defined = true;
  }
  if (s_obs.size() >= 2) {
    double ms, vars;
    detail::mean_var(s_obs, ms, vars);
    auto& row = out[2];
    row.signal = ms;
    row.noise = std::sqrt(vars / static_cast<double>(s_obs.size()));
    row.ratio = row.signal / row.noise;
    row.defined = true;
  }
  return out;
}

// Fraction of draws whose replicated discrepancy is at least the observed one;
// pairs with an undefined side are excluded. n_used reports the retained count.
inline double pppv(const std::vector<double>& obs, const std::vector<double>& rep,
                   long* n_used = nullptr) {
  if (obs.size() != rep.size()) throw std::invalid_argument("pppv: length mismatch");
  if (obs.empty()) throw std::invalid_argument("pppv: no draws");
  long n = 0, hits = 0;
  for (std::size_t k = 0; k < obs.size(); ++k) {
    if (std::isnan(obs[k]) || std::isnan(rep[k])) continue;
    ++n;
    if (rep[k] >= obs[k]) ++hits;
  }
  if (n_used) *n_used = n;
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(hits) / static_cast<double>(n);
}

struct PppvScalar {
  std::string name;
  double value = 0.0;
  long n_used = 0;
};

struct PppvReport {
  std::vector<PppvScalar> scalars;
  std::vector<double> km_grid;
  std::array<std::vector<double>, 3> km_pppv;
  long n_draws = 0;
};

struct PpcConfig {
  long refresh_sweeps = 20;  // status-conditional sweeps per draw when reconstructing
  double t_max = 3.0;
  double t_step = 0.01;
  std::uint64_t seed = 0;
};

inline std::vector<double> ppc_time_grid(const PpcConfig& cfg) {
  std::vector<double> g;
  for (long i = 1; static_cast<double>(i) * cfg.t_step <= cfg.t_max + 1e-12; ++i)
    g.push_back(static_cast<double>(i) * cfg.t_step);
  return g;
}

// Full check battery over the kept draws. Statuses for the observed data are
// reconstructed per draw by refresh sweeps of the status conditional, warm
// started from the previous draw; each draw then contributes one replicate.
inline PppvReport run_ppc(const Dataset& data, const Draws& draws, const PpcConfig& cfg) {
  if (draws.kappa != 0.0)
    throw std::invalid_argument("ppc: checks are defined for the kappa = 0 fit only");
  std::size_t total = 0;
  for (const auto& ch : draws.chains) total += ch.thetas.size();
  if (total == 0) throw std::invalid_argument("ppc: no draws");

  const std::vector<double> grid = ppc_time_grid(cfg);
  constexpr int kScalars = 12;
  std::array<std::vector<double>, kScalars> obs_d, rep_d;
  for (auto& v : obs_d) v.reserve(total);
  for (auto& v : rep_d) v.reserve(total);
  std::array<std::vector<long>, 3> km_hits;
  for (auto& v : km_hits) v.assign(grid.size(), 0);

  std::vector<AugmentedUnit> aug;
  std::size_t k = 0;
  for (const auto& ch : draws.chains) {
    for (const auto& theta : ch.thetas) {
      Rng rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(k)));
      Theta th = theta;
      th.kappa = 0.0;
      if (aug.empty()) aug = initial_augmentation(data, th, rng);
      for (long sweep = 0; sweep < cfg.refresh_sweeps; ++sweep)
        sweep_statuses(data, aug, th, rng);

      auto [rep, rep_aug] = replicate_data(th, data, rng);

      const auto push = [&](int idx, double o, double r) {
        obs_d[static_cast<std::size_t>(idx)].push_back(o);
        rep_d[static_cast<std::size_t>(idx)].push_back(r);
      };
      push(0, disc_bic(data, aug, th), disc_bic(rep, rep_aug, th));
      push(1, disc_deviance_y(data, aug, th), disc_deviance_y(rep, rep_aug, th));
      push(2, disc_deviance_s(data, aug, th), disc_deviance_s(rep, rep_aug, th));
      const auto sn_obs = disc_signal_noise(data, aug);
      const auto sn_rep = disc_signal_noise(rep, rep_aug);
      for (std::size_t g = 0; g < 3; ++g) {
        const int base = 3 + 3 * static_cast<int>(g);
        push(base + 0, sn_obs[g].signal, sn_rep[g].signal);
        push(base + 1, sn_obs[g].noise, sn_rep[g].noise);
        push(base + 2, sn_obs[g].ratio, sn_rep[g].ratio);
      }

      const auto km_obs = ppc_km_curves(data, aug);
      const auto km_rep = ppc_km_curves(rep, rep_aug);
      for (std::size_t g = 0; g < 3; ++g)
        for (std::size_t t = 0; t < grid.size(); ++t)
          if (km_eval(km_rep[g], grid[t]) >= km_eval(km_obs[g], grid[t])) ++km_hits[g][t];
      ++k;
    }
  }

  static constexpr const char* kScalarNames[kScalars] = {
      "bic",           "deviance_y",    "deviance_s",   "signal_surv_ns",
      "noise_surv_ns", "ratio_surv_ns", "signal_surv_sw", "noise_surv_sw",
      "ratio_surv_sw", "signal_switch", "noise_switch",  "ratio_switch"};

  PppvReport report;
  report.n_draws = static_cast<long>(total);
  report.km_grid = grid;
  for (int i = 0; i < kScalars; ++i) {
    PppvScalar s;
    s.name = kScalarNames[i];
    s.value = pppv(obs_d[static_cast<std::size_t>(i)], rep_d[static_cast<std::size_t>(i)],
                   &s.n_used);
    report.scalars.push_back(s);
  }
  for (std::size_t g = 0; g < 3; ++g) {
    report.km_pppv[g].reserve(grid.size());
    for (std::size_t t = 0; t < grid.size(); ++t)
      report.km_pppv[g].push_back(static_cast<double>(km_hits[g][t]) /
                                  static_cast<double>(total));
  }
  return report;
}

inline void serialize_ppc_report(const PppvReport& report, std::ostream& out) {
  out << "discrepancy,pppv,n_draws\n";
  for (const auto& s : report.scalars)
    out << s.name << ',' << format_double(s.value) << ',' << s.n_used << '\n';
}

inline void serialize_ppc_km(const PppvReport& report, std::ostream& out) {
  out << "t,group,pppv\n";
  for (std::size_t g = 0; g < 3; ++g)
    for (std::size_t t = 0; t < report.km_grid.size(); ++t)
      out << format_double(report.km_grid[t]) << ',' << kPpcKmGroups[g] << ','
          << format_double(report.km_pppv[g][t]) << '\n';
}

inline std::string serialize_ppc_report(const PppvReport& report) {
  std::ostringstream out;
  serialize_ppc_report(report, out);
  return out.str();
}

inline std::string serialize_ppc_km(const PppvReport& report) {
  std::ostringstream out;
  serialize_ppc_km(report, out);
  return out.str();
}

}  // namespace pstrat
