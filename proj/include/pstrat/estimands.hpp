#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "pstrat/model.hpp"
#include "pstrat/rng.hpp"
#include "pstrat/weibull.hpp"

namespace pstrat {

// --- posterior summaries ---

// type-7 linear-interpolation quantile on sorted values
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile: empty input");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0,1]");
  const auto n = sorted.size();
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  const double w = h - static_cast<double>(lo);
  return sorted[lo] * (1.0 - w) + sorted[lo + 1] * w;
}

struct EstimandSummary {
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
  double mean = 0.0;
};

// Draws whose value is undefined (NaN) are dropped; with no defined draw the
// whole summary is NaN.
inline EstimandSummary summarize(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("summarize: no draws");
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double v) { return std::isnan(v); }),
               values.end());
  EstimandSummary s;
  if (values.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    s.q025 = s.median = s.q975 = s.mean = nan;
    return s;
  }
  double m = 0.0;
  for (const double v : values) m += v;
  m /= static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  s.q025 = quantile_sorted(values, 0.025);
  s.median = quantile_sorted(values, 0.5);
  s.q975 = quantile_sorted(values, 0.975);
  s.mean = m;
  return s;
}

inline void validate_grid(const std::vector<double>& g, const char* what) {
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0)) throw std::invalid_argument(std::string(what) + ": values must be positive");
    if (i > 0 && !(g[i] > g[i - 1]))
      throw std::invalid_argument(std::string(what) + ": values must be strictly increasing");
  }
}

// --- assignment-level (intention-to-treat) effects on arm-wise fits ---

inline double itt_ace(const WeibullParams& arm0, const WeibullParams& arm1) {
  return weibull_mean(arm1) - weibull_mean(arm0);
}

inline double itt_dce(double y, const WeibullParams& arm0, const WeibullParams& arm1) {
  if (y == 0.0) return 0.0;
  return std::exp(weibull_log_survival(y, arm1)) - std::exp(weibull_log_survival(y, arm0));
}

// --- stratum-level effects ---

inline double ace_ns(const Theta& th) {
  const double m0 = weibull_mean(th.y0_ns);
  return th.kappa * m0 + weibull_mean(th.y1_ns) - m0;
}

// E[Y(0) | switch at s]: the switching time plus the residual mean
inline double mean_y0_sw(const Theta& th, double s) {
  return s + weibull_mean(tilted(th.y0_sw, th.lambda, s));
}

inline double ace_sw(double s, const Theta& th) {
  const double m0 = mean_y0_sw(th, s);
  return th.kappa * m0 + weibull_mean(tilted(th.y1_sw, th.lambda, s)) - m0;
}

// P{Y(1) > y | non-switcher} - P{Y(0) > y | non-switcher}. The first term is
// closed-form when the potential outcomes are conditionally independent and a
// Monte Carlo average over the held control outcome otherwise.
inline double dce_ns(double y, const Theta& th, int mc_size, std::uint64_t seed) {
  if (!(y > 0.0)) throw std::invalid_argument("dce_ns: y must be positive");
  const double p0 = std::exp(weibull_log_survival(y, th.y0_ns));
  double p1;
  if (th.kappa == 0.0) {
    p1 = std::exp(weibull_log_survival(y, th.y1_ns));
  } else {
    Rng rng(seed);
    double acc = 0.0;
    for (int j = 0; j < mc_size; ++j) {
      const double y0 = weibull_sample(th.y0_ns, rng.uniform());
      const double arg = y - th.kappa * y0;
      acc += arg <= 0.0 ? 1.0 : std::exp(weibull_log_survival(arg, th.y1_ns));
    }
    p1 = acc / mc_size;
  }
  return p1 - p0;
}

// P{Y(1) > y | s} - P{Y(0) > y | s}; the control term is a shifted survival,
// identically 1 for y <= s.
inline double dce_sw(double y, double s, const Theta& th, int mc_size, std::uint64_t seed) {
  if (!(y > 0.0) || !(s > 0.0)) throw std::invalid_argument("dce_sw: y and s must be positive");
  const WeibullParams t0 = tilted(th.y0_sw, th.lambda, s);
  const WeibullParams t1 = tilted(th.y1_sw, th.lambda, s);
  const double p0 = y <= s ? 1.0 : std::exp(weibull_log_survival(y - s, t0));
  double p1;
  if (th.kappa == 0.0) {
    p1 = std::exp(weibull_log_survival(y, t1));
  } else {
    Rng rng(seed);
    double acc = 0.0;
    for (int j = 0; j < mc_size; ++j) {
      const double y0 = s + weibull_sample(t0, rng.uniform());
      const double arg = y - th.kappa * y0;
      acc += arg <= 0.0 ? 1.0 : std::exp(weibull_log_survival(arg, t1));
    }
    p1 = acc / mc_size;
  }
  return p1 - p0;
}

// Both survival probabilities conditioned on the treated outcome reaching the
// switching time, self-normalized over joint draws. Exactly 0 for y <= s; NaN
// when the conditioning event has no Monte Carlo mass.
inline double cdce_sw(double y, double s, const Theta& th, int mc_size, std::uint64_t seed) {
  if (!(y > 0.0) || !(s > 0.0)) throw std::invalid_argument("cdce_sw: y and s must be positive");
  if (y <= s) return 0.0;
  const WeibullParams t0 = tilted(th.y0_sw, th.lambda, s);
  const WeibullParams t1 = tilted(th.y1_sw, th.lambda, s);
  Rng rng(seed);
  long kept = 0, n1 = 0, n0 = 0;
  for (int j = 0; j < mc_size; ++j) {
    const double y0 = s + weibull_sample(t0, rng.uniform());
    const double y1 = th.kappa * y0 + weibull_sample(t1, rng.uniform());
    if (y1 < s) continue;
    ++kept;
    if (y1 > y) ++n1;
    if (y0 > y) ++n0;
  }
  if (kept == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(n1 - n0) / static_cast<double>(kept);
}

// Grid evaluations sharing one Monte Carlo draw set across the whole y grid,
// so curves are smooth in y and the per-grid cost is one pass of samples.
// Pointwise these agree with the scalar versions in distribution, not draw for
// draw (the scalar versions restart the stream per call).
inline std::vector<double> dce_ns_curve(const std::vector<double>& y_grid, const Theta& th,
                                        int mc_size, std::uint64_t seed) {
  validate_grid(y_grid, "dce_ns_curve y_grid");
  std::vector<double> out(y_grid.size());
  if (th.kappa == 0.0) {
    for (std::size_t i = 0; i < y_grid.size(); ++i)
      out[i] = std::exp(weibull_log_survival(y_grid[i], th.y1_ns)) -
               std::exp(weibull_log_survival(y_grid[i], th.y0_ns));
    return out;
  }
  Rng rng(seed);
  std::vector<double> acc(y_grid.size(), 0.0);
  for (int j = 0; j < mc_size; ++j) {
    const double y0 = weibull_sample(th.y0_ns, rng.uniform());
    for (std::size_t i = 0; i < y_grid.size(); ++i) {
      const double arg = y_grid[i] - th.kappa * y0;
      acc[i] += arg <= 0.0 ? 1.0 : std::exp(weibull_log_survival(arg, th.y1_ns));
    }
  }
  for (std::size_t i = 0; i < y_grid.size(); ++i)
    out[i] = acc[i] / mc_size - std::exp(weibull_log_survival(y_grid[i], th.y0_ns));
  return out;
}

inline std::vector<double> dce_sw_curve(const std::vector<double>& y_grid, double s,
                                        const Theta& th, int mc_size, std::uint64_t seed) {
  validate_grid(y_grid, "dce_sw_curve y_grid");
  if (!(s > 0.0)) throw std::invalid_argument("dce_sw_curve: s must be positive");
  const WeibullParams t0 = tilted(th.y0_sw, th.lambda, s);
  const WeibullParams t1 = tilted(th.y1_sw, th.lambda, s);
  std::vector<double> out(y_grid.size());
  const auto ctrl = [&](double y) {
    return y <= s ? 1.0 : std::exp(weibull_log_survival(y - s, t0));
  };
  if (th.kappa == 0.0) {
    for (std::size_t i = 0; i < y_grid.size(); ++i)
      out[i] = std::exp(weibull_log_survival(y_grid[i], t1)) - ctrl(y_grid[i]);
    return out;
  }
  Rng rng(seed);
  std::vector<double> acc(y_grid.size(), 0.0);
  for (int j = 0; j < mc_size; ++j) {
    const double y0 = s + weibull_sample(t0, rng.uniform());
    for (std::size_t i = 0; i < y_grid.size(); ++i) {
      const double arg = y_grid[i] - th.kappa * y0;
      acc[i] += arg <= 0.0 ? 1.0 : std::exp(weibull_log_survival(arg, t1));
    }
  }
  for (std::size_t i = 0; i < y_grid.size(); ++i) out[i] = acc[i] / mc_size - ctrl(y_grid[i]);
  return out;
}

inline std::vector<double> cdce_sw_curve(const std::vector<double>& y_grid, double s,
                                         const Theta& th, int mc_size, std::uint64_t seed) {
  validate_grid(y_grid, "cdce_sw_curve y_grid");
  if (!(s > 0.0)) throw std::invalid_argument("cdce_sw_curve: s must be positive");
  const WeibullParams t0 = tilted(th.y0_sw, th.lambda, s);
  const WeibullParams t1 = tilted(th.y1_sw, th.lambda, s);
  Rng rng(seed);
  long kept = 0;
  std::vector<long> n1(y_grid.size(), 0), n0(y_grid.size(), 0);
  for (int j = 0; j < mc_size; ++j) {
    const double y0 = s + weibull_sample(t0, rng.uniform());
    const double y1 = th.kappa * y0 + weibull_sample(t1, rng.uniform());
    if (y1 < s) continue;
    ++kept;
    for (std::size_t i = 0; i < y_grid.size(); ++i) {
      if (y1 > y_grid[i]) ++n1[i];
      if (y0 > y_grid[i]) ++n0[i];
    }
  }
  std::vector<double> out(y_grid.size());
  for (std::size_t i = 0; i < y_grid.size(); ++i) {
    if (y_grid[i] <= s)
      out[i] = 0.0;
    else if (kept == 0)
      out[i] = std::numeric_limits<double>::quiet_NaN();
    else
      out[i] = static_cast<double>(n1[i] - n0[i]) / static_cast<double>(kept);
  }
  return out;
}

// --- coarsened effects over switching-time sets ---

enum class EstimandKind {
  IttAce,
  IttDce,
  AceNs,
  DceNs,
  AceSw,
  DceSw,
  CdceSw,
  CoarseAce,
  CoarseDce,
  CoarseCdce,
};

// half-open switching-time interval (lo, hi]; lo = 0 and hi = inf give all
// switchers
struct SwitchRegion {
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
};

// Inverse-CDF draw of a switching time restricted to the region; throws when
// the region carries no probability mass.
inline double restricted_switch_sample(const WeibullParams& sw, const SwitchRegion& r,
                                       double u) {
  const double g_lo = r.lo <= 0.0 ? 1.0 : std::exp(weibull_log_survival(r.lo, sw));
  const double g_hi = std::isinf(r.hi) ? 0.0 : std::exp(weibull_log_survival(r.hi, sw));
  const double mass = g_lo - g_hi;
  if (!(mass > 0.0))
    throw std::invalid_argument("restricted_switch_sample: region has zero probability mass");
  return weibull_sample(sw, g_hi + u * mass);
}

struct EstimandRequest {
  EstimandKind kind = EstimandKind::AceNs;
  std::vector<double> y_grid;
  std::vector<double> s_values;
  SwitchRegion region;
  int mc_size = 2000;
};

// Coarse average effect: switching times drawn from the restricted law,
// averaging the closed-form per-s kernel.
inline double coarse_ace(const SwitchRegion& region, const Theta& th, int mc_size,
                         std::uint64_t seed) {
  Rng rng(seed);
  double acc = 0.0;
  for (int j = 0; j < mc_size; ++j)
    acc += ace_sw(restricted_switch_sample(th.sw, region, rng.uniform()), th);
  return acc / mc_size;
}

// Coarse distributional effect on a y grid: joint draws (s, y0), control term
// closed-form per s, treated term conditioned on the drawn y0 when the
// outcomes are linked.
inline std::vector<double> coarse_dce(const SwitchRegion& region, const Theta& th,
                                      int mc_size, const std::vector<double>& y_grid,
                                      std::uint64_t seed) {
  validate_grid(y_grid, "coarse_dce y_grid");
  Rng rng(seed);
  std::vector<double> s(static_cast<std::size_t>(mc_size)), y0(s.size());
  std::vector<WeibullParams> t0(s.size()), t1(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) {
    s[j] = restricted_switch_sample(th.sw, region, rng.uniform());
    t0[j] = tilted(th.y0_sw, th.lambda, s[j]);
    t1[j] = tilted(th.y1_sw, th.lambda, s[j]);
    y0[j] = s[j] + weibull_sample(t0[j], rng.uniform());
  }
  std::vector<double> out;
  out.reserve(y_grid.size());
  for (const double y : y_grid) {
    double acc = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      const double p0 = y <= s[j] ? 1.0 : std::exp(weibull_log_survival(y - s[j], t0[j]));
      double p1;
      if (th.kappa == 0.0) {
        p1 = std::exp(weibull_log_survival(y, t1[j]));
      } else {
        const double arg = y - th.kappa * y0[j];
        p1 = arg <= 0.0 ? 1.0 : std::exp(weibull_log_survival(arg, t1[j]));
      }
      acc += p1 - p0;
    }
    out.push_back(acc / mc_size);
  }
  return out;
}

// Coarse conditional distributional effect: joint (s, y0, y1) draws,
// self-normalized by the event that the treated outcome reaches the switching
// time. NaN on zero conditioning mass.
inline std::vector<double> coarse_cdce(const SwitchRegion& region, const Theta& th,
                                       int mc_size, const std::vector<double>& y_grid,
                                       std::uint64_t seed) {
  validate_grid(y_grid, "coarse_cdce y_grid");
  Rng rng(seed);
  std::vector<double> s, y0, y1;
  s.reserve(static_cast<std::size_t>(mc_size));
  y0.reserve(s.capacity());
  y1.reserve(s.capacity());
  for (int j = 0; j < mc_size; ++j) {
    const double sj = restricted_switch_sample(th.sw, region, rng.uniform());
    const double y0j = sj + weibull_sample(tilted(th.y0_sw, th.lambda, sj), rng.uniform());
    const double y1j = th.kappa * y0j + weibull_sample(tilted(th.y1_sw, th.lambda, sj), rng.uniform());
    if (y1j < sj) continue;
    s.push_back(sj);
    y0.push_back(y0j);
    y1.push_back(y1j);
  }
  std::vector<double> out;
  out.reserve(y_grid.size());
  for (const double y : y_grid) {
    if (s.empty()) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    long n1 = 0, n0 = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y1[j] > y) ++n1;
      if (y0[j] > y) ++n0;
    }
    out.push_back(static_cast<double>(n1 - n0) / static_cast<double>(s.size()));
  }
  return out;
}

// default grids used by the command layer
inline std::vector<double> default_y_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 60; ++i) g.push_back(0.05 * i);
  for (int i = 13; i <= 32; ++i) g.push_back(0.25 * i);
  return g;
}

inline std::vector<double> default_s_values() {
  std::vector<double> g;
  for (int i = 1; i <= 11; ++i) g.push_back(0.25 * i);
  return g;
}

}  // namespace pstrat
