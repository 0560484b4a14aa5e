#pragma once

#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pstrat/data.hpp"
#include "pstrat/model.hpp"
#include "pstrat/rng.hpp"

namespace pstrat {

struct GeneratorConfig {
  int n = 1000;
  double p_treat = 0.5;
  Theta theta_true;
  double c_min = 1.5;  // staggered-entry window: censoring uniform on [c_min, c_max]
  double c_max = 3.0;
  std::uint64_t seed = 0;
};

struct LatentUnit {
  SwitchStatus s0;
  double y0 = 0.0;
  double y1 = 0.0;
};

// Draw one unit's latent triple and apply the observation rules for given
// assignment and censoring time. Switchers satisfy s < y0 by construction, so
// the observed patterns are exactly the four control cases plus the two
// treated ones.
inline std::pair<PatientRecord, LatentUnit> generate_unit(int z, double c, const Theta& th,
                                                          Rng& rng) {
  LatentUnit lat;
  if (rng.uniform() < th.pi) {
    lat.s0 = SwitchStatus::non_switcher();
    lat.y0 = weibull_sample(th.y0_ns, rng.uniform());
    lat.y1 = th.kappa * lat.y0 + weibull_sample(th.y1_ns, rng.uniform());
  } else {
    const double s = weibull_sample(th.sw, rng.uniform());
    lat.s0 = SwitchStatus::at(s);
    lat.y0 = s + weibull_sample(tilted(th.y0_sw, th.lambda, s), rng.uniform());
    lat.y1 = th.kappa * lat.y0 + weibull_sample(tilted(th.y1_sw, th.lambda, s), rng.uniform());
  }

  PatientRecord rec;
  rec.z = z;
  rec.c = c;
  const double y = z == 1 ? lat.y1 : lat.y0;
  rec.y_event = y <= c ? 1 : 0;
  rec.y_tilde = rec.y_event ? y : c;
  if (z == 0) {
    if (lat.s0.is_switcher() && lat.s0.time <= c) {
      rec.s_event = 1;
      rec.s_tilde = lat.s0.time;
    } else {
      rec.s_event = 0;
      rec.s_tilde = c;
    }
  }
  return {rec, lat};
}

inline std::pair<Dataset, std::vector<LatentUnit>> generate(const GeneratorConfig& cfg) {
  if (cfg.n < 2) throw std::invalid_argument("generate: n must be >= 2");
  if (!(cfg.p_treat > 0.0 && cfg.p_treat < 1.0))
    throw std::invalid_argument("generate: p_treat must be in (0,1)");
  if (!(cfg.c_min > 0.0 && cfg.c_min <= cfg.c_max))
    throw std::invalid_argument("generate: need 0 < c_min <= c_max");
  if (!theta_valid(cfg.theta_true)) throw std::invalid_argument("generate: invalid theta_true");

  Rng rng(cfg.seed);
  Dataset ds;
  ds.c_max = cfg.c_max;
  ds.records.reserve(static_cast<std::size_t>(cfg.n));
  std::vector<LatentUnit> truth;
  truth.reserve(static_cast<std::size_t>(cfg.n));
  for (int i = 0; i < cfg.n; ++i) {
    const int z = rng.uniform() < cfg.p_treat ? 1 : 0;
    const double c = rng.uniform(cfg.c_min, cfg.c_max);
    auto [rec, lat] = generate_unit(z, c, cfg.theta_true, rng);
    rec.id = i + 1;
    ds.records.push_back(rec);
    truth.push_back(lat);
  }
  return {std::move(ds), std::move(truth)};
}

inline constexpr const char* kTruthHeader = "id,s0,y0,y1";

inline void serialize_truth(const Dataset& ds, const std::vector<LatentUnit>& truth,
                            std::ostream& out) {
  out << kTruthHeader << '\n';
  for (std::size_t i = 0; i < truth.size(); ++i) {
    out << ds.records[i].id << ',';
    if (truth[i].s0.is_switcher()) out << format_double(truth[i].s0.time);
    out << ',' << format_double(truth[i].y0) << ',' << format_double(truth[i].y1) << '\n';
  }
}

inline std::string serialize_truth(const Dataset& ds, const std::vector<LatentUnit>& truth) {
  std::ostringstream out;
  serialize_truth(ds, truth, out);
  return out.str();
}

}  // namespace pstrat
