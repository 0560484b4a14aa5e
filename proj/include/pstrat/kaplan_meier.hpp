#pragma once

#include <algorithm>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "pstrat/csv.hpp"

namespace pstrat {

// Product-limit estimate over the distinct event times. Steps are right
// continuous; ties between events and censorings at the same time are resolved
// events-first (the censored unit is still at risk for the tied event).
struct KmCurve {
  std::vector<double> times;     // strictly increasing event times
  std::vector<double> survival;  // value just after each event time
  std::vector<long> at_risk;
  std::vector<long> events;
};

inline KmCurve km_fit(const std::vector<double>& times, const std::vector<int>& event_flags) {
  if (times.empty()) throw std::invalid_argument("km_fit: empty input");
  if (times.size() != event_flags.size())
    throw std::invalid_argument("km_fit: times/events length mismatch");
  std::vector<std::size_t> order(times.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return times[a] < times[b]; });

  KmCurve curve;
  double surv = 1.0;
  long at_risk = static_cast<long>(times.size());
  std::size_t i = 0;
  while (i < order.size()) {
    const double t = times[order[i]];
    long d = 0, removed = 0;
    while (i < order.size() && times[order[i]] == t) {
      d += event_flags[order[i]] ? 1 : 0;
      ++removed;
      ++i;
    }
    if (d > 0) {
      surv *= 1.0 - static_cast<double>(d) / static_cast<double>(at_risk);
      curve.times.push_back(t);
      curve.survival.push_back(surv);
      curve.at_risk.push_back(at_risk);
      curve.events.push_back(d);
    }
    at_risk -= removed;
  }
  return curve;
}

inline double km_eval(const KmCurve& curve, double t) {
  if (t < 0.0) throw std::invalid_argument("km_eval: t must be >= 0");
  // first event time strictly greater than t; survival is the value at the
  // preceding step
  const auto it = std::upper_bound(curve.times.begin(), curve.times.end(), t);
  if (it == curve.times.begin()) return 1.0;
  return curve.survival[static_cast<std::size_t>(it - curve.times.begin()) - 1];
}

inline void serialize_km(const KmCurve& curve, std::ostream& out) {
  out << "t,survival,at_risk,events\n";
  for (std::size_t i = 0; i < curve.times.size(); ++i) {
    out << format_double(curve.times[i]) << ',' << format_double(curve.survival[i]) << ','
        << curve.at_risk[i] << ',' << curve.events[i] << '\n';
  }
}

inline std::string serialize_km(const KmCurve& curve) {
  std::ostringstream out;
  serialize_km(curve, out);
  return out.str();
}

}  // namespace pstrat
