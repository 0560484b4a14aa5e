#pragma once

#include <cmath>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "pstrat/csv.hpp"

namespace pstrat {

// Switch behaviour of one patient under control assignment: either the unit
// never switches, or it switches at a positive time.
struct SwitchStatus {
  bool never = true;
  double time = 0.0;  // meaningful only when never == false

  static SwitchStatus non_switcher() { return SwitchStatus{true, 0.0}; }
  static SwitchStatus at(double s) {
    if (!(s > 0.0) || !std::isfinite(s)) throw std::domain_error("SwitchStatus: switch time must be positive and finite");
    return SwitchStatus{false, s};
  }
  bool is_switcher() const { return !never; }

  friend bool operator==(const SwitchStatus& a, const SwitchStatus& b) {
    return a.never == b.never && (a.never || a.time == b.time);
  }
};

// One observed trial record. Times are in years. For treated units the
// switching columns are structurally empty: s_tilde is NaN in memory and an
// empty CSV field on disk, s_event is 0.
struct PatientRecord {
  int id = 0;
  int z = 0;         // assignment: 0 control, 1 treated
  double c = 0.0;    // administrative censoring time
  double s_tilde = std::numeric_limits<double>::quiet_NaN();
  int s_event = 0;   // 1 if switching observed (controls only)
  double y_tilde = 0.0;
  int y_event = 0;   // 1 if the event observed, 0 if censored at c
};

// Latent values carried by the sampler next to each record.
struct AugmentedUnit {
  SwitchStatus s_star;                 // imputed or observed switch status
  std::optional<double> y0_star;       // control-arm survival time; imputed for treated units when kappa > 0
};

struct Dataset {
  std::vector<PatientRecord> records;
  double c_max = 3.0;  // study duration
};

enum class ObservedPattern {
  KnownNonSwitcher,       // control, death observed, no switch: the natural constraint identifies the stratum
  KnownSwitcherDead,      // control, switch and death both observed
  KnownSwitcherCensored,  // control, switch observed, survival censored
  AmbiguousControl,       // control, doubly censored: stratum not identified
  TreatedUncensored,
  TreatedCensored,
};

struct DataError : std::runtime_error {
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

inline void validate_record(const PatientRecord& r, double c_max) {
  const auto fail = [&](const std::string& msg) {
    throw DataError("record id " + std::to_string(r.id) + ": " + msg);
  };
  if (r.z != 0 && r.z != 1) fail("z must be 0 or 1");
  if (!(r.c > 0.0) || r.c > c_max) fail("censoring time outside (0, c_max]");
  if (r.y_event != 0 && r.y_event != 1) fail("y_event must be 0 or 1");
  if (r.s_event != 0 && r.s_event != 1) fail("s_event must be 0 or 1");
  if (!(r.y_tilde > 0.0) || r.y_tilde > r.c) fail("y_tilde must lie in (0, c]");
  if (r.y_event == 0 && r.y_tilde != r.c) fail("censored survival time must equal c");
  if (r.z == 1) {
    if (r.s_event != 0) fail("treated unit cannot have an observed switch");
    if (!std::isnan(r.s_tilde)) fail("treated unit must have empty s_tilde");
  } else if (r.s_event == 1) {
    if (!(r.s_tilde > 0.0) || r.s_tilde > std::min(r.y_tilde, r.c))
      fail("observed switch time must lie in (0, min(y_tilde, c)]");
  } else {
    if (r.s_tilde != r.c) fail("control without observed switch must have s_tilde = c");
  }
}

inline ObservedPattern classify(const PatientRecord& r) {
  if (r.z == 1) return r.y_event ? ObservedPattern::TreatedUncensored : ObservedPattern::TreatedCensored;
  if (r.s_event == 1) return r.y_event ? ObservedPattern::KnownSwitcherDead : ObservedPattern::KnownSwitcherCensored;
  return r.y_event ? ObservedPattern::KnownNonSwitcher : ObservedPattern::AmbiguousControl;
}

inline void validate_dataset(const Dataset& ds) {
  std::unordered_set<int> ids;
  for (const auto& r : ds.records) {
    validate_record(r, ds.c_max);
    if (!ids.insert(r.id).second)
      throw DataError("duplicate record id " + std::to_string(r.id));
  }
}

inline constexpr const char* kDatasetHeader = "id,z,c,s_tilde,s_event,y_tilde,y_event";

inline Dataset parse_dataset(std::istream& in, double c_max) {
  Dataset ds;
  ds.c_max = c_max;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty input");
  if (csv_trim_eol(line) != kDatasetHeader)
    throw DataError("bad header, expected '" + std::string(kDatasetHeader) + "'");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto sv = csv_trim_eol(line);
    if (sv.empty()) continue;
    const auto f = csv_split(sv);
    if (f.size() != 7)
      throw DataError("line " + std::to_string(lineno) + ": expected 7 fields, got " + std::to_string(f.size()));
    PatientRecord r;
    try {
      r.id = static_cast<int>(parse_long(f[0]));
      r.z = static_cast<int>(parse_long(f[1]));
      r.c = parse_double(f[2]);
      r.s_tilde = f[3].empty() ? std::numeric_limits<double>::quiet_NaN() : parse_double(f[3]);
      r.s_event = static_cast<int>(parse_long(f[4]));
      r.y_tilde = parse_double(f[5]);
      r.y_event = static_cast<int>(parse_long(f[6]));
    } catch (const std::invalid_argument& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
    ds.records.push_back(r);
  }
  validate_dataset(ds);
  return ds;
}

inline Dataset parse_dataset(const std::string& text, double c_max) {
  std::istringstream in(text);
  return parse_dataset(in, c_max);
}

inline void serialize_dataset(const Dataset& ds, std::ostream& out) {
  out << kDatasetHeader << '\n';
  for (const auto& r : ds.records) {
    out << r.id << ',' << r.z << ',' << format_double(r.c) << ',';
    if (!std::isnan(r.s_tilde)) out << format_double(r.s_tilde);
    out << ',' << r.s_event << ',' << format_double(r.y_tilde) << ',' << r.y_event << '\n';
  }
}

inline std::string serialize_dataset(const Dataset& ds) {
  std::ostringstream out;
  serialize_dataset(ds, out);
  return out.str();
}

}  // namespace pstrat
