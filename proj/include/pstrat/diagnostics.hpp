#pragma once

#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pstrat/csv.hpp"
#include "pstrat/estimands.hpp"
#include "pstrat/sampler.hpp"

namespace pstrat {

// Potential scale reduction over m chains of common length n. NaN marks the
// degenerate no-within-variance case.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw std::invalid_argument("gelman_rubin: need at least 2 chains");
  const std::size_t n = chains[0].size();
  if (n < 2) throw std::invalid_argument("gelman_rubin: need at least 2 draws per chain");
  for (const auto& c : chains)
    if (c.size() != n) throw std::invalid_argument("gelman_rubin: chains must have equal length");

  std::vector<double> means(m, 0.0);
  double w = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    double mu = 0.0;
    for (const double v : chains[j]) mu += v;
    mu /= static_cast<double>(n);
    means[j] = mu;
    double ss = 0.0;
    for (const double v : chains[j]) ss += (v - mu) * (v - mu);
    w += ss / static_cast<double>(n - 1);
  }
  w /= static_cast<double>(m);

  double grand = 0.0;
  for (const double mu : means) grand += mu;
  grand /= static_cast<double>(m);
  double bss = 0.0;
  for (const double mu : means) bss += (mu - grand) * (mu - grand);
  const double b = static_cast<double>(n) * bss / static_cast<double>(m - 1);

  if (w == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const double nn = static_cast<double>(n);
  return std::sqrt(((nn - 1.0) / nn * w + b / nn) / w);
}

// Scalar series tracked in the draws: the mixing weight, the eleven Metropolis
// blocks, then the per-draw snapshot columns.
inline constexpr int kSummaryColumnCount = kNumBlocks + 4;

inline std::string summary_column_name(int col) {
  if (col == 0) return "pi";
  if (col >= 1 && col <= kNumBlocks) return block_name(static_cast<ParamBlock>(col - 1));
  switch (col - kNumBlocks - 1) {
    case 0: return "ace_ns";
    case 1: return "e_y0_ns";
    case 2: return "e_y1_ns";
  }
  throw std::invalid_argument("summary_column_name: bad column");
}

inline std::vector<double> summary_column(const ChainDraws& ch, int col) {
  std::vector<double> out;
  out.reserve(ch.thetas.size());
  for (std::size_t k = 0; k < ch.thetas.size(); ++k) {
    if (col == 0)
      out.push_back(ch.thetas[k].pi);
    else if (col >= 1 && col <= kNumBlocks)
      out.push_back(get_param(ch.thetas[k], static_cast<ParamBlock>(col - 1)));
    else
      out.push_back(ch.snaps[k][static_cast<std::size_t>(col - kNumBlocks - 1)]);
  }
  return out;
}

struct ParamSummaryRow {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double median = 0.0;
  double q975 = 0.0;
  double rhat = 0.0;
};

// Pooled posterior summary per tracked scalar, with the across-chain scale
// reduction when more than one chain is present.
inline std::vector<ParamSummaryRow> fit_summary(const Draws& draws) {
  if (draws.chains.empty()) throw std::invalid_argument("fit_summary: no chains");
  std::vector<ParamSummaryRow> rows;
  for (int col = 0; col < kSummaryColumnCount; ++col) {
    std::vector<std::vector<double>> per_chain;
    std::vector<double> pooled;
    for (const auto& ch : draws.chains) {
      per_chain.push_back(summary_column(ch, col));
      pooled.insert(pooled.end(), per_chain.back().begin(), per_chain.back().end());
    }
    if (pooled.empty()) throw std::invalid_argument("fit_summary: no draws");
    ParamSummaryRow row;
    row.name = summary_column_name(col);
    double mu = 0.0;
    for (const double v : pooled) mu += v;
    mu /= static_cast<double>(pooled.size());
    row.mean = mu;
    double ss = 0.0;
    for (const double v : pooled) ss += (v - mu) * (v - mu);
    row.sd = pooled.size() > 1 ? std::sqrt(ss / static_cast<double>(pooled.size() - 1)) : 0.0;
    const EstimandSummary es = summarize(pooled);
    row.q025 = es.q025;
    row.median = es.median;
    row.q975 = es.q975;
    row.rhat = (per_chain.size() >= 2 && per_chain[0].size() >= 2)
                   ? gelman_rubin(per_chain)
                   : std::numeric_limits<double>::quiet_NaN();
    rows.push_back(row);
  }
  return rows;
}

inline constexpr const char* kSummaryHeader = "param,mean,sd,q025,median,q975,rhat";

inline void serialize_fit_summary(const std::vector<ParamSummaryRow>& rows, std::ostream& out) {
  out << kSummaryHeader << '\n';
  for (const auto& r : rows) {
    out << r.name << ',' << format_double(r.mean) << ',' << format_double(r.sd) << ','
        << format_double(r.q025) << ',' << format_double(r.median) << ','
        << format_double(r.q975) << ',' << format_double(r.rhat) << '\n';
  }
}

inline std::string serialize_fit_summary(const std::vector<ParamSummaryRow>& rows) {
  std::ostringstream out;
  serialize_fit_summary(rows, out);
  return out.str();
}

}  // namespace pstrat
