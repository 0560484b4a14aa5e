#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pstrat/config.hpp"
#include "pstrat/csv.hpp"
#include "pstrat/data.hpp"
#include "pstrat/diagnostics.hpp"
#include "pstrat/estimands.hpp"
#include "pstrat/generator.hpp"
#include "pstrat/model.hpp"
#include "pstrat/ppc.hpp"
#include "pstrat/rng.hpp"
#include "pstrat/sampler.hpp"
#include "pstrat/version.hpp"

namespace pstrat {

namespace detail {

// seed stream ids for the independent random consumers of one run
inline constexpr std::uint64_t kSeedFitBase = 0x10000;
inline constexpr std::uint64_t kSeedVariantBase = 0x20000;
inline constexpr std::uint64_t kSeedIttArm0 = 0x30000;
inline constexpr std::uint64_t kSeedIttArm1 = 0x30001;
inline constexpr std::uint64_t kSeedEstimand = 0x40000;
inline constexpr std::uint64_t kSeedPpc = 0x50000;

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  for (int i = 15; i >= 0; --i) {
    const auto nib = h & 0xF;
    buf[i] = static_cast<char>(nib < 10 ? '0' + nib : 'a' + (nib - 10));
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

}  // namespace detail

inline std::filesystem::path run_root(const RunConfig& cfg) {
  return std::filesystem::path(cfg.out_dir) / cfg.run_id;
}

inline std::filesystem::path kappa_dir(const RunConfig& cfg, double kappa,
                                       const std::string& variant_label = "") {
  auto p = run_root(cfg);
  if (!variant_label.empty()) p /= "lambda=" + variant_label;
  return p / ("kappa=" + format_double(kappa));
}

// Resolved config and a manifest (version, config hash, master seed) at the
// run root. Contents are functions of the config alone, so re-runs are
// byte-identical.
inline void write_manifest(const RunConfig& cfg) {
  const auto root = run_root(cfg);
  std::filesystem::create_directories(root);
  const std::string resolved = serialize_config(cfg);
  detail::write_file(root / "config.ini", resolved);
  std::ostringstream m;
  m << "version = " << kVersion << '\n';
  m << "config_hash = " << detail::fnv1a_hex(resolved) << '\n';
  m << "seed = " << cfg.seed << '\n';
  detail::write_file(root / "manifest.txt", m.str());
}

// The working dataset: an external file when configured, otherwise the bundled
// generator seeded by the master seed (persisted for reference alongside the
// outputs).
inline Dataset load_or_generate(const RunConfig& cfg, bool persist) {
  if (!cfg.dataset_path.empty()) {
    std::ifstream in(cfg.dataset_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open dataset: " + cfg.dataset_path);
    return parse_dataset(in, cfg.generator.c_max);
  }
  GeneratorConfig gen = cfg.generator;
  gen.seed = cfg.seed;
  auto [ds, truth] = generate(gen);
  if (persist) {
    const auto root = run_root(cfg);
    std::filesystem::create_directories(root);
    detail::write_file(root / "data.csv", serialize_dataset(ds));
    detail::write_file(root / "truth.csv", serialize_truth(ds, truth));
  }
  return std::move(ds);
}

inline void cmd_generate(const RunConfig& cfg) {
  write_manifest(cfg);
  if (!cfg.dataset_path.empty())
    throw ConfigError("generate: config names an external dataset; nothing to do");
  load_or_generate(cfg, true);
  std::cout << "wrote " << (run_root(cfg) / "data.csv").string() << " and truth sidecar\n";
}

inline void write_acceptance_table(const Draws& draws, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "chain,block,proposals,accepts,rate,final_scale\n";
  for (std::size_t c = 0; c < draws.chains.size(); ++c) {
    const auto& ch = draws.chains[c];
    for (int b = 0; b < kNumBlocks; ++b) {
      const double rate = ch.proposals[b] > 0 ? static_cast<double>(ch.accepts[b]) /
                                                    static_cast<double>(ch.proposals[b])
                                              : 0.0;
      out << (c + 1) << ',' << block_name(static_cast<ParamBlock>(b)) << ','
          << ch.proposals[b] << ',' << ch.accepts[b] << ',' << format_double(rate) << ','
          << format_double(ch.final_scales[b]) << '\n';
    }
  }
  detail::write_file(path, out.str());
}

// One posterior fit at a given sensitivity point; emits draws, the posterior
// summary table, and acceptance-rate bookkeeping. Returns the largest finite
// scale-reduction value.
inline double fit_one(const Dataset& data, const PriorSpec& prior, McmcConfig mcfg,
                      double kappa, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Draws draws = run_chains(data, prior, mcfg, kappa);
  std::ostringstream draws_csv;
  write_draws(draws, draws_csv);
  detail::write_file(dir / "draws.csv", draws_csv.str());
  const auto rows = fit_summary(draws);
  std::ostringstream summary_csv;
  serialize_fit_summary(rows, summary_csv);
  detail::write_file(dir / "summary.csv", summary_csv.str());
  write_acceptance_table(draws, dir / "acceptance.csv");
  double max_rhat = 0.0;
  for (const auto& r : rows)
    if (!std::isnan(r.rhat) && r.rhat > max_rhat) max_rhat = r.rhat;
  return max_rhat;
}

inline PriorSpec variant_prior(const PriorSpec& base, const LambdaVariant& v) {
  PriorSpec p = base;
  p.lambda_kind = v.kind;
  if (v.kind == LambdaPriorKind::Normal) p.lambda_prior = {0.0, v.var};
  return p;
}

// strict = fail (exit 1) when any scale reduction exceeds the threshold
inline bool cmd_fit(const RunConfig& cfg, bool strict) {
  write_manifest(cfg);
  const Dataset data = load_or_generate(cfg, cfg.dataset_path.empty());
  bool ok = true;
  for (std::size_t i = 0; i < cfg.kappa_grid.size(); ++i) {
    const double kappa = cfg.kappa_grid[i];
    McmcConfig mcfg = cfg.mcmc;
    mcfg.seed = derive_seed(cfg.seed, detail::kSeedFitBase + i);
    mcfg.threads = cfg.threads;
    const auto dir = kappa_dir(cfg, kappa);
    const double max_rhat = fit_one(data, cfg.prior, mcfg, kappa, dir);
    std::cout << "kappa=" << format_double(kappa) << ": max rhat " << format_double(max_rhat)
              << ", draws at " << (dir / "draws.csv").string() << '\n';
    if (max_rhat > cfg.rhat_threshold) ok = false;
  }
  return ok || !strict;
}

namespace detail {

struct CurveWriter {
  std::ostringstream out;
  CurveWriter() { out << "estimand,s,y,kappa,q025,median,q975\n"; }
  void row(const std::string& name, std::optional<double> s, std::optional<double> y,
           std::optional<double> kappa, const EstimandSummary& sum) {
    out << name << ',' << (s ? format_double(*s) : "") << ',' << (y ? format_double(*y) : "")
        << ',' << (kappa ? format_double(*kappa) : "") << ',' << format_double(sum.q025) << ','
        << format_double(sum.median) << ',' << format_double(sum.q975) << '\n';
  }
};

inline std::vector<Theta> flatten_draws(const Draws& draws) {
  std::vector<Theta> out;
  for (const auto& ch : draws.chains)
    out.insert(out.end(), ch.thetas.begin(), ch.thetas.end());
  return out;
}

}  // namespace detail

// Per-draw curves for one fitted sensitivity point, summarized pointwise.
// Monte Carlo seeds depend only on the estimand and grid position, so the
// same random numbers are reused across draws and kappa values.
inline void estimands_one(const Draws& draws, const RunConfig& cfg,
                          const std::filesystem::path& dir) {
  const std::vector<Theta> thetas = detail::flatten_draws(draws);
  if (thetas.empty()) throw std::runtime_error("estimands: no draws to evaluate");
  const double kappa = draws.kappa;
  const int mc = cfg.estimand_mc;
  const std::uint64_t base = derive_seed(cfg.seed, detail::kSeedEstimand);
  detail::CurveWriter w;

  std::vector<double> vals(thetas.size());
  const auto summarize_with = [&](auto&& f) {
    for (std::size_t k = 0; k < thetas.size(); ++k) vals[k] = f(thetas[k]);
    return summarize(vals);
  };

  w.row("ace_ns", std::nullopt, std::nullopt, kappa,
        summarize_with([&](const Theta& t) { return ace_ns(t); }));
  {
    const std::uint64_t seed = derive_seed(base, 0x100);
    std::vector<std::vector<double>> ns_vals(cfg.y_grid.size(),
                                             std::vector<double>(thetas.size()));
    for (std::size_t k = 0; k < thetas.size(); ++k) {
      const auto curve = dce_ns_curve(cfg.y_grid, thetas[k], mc, seed);
      for (std::size_t yi = 0; yi < cfg.y_grid.size(); ++yi) ns_vals[yi][k] = curve[yi];
    }
    for (std::size_t yi = 0; yi < cfg.y_grid.size(); ++yi)
      w.row("dce_ns", std::nullopt, cfg.y_grid[yi], kappa, summarize(ns_vals[yi]));
  }
  for (const double s : cfg.s_values)
    w.row("ace_sw", s, std::nullopt, kappa,
          summarize_with([&](const Theta& t) { return ace_sw(s, t); }));

  std::vector<std::vector<std::vector<double>>> dce_vals(
      cfg.s_values.size(),
      std::vector<std::vector<double>>(cfg.y_grid.size(), std::vector<double>(thetas.size())));
  auto cdce_vals = dce_vals;
  for (std::size_t si = 0; si < cfg.s_values.size(); ++si) {
    const double s = cfg.s_values[si];
    const std::uint64_t seed_d = derive_seed(base, 0x200 + si);
    const std::uint64_t seed_c = derive_seed(base, 0x300 + si);
    for (std::size_t k = 0; k < thetas.size(); ++k) {
      const auto dcurve = dce_sw_curve(cfg.y_grid, s, thetas[k], mc, seed_d);
      const auto ccurve = cdce_sw_curve(cfg.y_grid, s, thetas[k], mc, seed_c);
      for (std::size_t yi = 0; yi < cfg.y_grid.size(); ++yi) {
        dce_vals[si][yi][k] = dcurve[yi];
        cdce_vals[si][yi][k] = ccurve[yi];
      }
    }
  }
  for (std::size_t si = 0; si < cfg.s_values.size(); ++si)
    for (std::size_t yi = 0; yi < cfg.y_grid.size(); ++yi)
      w.row("dce_sw", cfg.s_values[si], cfg.y_grid[yi], kappa, summarize(dce_vals[si][yi]));
  for (std::size_t si = 0; si < cfg.s_values.size(); ++si)
    for (std::size_t yi = 0; yi < cfg.y_grid.size(); ++yi)
      w.row("cdce_sw", cfg.s_values[si], cfg.y_grid[yi], kappa, summarize(cdce_vals[si][yi]));

  const SwitchRegion all;
  const std::uint64_t seed_a = derive_seed(base, 0x400);
  w.row("coarse_ace", std::nullopt, std::nullopt, kappa,
        summarize_with([&](const Theta& t) { return coarse_ace(all, t, mc, seed_a); }));
  {
    const std::uint64_t seed_d = derive_seed(base, 0x500);
    const std::uint64_t seed_c = derive_seed(base, 0x600);
    std::vector<std::vector<double>> cd(cfg.y_grid.size(), std::vector<double>(thetas.size()));
    auto cc = cd;
    for (std::size_t k = 0; k < thetas.size(); ++k) {
      const auto dcurve = coarse_dce(all, thetas[k], mc, cfg.y_grid, seed_d);
      const auto ccurve = coarse_cdce(all, thetas[k], mc, cfg.y_grid, seed_c);
      for (std::size_t yi = 0; yi < cfg.y_grid.size(); ++yi) {
        cd[yi][k] = dcurve[yi];
        cc[yi][k] = ccurve[yi];
      }
    }
    for (std::size_t yi = 0; yi < cfg.y_grid.size(); ++yi)
      w.row("coarse_dce", std::nullopt, cfg.y_grid[yi], kappa, summarize(cd[yi]));
    for (std::size_t yi = 0; yi < cfg.y_grid.size(); ++yi)
      w.row("coarse_cdce", std::nullopt, cfg.y_grid[yi], kappa, summarize(cc[yi]));
  }

  detail::write_file(dir / "curves.csv", w.out.str());
}

// Assignment-only analysis: independent censored Weibull fits per arm, with
// the average effect and the survival-difference curve summarized per draw.
inline void itt_estimands(const Dataset& data, const RunConfig& cfg) {
  std::vector<double> t0, t1;
  std::vector<int> e0, e1;
  for (const auto& rec : data.records) {
    (rec.z == 1 ? t1 : t0).push_back(rec.y_tilde);
    (rec.z == 1 ? e1 : e0).push_back(rec.y_event);
  }
  constexpr long kIters = 30000, kBurn = 5000, kThin = 10;
  const auto arm0 = censored_weibull_fit(t0, e0, kIters, kBurn, kThin,
                                         derive_seed(cfg.seed, detail::kSeedIttArm0));
  const auto arm1 = censored_weibull_fit(t1, e1, kIters, kBurn, kThin,
                                         derive_seed(cfg.seed, detail::kSeedIttArm1));
  const std::size_t n = std::min(arm0.size(), arm1.size());
  if (n == 0) throw std::runtime_error("itt: no posterior draws");

  detail::CurveWriter w;
  std::vector<double> vals(n);
  for (std::size_t k = 0; k < n; ++k) vals[k] = itt_ace(arm0[k], arm1[k]);
  w.row("itt_ace", std::nullopt, std::nullopt, std::nullopt, summarize(vals));
  for (const double y : cfg.y_grid) {
    for (std::size_t k = 0; k < n; ++k) vals[k] = itt_dce(y, arm0[k], arm1[k]);
    w.row("itt_dce", std::nullopt, y, std::nullopt, summarize(vals));
  }
  detail::write_file(run_root(cfg) / "itt.csv", w.out.str());
}

inline Draws read_draws(const std::filesystem::path& dir, double kappa) {
  std::ifstream in(dir / "draws.csv", std::ios::binary);
  if (!in) throw std::runtime_error("no draws at " + (dir / "draws.csv").string());
  return parse_draws(in, kappa);
}

inline void cmd_estimands(const RunConfig& cfg) {
  write_manifest(cfg);
  const Dataset data = load_or_generate(cfg, false);
  itt_estimands(data, cfg);
  for (const double kappa : cfg.kappa_grid) {
    const auto dir = kappa_dir(cfg, kappa);
    const Draws draws = read_draws(dir, kappa);
    estimands_one(draws, cfg, dir);
    std::cout << "wrote " << (dir / "curves.csv").string() << '\n';
  }
}

inline void cmd_ppc(const RunConfig& cfg) {
  write_manifest(cfg);
  bool has_zero = false;
  for (const double k : cfg.kappa_grid)
    if (k == 0.0) has_zero = true;
  if (!has_zero)
    throw ConfigError(
        "ppc: checks are defined for kappa = 0 only; add 0 to the kappa grid and fit it");
  const Dataset data = load_or_generate(cfg, false);
  const auto dir = kappa_dir(cfg, 0.0);
  const Draws draws = read_draws(dir, 0.0);
  PpcConfig pcfg = cfg.ppc;
  pcfg.seed = derive_seed(cfg.seed, detail::kSeedPpc);
  const PppvReport report = run_ppc(data, draws, pcfg);
  detail::write_file(dir / "ppc_report.csv", serialize_ppc_report(report));
  detail::write_file(dir / "ppc_km.csv", serialize_ppc_km(report));
  std::cout << "wrote " << (dir / "ppc_report.csv").string() << " over " << report.n_draws
            << " draws\n";
}

inline bool cmd_diagnose(const RunConfig& cfg, bool strict) {
  write_manifest(cfg);
  bool ok = true;
  for (const double kappa : cfg.kappa_grid) {
    const auto dir = kappa_dir(cfg, kappa);
    const Draws draws = read_draws(dir, kappa);
    const auto rows = fit_summary(draws);
    std::ostringstream summary_csv;
    serialize_fit_summary(rows, summary_csv);
    detail::write_file(dir / "summary.csv", summary_csv.str());
    double max_rhat = 0.0;
    std::string worst;
    for (const auto& r : rows) {
      if (!std::isnan(r.rhat) && r.rhat > max_rhat) {
        max_rhat = r.rhat;
        worst = r.name;
      }
    }
    std::cout << "kappa=" << format_double(kappa) << ": max rhat " << format_double(max_rhat)
              << " (" << worst << ")\n";
    if (max_rhat > cfg.rhat_threshold) ok = false;
  }
  return ok || !strict;
}

// Full sensitivity pass: the kappa grid under the base prior, then the
// alternative association-prior variants at kappa = 0.
inline bool cmd_sensitivity(const RunConfig& cfg, bool strict) {
  write_manifest(cfg);
  const Dataset data = load_or_generate(cfg, cfg.dataset_path.empty());
  itt_estimands(data, cfg);
  bool ok = true;
  for (std::size_t i = 0; i < cfg.kappa_grid.size(); ++i) {
    const double kappa = cfg.kappa_grid[i];
    McmcConfig mcfg = cfg.mcmc;
    mcfg.seed = derive_seed(cfg.seed, detail::kSeedFitBase + i);
    mcfg.threads = cfg.threads;
    const auto dir = kappa_dir(cfg, kappa);
    const double max_rhat = fit_one(data, cfg.prior, mcfg, kappa, dir);
    if (max_rhat > cfg.rhat_threshold) ok = false;
    estimands_one(read_draws(dir, kappa), cfg, dir);
    std::cout << "kappa=" << format_double(kappa) << ": max rhat " << format_double(max_rhat)
              << '\n';
  }
  for (std::size_t v = 0; v < cfg.lambda_variants.size(); ++v) {
    const auto& variant = cfg.lambda_variants[v];
    const std::string label = lambda_variant_label(variant);
    McmcConfig mcfg = cfg.mcmc;
    mcfg.seed = derive_seed(cfg.seed, detail::kSeedVariantBase + v);
    mcfg.threads = cfg.threads;
    const auto dir = kappa_dir(cfg, 0.0, label);
    const double max_rhat = fit_one(data, variant_prior(cfg.prior, variant), mcfg, 0.0, dir);
    if (max_rhat > cfg.rhat_threshold) ok = false;
    estimands_one(read_draws(dir, 0.0), cfg, dir);
    std::cout << "lambda variant " << label << ": max rhat " << format_double(max_rhat) << '\n';
  }
  return ok || !strict;
}

}  // namespace pstrat
