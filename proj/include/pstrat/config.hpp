#pragma once

#include <cctype>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pstrat/csv.hpp"
#include "pstrat/estimands.hpp"
#include "pstrat/generator.hpp"
#include "pstrat/model.hpp"
#include "pstrat/ppc.hpp"
#include "pstrat/sampler.hpp"

namespace pstrat {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parameter point the bundled generator defaults reproduce: a trial with
// moderate switching, late censoring, and a mildly positive switching-time
// association.
inline Theta default_truth() {
  Theta t;
  t.pi = 0.38;
  t.sw = {1.56, -1.29};
  t.y0_ns = {1.38, -1.09};
  t.y0_sw = {0.94, -1.21};
  t.y1_ns = {1.29, -1.85};
  t.y1_sw = {1.30, -2.24};
  t.lambda = 0.10;
  t.kappa = 0.0;
  return t;
}

struct LambdaVariant {
  LambdaPriorKind kind = LambdaPriorKind::Normal;
  double var = 1e4;
};

inline std::string lambda_variant_label(const LambdaVariant& v) {
  if (v.kind == LambdaPriorKind::ImproperUniform) return "uniform";
  return "normal_" + format_double(v.var);
}

struct RunConfig {
  std::string run_id = "run";
  std::string out_dir = "out";
  std::string dataset_path;  // empty: generate a synthetic trial instead
  std::uint64_t seed = 0;
  int threads = 1;
  double rhat_threshold = 1.1;

  GeneratorConfig generator{1000, 0.5, default_truth(), 1.5, 3.0, 0};
  PriorSpec prior;
  McmcConfig mcmc;

  std::vector<double> kappa_grid{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<LambdaVariant> lambda_variants{{LambdaPriorKind::Normal, 1.0},
                                             {LambdaPriorKind::Normal, 10.0},
                                             {LambdaPriorKind::ImproperUniform, 0.0}};
  int estimand_mc = 2000;
  std::vector<double> y_grid = default_y_grid();
  std::vector<double> s_values = default_s_values();
  PpcConfig ppc;
};

inline void validate_config(const RunConfig& c) {
  if (c.run_id.empty()) throw ConfigError("config: run id must not be empty");
  for (const char ch : c.run_id)
    if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '-' || ch == '_'))
      throw ConfigError("config: run id must be alphanumeric with - or _");
  if (c.threads < 1) throw ConfigError("config: threads must be >= 1");
  if (c.kappa_grid.empty()) throw ConfigError("config: kappa grid must not be empty");
  for (const double k : c.kappa_grid)
    if (!(k >= 0.0 && k <= 1.0)) throw ConfigError("config: kappa values must lie in [0,1]");
  if (c.estimand_mc < 1) throw ConfigError("config: mc_size must be >= 1");
  try {
    validate_mcmc_config(c.mcmc);
    validate_grid(c.y_grid, "y_grid");
    validate_grid(c.s_values, "s_values");
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.dataset_path.empty()) {
    if (c.generator.n < 2) throw ConfigError("config: generator n must be >= 2");
    if (!theta_valid(c.generator.theta_true))
      throw ConfigError("config: generator truth parameters invalid");
  }
  if (!(c.ppc.t_step > 0.0) || !(c.ppc.t_max >= c.ppc.t_step))
    throw ConfigError("config: ppc grid must satisfy 0 < t_step <= t_max");
  if (c.ppc.refresh_sweeps < 1) throw ConfigError("config: ppc refresh_sweeps must be >= 1");
}

namespace detail {

inline std::string trim(std::string_view sv) {
  std::size_t b = 0, e = sv.size();
  while (b < e && std::isspace(static_cast<unsigned char>(sv[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(sv[e - 1]))) --e;
  return std::string(sv.substr(b, e - b));
}

using IniDoc = std::map<std::string, std::map<std::string, std::string>>;

inline IniDoc parse_ini(std::istream& in) {
  IniDoc doc;
  std::string line, section;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(csv_trim_eol(line));
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
      section = trim(std::string_view(t).substr(1, t.size() - 2));
      if (section.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string val = trim(std::string_view(t).substr(eq + 1));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    if (section.empty())
      throw ConfigError("config line " + std::to_string(line_no) + ": key outside any section");
    if (!doc[section].emplace(key, val).second)
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key " + key);
  }
  return doc;
}

inline double to_double(const std::string& s, const std::string& where) {
  try {
    return parse_double(s);
  } catch (const std::invalid_argument&) {
    throw ConfigError("config: bad number for " + where + ": '" + s + "'");
  }
}

inline long to_long(const std::string& s, const std::string& where) {
  try {
    return parse_long(s);
  } catch (const std::invalid_argument&) {
    throw ConfigError("config: bad integer for " + where + ": '" + s + "'");
  }
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto comma = s.find(',', pos);
    const auto end = comma == std::string::npos ? s.size() : comma;
    const std::string tok = trim(std::string_view(s).substr(pos, end - pos));
    if (!tok.empty()) out.push_back(tok);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline std::vector<double> to_double_list(const std::string& s, const std::string& where) {
  std::vector<double> out;
  for (const auto& tok : split_list(s)) out.push_back(to_double(tok, where));
  if (out.empty()) throw ConfigError("config: empty list for " + where);
  return out;
}

// Applies one section's keys through a dispatch map, rejecting unknown keys.
class SectionReader {
 public:
  SectionReader(const IniDoc& doc, std::string section) : section_(std::move(section)) {
    const auto it = doc.find(section_);
    if (it != doc.end()) keys_ = &it->second;
  }

  template <typename F>
  void key(const std::string& name, F&& apply) {
    seen_.push_back(name);
    if (!keys_) return;
    const auto it = keys_->find(name);
    if (it != keys_->end()) apply(it->second, section_ + "." + name);
  }

  void finish() const {
    if (!keys_) return;
    for (const auto& [k, v] : *keys_) {
      bool known = false;
      for (const auto& s : seen_)
        if (s == k) known = true;
      if (!known) throw ConfigError("config: unknown key " + section_ + "." + k);
    }
  }

 private:
  std::string section_;
  const std::map<std::string, std::string>* keys_ = nullptr;
  std::vector<std::string> seen_;
};

}  // namespace detail

inline RunConfig parse_config(std::istream& in) {
  const detail::IniDoc doc = detail::parse_ini(in);
  for (const auto& [section, _] : doc) {
    if (section != "run" && section != "generate" && section != "prior" && section != "mcmc" &&
        section != "analysis" && section != "ppc")
      throw ConfigError("config: unknown section [" + section + "]");
  }
  RunConfig c;

  detail::SectionReader run(doc, "run");
  run.key("id", [&](const std::string& v, const std::string&) { c.run_id = v; });
  run.key("out", [&](const std::string& v, const std::string&) { c.out_dir = v; });
  run.key("dataset", [&](const std::string& v, const std::string&) { c.dataset_path = v; });
  run.key("seed", [&](const std::string& v, const std::string& w) {
    c.seed = static_cast<std::uint64_t>(detail::to_long(v, w));
  });
  run.key("threads", [&](const std::string& v, const std::string& w) {
    c.threads = static_cast<int>(detail::to_long(v, w));
  });
  run.key("rhat_threshold", [&](const std::string& v, const std::string& w) {
    c.rhat_threshold = detail::to_double(v, w);
  });
  run.finish();

  detail::SectionReader gen(doc, "generate");
  gen.key("n", [&](const std::string& v, const std::string& w) {
    c.generator.n = static_cast<int>(detail::to_long(v, w));
  });
  gen.key("p_treat", [&](const std::string& v, const std::string& w) {
    c.generator.p_treat = detail::to_double(v, w);
  });
  gen.key("c_min", [&](const std::string& v, const std::string& w) {
    c.generator.c_min = detail::to_double(v, w);
  });
  gen.key("c_max", [&](const std::string& v, const std::string& w) {
    c.generator.c_max = detail::to_double(v, w);
  });
  Theta& t = c.generator.theta_true;
  gen.key("pi", [&](const std::string& v, const std::string& w) { t.pi = detail::to_double(v, w); });
  gen.key("alpha_s",
          [&](const std::string& v, const std::string& w) { t.sw.shape = detail::to_double(v, w); });
  gen.key("beta_s", [&](const std::string& v, const std::string& w) {
    t.sw.log_rate = detail::to_double(v, w);
  });
  gen.key("alpha_y_ns", [&](const std::string& v, const std::string& w) {
    t.y0_ns.shape = detail::to_double(v, w);
  });
  gen.key("beta_y_ns", [&](const std::string& v, const std::string& w) {
    t.y0_ns.log_rate = detail::to_double(v, w);
  });
  gen.key("alpha_y_sw", [&](const std::string& v, const std::string& w) {
    t.y0_sw.shape = detail::to_double(v, w);
  });
  gen.key("beta_y_sw", [&](const std::string& v, const std::string& w) {
    t.y0_sw.log_rate = detail::to_double(v, w);
  });
  gen.key("nu_y_ns", [&](const std::string& v, const std::string& w) {
    t.y1_ns.shape = detail::to_double(v, w);
  });
  gen.key("gamma_y_ns", [&](const std::string& v, const std::string& w) {
    t.y1_ns.log_rate = detail::to_double(v, w);
  });
  gen.key("nu_y_sw", [&](const std::string& v, const std::string& w) {
    t.y1_sw.shape = detail::to_double(v, w);
  });
  gen.key("gamma_y_sw", [&](const std::string& v, const std::string& w) {
    t.y1_sw.log_rate = detail::to_double(v, w);
  });
  gen.key("lambda",
          [&](const std::string& v, const std::string& w) { t.lambda = detail::to_double(v, w); });
  gen.key("kappa",
          [&](const std::string& v, const std::string& w) { t.kappa = detail::to_double(v, w); });
  gen.finish();

  detail::SectionReader prior(doc, "prior");
  PriorSpec& p = c.prior;
  prior.key("pi_a",
            [&](const std::string& v, const std::string& w) { p.pi_a = detail::to_double(v, w); });
  prior.key("pi_b",
            [&](const std::string& v, const std::string& w) { p.pi_b = detail::to_double(v, w); });
  const auto gamma_keys = [&](const std::string& base, GammaHyper& h) {
    prior.key(base + "_shape",
              [&](const std::string& v, const std::string& w) { h.shape = detail::to_double(v, w); });
    prior.key(base + "_scale",
              [&](const std::string& v, const std::string& w) { h.scale = detail::to_double(v, w); });
  };
  const auto normal_keys = [&](const std::string& base, NormalHyper& h) {
    prior.key(base + "_mean",
              [&](const std::string& v, const std::string& w) { h.mean = detail::to_double(v, w); });
    prior.key(base + "_var",
              [&](const std::string& v, const std::string& w) { h.var = detail::to_double(v, w); });
  };
  gamma_keys("alpha_s", p.sw_shape);
  normal_keys("beta_s", p.sw_loc);
  gamma_keys("alpha_y_ns", p.y0_ns_shape);
  normal_keys("beta_y_ns", p.y0_ns_loc);
  gamma_keys("alpha_y_sw", p.y0_sw_shape);
  normal_keys("beta_y_sw", p.y0_sw_loc);
  gamma_keys("nu_y_ns", p.y1_ns_shape);
  normal_keys("gamma_y_ns", p.y1_ns_loc);
  gamma_keys("nu_y_sw", p.y1_sw_shape);
  normal_keys("gamma_y_sw", p.y1_sw_loc);
  prior.key("lambda_prior", [&](const std::string& v, const std::string& w) {
    if (v == "normal")
      p.lambda_kind = LambdaPriorKind::Normal;
    else if (v == "uniform")
      p.lambda_kind = LambdaPriorKind::ImproperUniform;
    else
      throw ConfigError("config: " + w + " must be 'normal' or 'uniform'");
  });
  normal_keys("lambda", p.lambda_prior);
  prior.finish();

  detail::SectionReader mcmc(doc, "mcmc");
  mcmc.key("iterations", [&](const std::string& v, const std::string& w) {
    c.mcmc.n_iter = detail::to_long(v, w);
  });
  mcmc.key("burn_in", [&](const std::string& v, const std::string& w) {
    c.mcmc.burn_in = detail::to_long(v, w);
  });
  mcmc.key("thin",
           [&](const std::string& v, const std::string& w) { c.mcmc.thin = detail::to_long(v, w); });
  mcmc.key("chains", [&](const std::string& v, const std::string& w) {
    c.mcmc.n_chains = static_cast<int>(detail::to_long(v, w));
  });
  mcmc.finish();

  detail::SectionReader analysis(doc, "analysis");
  analysis.key("kappa_grid", [&](const std::string& v, const std::string& w) {
    c.kappa_grid = detail::to_double_list(v, w);
  });
  analysis.key("lambda_variants", [&](const std::string& v, const std::string& w) {
    c.lambda_variants.clear();
    for (const auto& tok : detail::split_list(v)) {
      if (tok == "uniform")
        c.lambda_variants.push_back({LambdaPriorKind::ImproperUniform, 0.0});
      else
        c.lambda_variants.push_back({LambdaPriorKind::Normal, detail::to_double(tok, w)});
    }
  });
  analysis.key("mc_size", [&](const std::string& v, const std::string& w) {
    c.estimand_mc = static_cast<int>(detail::to_long(v, w));
  });
  analysis.key("y_grid", [&](const std::string& v, const std::string& w) {
    c.y_grid = detail::to_double_list(v, w);
  });
  analysis.key("s_values", [&](const std::string& v, const std::string& w) {
    c.s_values = detail::to_double_list(v, w);
  });
  analysis.finish();

  detail::SectionReader ppc(doc, "ppc");
  ppc.key("refresh_sweeps", [&](const std::string& v, const std::string& w) {
    c.ppc.refresh_sweeps = detail::to_long(v, w);
  });
  ppc.key("t_max", [&](const std::string& v, const std::string& w) {
    c.ppc.t_max = detail::to_double(v, w);
  });
  ppc.key("t_step", [&](const std::string& v, const std::string& w) {
    c.ppc.t_step = detail::to_double(v, w);
  });
  ppc.finish();

  validate_config(c);
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline void serialize_config(const RunConfig& c, std::ostream& out) {
  const auto num = [](double v) { return format_double(v); };
  out << "[run]\n";
  out << "id = " << c.run_id << '\n';
  out << "out = " << c.out_dir << '\n';
  out << "dataset = " << c.dataset_path << '\n';
  out << "seed = " << c.seed << '\n';
  out << "threads = " << c.threads << '\n';
  out << "rhat_threshold = " << num(c.rhat_threshold) << '\n';

  const Theta& t = c.generator.theta_true;
  out << "\n[generate]\n";
  out << "n = " << c.generator.n << '\n';
  out << "p_treat = " << num(c.generator.p_treat) << '\n';
  out << "c_min = " << num(c.generator.c_min) << '\n';
  out << "c_max = " << num(c.generator.c_max) << '\n';
  out << "pi = " << num(t.pi) << '\n';
  out << "alpha_s = " << num(t.sw.shape) << '\n';
  out << "beta_s = " << num(t.sw.log_rate) << '\n';
  out << "alpha_y_ns = " << num(t.y0_ns.shape) << '\n';
  out << "beta_y_ns = " << num(t.y0_ns.log_rate) << '\n';
  out << "alpha_y_sw = " << num(t.y0_sw.shape) << '\n';
  out << "beta_y_sw = " << num(t.y0_sw.log_rate) << '\n';
  out << "nu_y_ns = " << num(t.y1_ns.shape) << '\n';
  out << "gamma_y_ns = " << num(t.y1_ns.log_rate) << '\n';
  out << "nu_y_sw = " << num(t.y1_sw.shape) << '\n';
  out << "gamma_y_sw = " << num(t.y1_sw.log_rate) << '\n';
  out << "lambda = " << num(t.lambda) << '\n';
  out << "kappa = " << num(t.kappa) << '\n';

  const PriorSpec& p = c.prior;
  out << "\n[prior]\n";
  out << "pi_a = " << num(p.pi_a) << '\n';
  out << "pi_b = " << num(p.pi_b) << '\n';
  const auto gamma_out = [&](const char* base, const GammaHyper& h) {
    out << base << "_shape = " << num(h.shape) << '\n';
    out << base << "_scale = " << num(h.scale) << '\n';
  };
  const auto normal_out = [&](const char* base, const NormalHyper& h) {
    out << base << "_mean = " << num(h.mean) << '\n';
    out << base << "_var = " << num(h.var) << '\n';
  };
  gamma_out("alpha_s", p.sw_shape);
  normal_out("beta_s", p.sw_loc);
  gamma_out("alpha_y_ns", p.y0_ns_shape);
  normal_out("beta_y_ns", p.y0_ns_loc);
  gamma_out("alpha_y_sw", p.y0_sw_shape);
  normal_out("beta_y_sw", p.y0_sw_loc);
  gamma_out("nu_y_ns", p.y1_ns_shape);
  normal_out("gamma_y_ns", p.y1_ns_loc);
  gamma_out("nu_y_sw", p.y1_sw_shape);
  normal_out("gamma_y_sw", p.y1_sw_loc);
  out << "lambda_prior = "
      << (p.lambda_kind == LambdaPriorKind::Normal ? "normal" : "uniform") << '\n';
  normal_out("lambda", p.lambda_prior);

  out << "\n[mcmc]\n";
  out << "iterations = " << c.mcmc.n_iter << '\n';
  out << "burn_in = " << c.mcmc.burn_in << '\n';
  out << "thin = " << c.mcmc.thin << '\n';
  out << "chains = " << c.mcmc.n_chains << '\n';

  out << "\n[analysis]\n";
  out << "kappa_grid = ";
  for (std::size_t i = 0; i < c.kappa_grid.size(); ++i)
    out << (i ? "," : "") << num(c.kappa_grid[i]);
  out << '\n';
  out << "lambda_variants = ";
  for (std::size_t i = 0; i < c.lambda_variants.size(); ++i) {
    out << (i ? "," : "");
    if (c.lambda_variants[i].kind == LambdaPriorKind::ImproperUniform)
      out << "uniform";
    else
      out << num(c.lambda_variants[i].var);
  }
  out << '\n';
  out << "mc_size = " << c.estimand_mc << '\n';
  out << "y_grid = ";
  for (std::size_t i = 0; i < c.y_grid.size(); ++i) out << (i ? "," : "") << num(c.y_grid[i]);
  out << '\n';
  out << "s_values = ";
  for (std::size_t i = 0; i < c.s_values.size(); ++i)
    out << (i ? "," : "") << num(c.s_values[i]);
  out << '\n';

  out << "\n[ppc]\n";
  out << "refresh_sweeps = " << c.ppc.refresh_sweeps << '\n';
  out << "t_max = " << num(c.ppc.t_max) << '\n';
  out << "t_step = " << num(c.ppc.t_step) << '\n';
}

inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  serialize_config(c, out);
  return out.str();
}

}  // namespace pstrat
