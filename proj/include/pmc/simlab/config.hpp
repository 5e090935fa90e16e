#pragma once

#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "pmc/error.hpp"
#include "pmc/panel_csv.hpp"
#include "pmc/simlab/dgp.hpp"
#include "pmc/simlab/mc.hpp"

namespace pmc {

// Key-value settings: one `key = value` per line, `#` starts a comment.
using Settings = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

inline double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ValidationError(key + ": expected a number, got '" + v + "'");
  return out;
}

template <class Int>
Int parse_integer(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty())
    throw ValidationError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline bool parse_flag(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError(key + ": expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_reals(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = v.find(',', start);
    out.push_back(parse_real(key + "[" + std::to_string(out.size()) + "]", trim(v.substr(start, comma - start))));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = v.find(',', start);
    out.push_back(trim(v.substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline Settings parse_settings(std::istream& in) {
  Settings out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", n);
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("missing key", n);
    if (!out.emplace(key, value).second) throw ParseError("duplicate key '" + key + "'", n);
  }
  return out;
}

inline Settings load_settings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  try {
    return parse_settings(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

// Applies one `dgp.` key. Returns false for keys outside the dgp section.
inline bool apply_dgp_setting(DgpConfig& cfg, const std::string& key, const std::string& value) {
  if (key.rfind("dgp.", 0) != 0) return false;
  const std::string field = key.substr(4);
  if (field == "design") cfg.design = parse_design(value);
  else if (field == "n") cfg.n = detail::parse_integer<int>(key, value);
  else if (field == "d") cfg.d = detail::parse_integer<int>(key, value);
  else if (field == "j") cfg.j = detail::parse_integer<int>(key, value);
  else if (field == "t") cfg.t = detail::parse_integer<int>(key, value);
  else if (field == "beta") cfg.beta_true = detail::parse_reals(key, value);
  else if (field == "alpha") cfg.alpha_mix = detail::parse_real(key, value);
  else if (field == "seed") cfg.seed = detail::parse_integer<std::uint64_t>(key, value);
  else if (field == "outcome") {
    if (value == "binary") cfg.outcome = OutcomeKind::binary;
    else if (value == "shares") cfg.outcome = OutcomeKind::shares;
    else throw ValidationError(key + ": expected binary or shares, got '" + value + "'");
  } else if (field == "outside_option") {
    cfg.outside_option = detail::parse_flag(key, value);
  } else {
    throw ValidationError("unknown setting '" + key +
                          "' (dgp keys: design, n, d, j, t, beta, alpha, seed, outcome, outside_option)");
  }
  return true;
}

// DgpConfig from settings; every key must belong to the dgp section.
inline DgpConfig dgp_from_settings(const Settings& s, DgpConfig cfg = {}) {
  for (const auto& [k, v] : s)
    if (!apply_dgp_setting(cfg, k, v)) throw ValidationError("unknown setting '" + k + "' (expected dgp.<field>)");
  cfg.validate();
  return cfg;
}

// c_hat: a number, "rule" (kappa = 0.01) or "rule:<kappa>" for kappa * N^-1/4 * log N.
inline CHat parse_c_hat(const std::string& key, const std::string& v) {
  if (v == "rule") return CHatRule{};
  if (v.rfind("rule:", 0) == 0) return CHatRule{detail::parse_real(key, v.substr(5))};
  const double c = detail::parse_real(key, v);
  if (!(c >= 0.0)) throw ValidationError(key + ": c_hat must be nonnegative");
  return c;
}

inline std::vector<CHat> parse_c_hats(const std::string& key, const std::string& v) {
  std::vector<CHat> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = v.find(',', start);
    out.push_back(parse_c_hat(key + "[" + std::to_string(out.size()) + "]", detail::trim(v.substr(start, comma - start))));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::string format_c_hat(const CHat& c) {
  if (const auto* v = std::get_if<double>(&c)) return detail::format_double(*v);
  return "rule:" + detail::format_double(std::get<CHatRule>(c).kappa);
}

// Applies one `estimator.` or `grid.` key. Returns false for other sections.
inline bool apply_estimator_setting(EstimatorSettings& e, std::vector<CHat>& c_hats, const std::string& key,
                                    const std::string& value) {
  using detail::parse_flag;
  using detail::parse_integer;
  using detail::parse_real;
  auto& r = e.regressor;
  if (key.rfind("estimator.", 0) == 0) {
    const std::string f = key.substr(10);
    if (f == "regressor") r.kind = parse_regressor(value);
    else if (f == "hidden_units") r.hidden_units = parse_integer<int>(key, value);
    else if (f == "ridge") r.ridge = parse_real(key, value);
    else if (f == "bandwidth") r.bandwidth = parse_real(key, value);
    else if (f == "cv_folds") r.cv_folds = parse_integer<int>(key, value);
    else if (f == "max_epochs") r.max_epochs = parse_integer<int>(key, value);
    else if (f == "learning_rate") r.learning_rate = parse_real(key, value);
    else if (f == "patience") r.patience = parse_integer<int>(key, value);
    else if (f == "validation_fraction") r.validation_fraction = parse_real(key, value);
    else if (f == "pooled_pairs") r.pooled_pairs = parse_flag(key, value);
    else if (f == "cross_validate") e.cross_validate = parse_flag(key, value);
    else if (f == "pairs") e.pairs.kind = parse_pair_policy(value);
    else if (f == "random_pairs") e.pairs.random_count = parse_integer<int>(key, value);
    else if (f == "pair_seed") e.pairs.seed = parse_integer<std::uint64_t>(key, value);
    else if (f == "smoother") e.smoother.kind = parse_smoother(value);
    else if (f == "c_hat") c_hats = parse_c_hats(key, value);
    else if (f == "c_hat_scale") e.c_hat_scale = parse_c_hat_scale(value);
    else
      throw ValidationError("unknown setting '" + key +
                            "' (estimator keys: regressor, hidden_units, ridge, bandwidth, cv_folds, max_epochs, "
                            "learning_rate, patience, validation_fraction, pooled_pairs, cross_validate, pairs, "
                            "random_pairs, pair_seed, smoother, c_hat, c_hat_scale)");
    return true;
  }
  if (key.rfind("grid.", 0) == 0) {
    const std::string f = key.substr(5);
    auto& g = e.grid;
    if (f == "base") g.base_grid = parse_integer<int>(key, value);
    else if (f == "alpha") g.quantile_alpha = parse_real(key, value);
    else if (f == "buffer") g.buffer_fraction = parse_real(key, value);
    else if (f == "precision") g.precision = parse_real(key, value);
    else if (f == "max_rounds") g.max_rounds = parse_integer<int>(key, value);
    else if (f == "max_points") g.max_grid_points = parse_integer<std::size_t>(key, value);
    else
      throw ValidationError("unknown setting '" + key +
                            "' (grid keys: base, alpha, buffer, precision, max_rounds, max_points)");
    return true;
  }
  return false;
}

inline void apply_mc_setting(McSettings& m, const std::string& key, const std::string& value) {
  using detail::parse_flag;
  if (apply_dgp_setting(m.dgp, key, value)) return;
  if (apply_estimator_setting(m.estimator, m.c_hat_grid, key, value)) return;
  if (key.rfind("mc.", 0) != 0)
    throw ValidationError("unknown setting '" + key + "' (sections: dgp, estimator, grid, mc)");
  const std::string f = key.substr(3);
  if (f == "replications") m.replications = detail::parse_integer<int>(key, value);
  else if (f == "seed") m.seed = detail::parse_integer<std::uint64_t>(key, value);
  else if (f == "oracle") m.oracle = parse_flag(key, value);
  else if (f == "run_estimator") m.run_estimator = parse_flag(key, value);
  else if (f == "first_stage_mse") m.first_stage_mse = parse_flag(key, value);
  else if (f == "compare_ols") m.compare_ols = parse_flag(key, value);
  else
    throw ValidationError("unknown setting '" + key +
                          "' (mc keys: replications, seed, oracle, run_estimator, first_stage_mse, compare_ols)");
}

inline McSettings mc_from_settings(const Settings& s, McSettings m = {}) {
  for (const auto& [k, v] : s) apply_mc_setting(m, k, v);
  m.validate();
  return m;
}

// Every field as a key the parsers above accept, defaults included.
inline Settings to_settings(const DgpConfig& c) {
  using detail::format_double;
  Settings s;
  s["dgp.design"] = to_string(c.design);
  s["dgp.n"] = std::to_string(c.n);
  s["dgp.d"] = std::to_string(c.d);
  s["dgp.j"] = std::to_string(c.j);
  s["dgp.t"] = std::to_string(c.t);
  std::string beta;
  for (double b : c.beta()) beta += (beta.empty() ? "" : ",") + format_double(b);
  s["dgp.beta"] = beta;
  s["dgp.alpha"] = format_double(c.alpha_mix);
  s["dgp.seed"] = std::to_string(c.seed);
  s["dgp.outcome"] = c.resolved_outcome() == OutcomeKind::shares ? "shares" : "binary";
  s["dgp.outside_option"] = c.resolved_outside() ? "true" : "false";
  return s;
}

inline Settings to_settings(const EstimatorSettings& e, const std::vector<CHat>& c_hats) {
  using detail::format_double;
  const auto& r = e.regressor;
  const auto& g = e.grid;
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  Settings s;
  s["estimator.regressor"] = to_string(r.kind);
  s["estimator.hidden_units"] = std::to_string(r.hidden_units);
  s["estimator.ridge"] = format_double(r.ridge);
  s["estimator.bandwidth"] = format_double(r.bandwidth);
  s["estimator.cv_folds"] = std::to_string(r.cv_folds);
  s["estimator.max_epochs"] = std::to_string(r.max_epochs);
  s["estimator.learning_rate"] = format_double(r.learning_rate);
  s["estimator.patience"] = std::to_string(r.patience);
  s["estimator.validation_fraction"] = format_double(r.validation_fraction);
  s["estimator.pooled_pairs"] = flag(r.pooled_pairs);
  s["estimator.cross_validate"] = flag(e.cross_validate);
  s["estimator.pairs"] = to_string(e.pairs.kind);
  s["estimator.random_pairs"] = std::to_string(e.pairs.random_count);
  s["estimator.pair_seed"] = std::to_string(e.pairs.seed);
  s["estimator.smoother"] = to_string(e.smoother.kind);
  std::string c;
  for (const auto& v : c_hats) c += (c.empty() ? "" : ",") + format_c_hat(v);
  s["estimator.c_hat"] = c;
  s["estimator.c_hat_scale"] = to_string(e.c_hat_scale);
  s["grid.base"] = std::to_string(g.base_grid);
  s["grid.alpha"] = format_double(g.quantile_alpha);
  s["grid.buffer"] = format_double(g.buffer_fraction);
  s["grid.precision"] = format_double(g.precision);
  s["grid.max_rounds"] = std::to_string(g.max_rounds);
  s["grid.max_points"] = std::to_string(g.max_grid_points);
  return s;
}

inline Settings to_settings(const McSettings& m) {
  Settings s = to_settings(m.dgp);
  s.merge(to_settings(m.estimator, m.c_hats()));
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  s["mc.replications"] = std::to_string(m.replications);
  s["mc.seed"] = std::to_string(m.seed);
  s["mc.oracle"] = flag(m.oracle);
  s["mc.run_estimator"] = flag(m.run_estimator);
  s["mc.first_stage_mse"] = flag(m.first_stage_mse);
  s["mc.compare_ols"] = flag(m.compare_ols);
  return s;
}

inline void write_settings(std::ostream& os, const Settings& s) {
  for (const auto& [k, v] : s) os << k << " = " << v << '\n';
}

}  // namespace pmc
