#pragma once

#include <openssl/evp.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmc/first_stage/serialize.hpp"
#include "pmc/panel_csv.hpp"
#include "pmc/pipeline.hpp"
#include "pmc/report.hpp"
#include "pmc/simlab/config.hpp"
#include "pmc/suites.hpp"
#include "pmc/version.hpp"

namespace pmc::cli {

namespace fs = std::filesystem;

enum ExitCode : int { success = 0, crash = 1, validation = 2, flagged = 3, io = 4 };

// Maps library exceptions to exit codes and prints the message.
inline int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return validation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return validation;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return io;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return crash;
  }
}

inline std::string sha256_hex(std::istream& in) {
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: digest initialization failed");
  }
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) EVP_DigestUpdate(ctx, buf, std::size_t(in.gcount()));
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned k = 0; k < len; ++k) {
    out += hex[md[k] >> 4];
    out += hex[md[k] & 15];
  }
  return out;
}

inline std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return sha256_hex(in);
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Everything needed to repeat a run: the command line, the fully resolved
// settings (defaults included), the master seed and digests of all inputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  nlohmann::json configuration = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string library_version = pmc::version;
  std::string started, finished;
  std::vector<std::pair<std::string, std::string>> inputs;   // path, sha256
  std::vector<std::pair<std::string, std::string>> outputs;  // file name, sha256

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["arguments"] = arguments;
    j["configuration"] = configuration;
    j["seed"] = seed;
    j["library_version"] = library_version;
    j["started"] = started;
    j["finished"] = finished;
    auto files = [](const auto& list) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& [p, d] : list) a.push_back({{"path", p}, {"sha256", d}});
      return a;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    return j;
  }
};

inline nlohmann::json to_json(const Settings& s) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : s) j[k] = v;
  return j;
}

// Output directory writer; records every file it writes for the manifest.
class OutputDir {
 public:
  explicit OutputDir(std::string path) : path_(std::move(path)) {
    std::error_code ec;
    fs::create_directories(path_, ec);
    if (ec || !fs::is_directory(path_)) throw IoError("cannot create output directory " + path_);
  }

  std::string path(const std::string& name) const { return (fs::path(path_) / name).string(); }

  void write(const std::string& name, const std::function<void(std::ostream&)>& fill) {
    const std::string p = path(name);
    {
      std::ofstream out(p, std::ios::binary);
      if (!out) throw IoError("cannot write " + p);
      fill(out);
      out.flush();
      if (!out) throw IoError("write failed: " + p);
    }
    written_.emplace_back(name, sha256_file(p));
  }

  void finish(RunManifest& m) {
    m.finished = utc_timestamp(std::chrono::system_clock::now());
    m.outputs = written_;
    const std::string p = path("manifest.json");
    std::ofstream out(p);
    if (!out) throw IoError("cannot write " + p);
    out << m.to_json().dump(2) << '\n';
    if (!out) throw IoError("write failed: " + p);
  }

 private:
  std::string path_;
  std::vector<std::pair<std::string, std::string>> written_;
};

// `key=value` overrides from the command line.
inline Settings parse_overrides(const std::vector<std::string>& items) {
  Settings out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("override '" + item + "': expected key=value");
    out[pmc::detail::trim(item.substr(0, eq))] = pmc::detail::trim(item.substr(eq + 1));
  }
  return out;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string config;  // key-value file with dgp.* keys; empty for defaults
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> arguments;
};

inline nlohmann::json truth_json(const DgpConfig& cfg, const SimulationTruth& t) {
  nlohmann::json j;
  j["design"] = to_string(cfg.design);
  j["outcome"] = cfg.resolved_outcome() == OutcomeKind::shares ? "shares" : "binary";
  j["outside_option"] = cfg.resolved_outside();
  j["beta"] = t.beta;
  j["beta_unit"] = t.beta_unit;
  j["ties"] = t.ties;
  j["a0"] = t.a0;
  j["a"] = t.a;
  j["z"] = t.z;
  return j;
}

inline int cmd_simulate(const SimulateOptions& o, std::ostream& log) {
  RunManifest m;
  m.command = "simulate";
  m.arguments = o.arguments;
  m.started = utc_timestamp(std::chrono::system_clock::now());
  Settings s;
  if (!o.config.empty()) {
    s = load_settings(o.config);
    m.inputs.emplace_back(o.config, sha256_file(o.config));
  }
  for (const auto& [k, v] : parse_overrides(o.overrides)) s[k] = v;
  DgpConfig cfg = dgp_from_settings(s);
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  m.seed = cfg.seed;
  m.configuration = to_json(to_settings(cfg));

  const auto sim = simulate(cfg);
  OutputDir out(o.out_dir);
  out.write("panel.csv", [&](std::ostream& os) { write_csv(os, sim.data); });
  out.write("truth.json", [&](std::ostream& os) { os << truth_json(cfg, sim.truth).dump(2) << '\n'; });
  out.write("resolved.conf", [&](std::ostream& os) { write_settings(os, to_settings(cfg)); });
  out.finish(m);
  log << "simulated " << to_string(cfg.design) << " panel: N=" << cfg.n << " J=" << cfg.j << " T=" << cfg.t
      << " D=" << cfg.d << " (" << sim.data.n_agents() * cfg.j * cfg.t << " rows) -> " << out.path("panel.csv")
      << '\n';
  if (sim.truth.ties > 0) log << "warning: " << sim.truth.ties << " tied utility maxima\n";
  return success;
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateOptions {
  std::string data;
  std::string config;  // optional estimator./grid. keys
  std::vector<std::string> overrides;
  std::vector<std::string> covariates;  // column names; empty: x1, x2, ...
  bool shares = false;
  bool outside_option = false;
  std::string smoother, c_hat, c_hat_scale, pairs, regressor;
  std::optional<int> hidden_units;
  bool cross_validate = false;
  std::string gamma_in;  // load a saved first stage instead of fitting
  std::uint64_t seed = 1;
  unsigned jobs = 1;
  std::string out_dir;
  std::vector<std::string> arguments;
};

struct EstimateOutcome {
  std::vector<EstimationResult> results;
  std::vector<std::string> labels;
  std::vector<std::string> names;
};

inline EstimateOutcome run_estimate(const EstimateOptions& o, RunManifest& m, OutputDir& out, std::ostream& log) {
  CsvSchema schema;
  schema.covariates = o.covariates;
  schema.kind = o.shares ? OutcomeKind::shares : OutcomeKind::binary;
  schema.outside_option = o.outside_option;
  const PanelDataset data = load_csv(o.data, schema);
  m.inputs.emplace_back(o.data, sha256_file(o.data));

  EstimatorSettings est;
  std::vector<CHat> c_hats{0.0};
  Settings s;
  if (!o.config.empty()) {
    s = load_settings(o.config);
    m.inputs.emplace_back(o.config, sha256_file(o.config));
  }
  for (const auto& [k, v] : parse_overrides(o.overrides)) s[k] = v;
  if (!o.smoother.empty()) s["estimator.smoother"] = o.smoother;
  if (!o.c_hat.empty()) s["estimator.c_hat"] = o.c_hat;
  if (!o.c_hat_scale.empty()) s["estimator.c_hat_scale"] = o.c_hat_scale;
  if (!o.pairs.empty()) s["estimator.pairs"] = o.pairs;
  if (!o.regressor.empty()) s["estimator.regressor"] = o.regressor;
  if (o.hidden_units) s["estimator.hidden_units"] = std::to_string(*o.hidden_units);
  if (o.cross_validate) s["estimator.cross_validate"] = "true";
  for (const auto& [k, v] : s)
    if (!apply_estimator_setting(est, c_hats, k, v))
      throw ValidationError("unknown setting '" + k + "' (estimate accepts estimator.* and grid.* keys)");
  est.regressor.seed = derive_seed(o.seed, 1);
  est.regressor.jobs = o.jobs;
  est.jobs = o.jobs;
  est.regressor.validate();
  est.grid.validate();

  m.seed = o.seed;
  Settings resolved = to_settings(est, c_hats);
  resolved["data.shares"] = o.shares ? "true" : "false";
  resolved["data.outside_option"] = o.outside_option ? "true" : "false";
  m.configuration = to_json(resolved);

  log << "panel: N=" << data.n_agents() << " J=" << data.n_products() << " T=" << data.n_periods()
      << " D=" << data.n_covariates() << '\n';
  std::optional<GammaEstimates> gamma;
  if (!o.gamma_in.empty()) {
    gamma.emplace(load_gamma(o.gamma_in));
    m.inputs.emplace_back(o.gamma_in, sha256_file(o.gamma_in));
    if (gamma->n_products() != data.n_products() || gamma->n_covariates() != data.n_covariates())
      throw ValidationError("first-stage model " + o.gamma_in + " does not match the panel dimensions");
  } else {
    RegressorSpec spec = est.regressor;
    if (est.cross_validate) {
      const auto cv = cross_validate(data, default_cv_grid(spec), est.pairs);
      spec = cv.best;
      log << "cross-validation picked " << to_string(spec.kind) << " hidden_units=" << spec.hidden_units
          << " ridge=" << spec.ridge << " bandwidth=" << spec.bandwidth << '\n';
    }
    gamma.emplace(fit_gamma(data, spec, est.pairs));
    out.write("gamma.json", [&](std::ostream& os) { os << to_json(*gamma).dump() << '\n'; });
    int degenerate = 0;
    for (const auto& r : gamma->reports()) degenerate += r.degenerate ? 1 : 0;
    if (degenerate > 0) log << "warning: " << degenerate << " first-stage fits fell back to the constant mean\n";
  }

  EstimateOutcome res;
  res.results = second_stage_grid(data, gamma->function(), est, c_hats);
  for (const auto& c : c_hats) res.labels.push_back(describe(c));
  res.names = o.covariates.empty() ? default_covariate_names(data.n_covariates()) : o.covariates;

  Table text = estimate_table(res.results, res.labels, res.names);
  text.notes.push_back("first-stage rate c_N (reported only): " +
                       full_precision(first_stage_rate(data.n_agents(), 2 * data.n_products() * data.n_covariates())));
  out.write("estimate.txt", [&](std::ostream& os) { write_text(os, text); });
  out.write("estimate.csv", [&](std::ostream& os) { write_csv(os, estimate_csv(res.results, res.labels, res.names)); });
  out.write("enclosure.csv", [&](std::ostream& os) { write_csv(os, enclosure_csv(res.results, res.labels)); });
  for (std::size_t k = 0; k < res.results.size(); ++k)
    out.write("trace_" + std::to_string(k + 1) + ".csv",
              [&](std::ostream& os) { write_csv(os, trace_csv(res.results[k])); });
  out.write("resolved.conf", [&](std::ostream& os) { write_settings(os, resolved); });
  write_text(log, text);
  return res;
}

inline int cmd_estimate(const EstimateOptions& o, std::ostream& log) {
  RunManifest m;
  m.command = "estimate";
  m.arguments = o.arguments;
  m.started = utc_timestamp(std::chrono::system_clock::now());
  OutputDir out(o.out_dir);
  const auto res = run_estimate(o, m, out, log);
  out.finish(m);
  for (const auto& r : res.results)
    if (!r.converged) {
      log << "flagged: the grid search hit its round limit before reaching the target precision\n";
      return flagged;
    }
  return success;
}

// ---------------------------------------------------------------------------
// mc

struct McOptions {
  std::string suite;   // one of suite_names()
  std::string config;  // custom design instead of a suite
  std::optional<int> replications;
  bool full_scale = false;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::string c_hat, smoother, pairs, regressor;
  std::vector<std::string> overrides;
  std::string out_dir;
  std::vector<std::string> arguments;
};

inline int cmd_mc(const McOptions& o, std::ostream& log) {
  if (o.suite.empty() == o.config.empty()) throw ValidationError("mc needs exactly one of a suite name or --config");
  RunManifest m;
  m.command = "mc";
  m.arguments = o.arguments;
  m.started = utc_timestamp(std::chrono::system_clock::now());

  Suite suite;
  Settings overrides = parse_overrides(o.overrides);
  if (!o.suite.empty()) {
    suite = make_suite(o.suite, o.full_scale);
  } else {
    const Settings s = load_settings(o.config);
    m.inputs.emplace_back(o.config, sha256_file(o.config));
    suite.name = "custom";
    suite.cases.push_back({"custom", mc_from_settings(s)});
  }
  if (o.replications) overrides["mc.replications"] = std::to_string(*o.replications);
  if (o.seed) overrides["mc.seed"] = std::to_string(*o.seed);
  if (!o.c_hat.empty()) overrides["estimator.c_hat"] = o.c_hat;
  if (!o.smoother.empty()) overrides["estimator.smoother"] = o.smoother;
  if (!o.pairs.empty()) overrides["estimator.pairs"] = o.pairs;
  if (!o.regressor.empty()) overrides["estimator.regressor"] = o.regressor;
  for (auto& c : suite.cases) {
    for (const auto& [k, v] : overrides) apply_mc_setting(c.settings, k, v);
    c.settings.jobs = o.jobs;
    c.settings.validate();
  }
  m.seed = suite.cases.front().settings.seed;
  for (const auto& c : suite.cases) m.configuration[c.label] = to_json(to_settings(c.settings));

  OutputDir out(o.out_dir);
  std::vector<McRun> runs;
  std::vector<std::string> failures;
  for (std::size_t k = 0; k < suite.cases.size(); ++k) {
    const auto& c = suite.cases[k];
    log << "[" << suite.name << "] case " << k + 1 << "/" << suite.cases.size() << " " << c.label << ": "
        << c.settings.replications << " replications, N=" << c.settings.dgp.n << '\n';
    const auto start = std::chrono::steady_clock::now();
    runs.push_back(run_mc(c.settings));
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log << "  done in " << fixed(sec, 1) << " s\n";
    for (auto& f : failure_summary(c.label, runs.back())) failures.push_back(std::move(f));
    out.write("case_" + std::to_string(k + 1) + ".conf",
              [&](std::ostream& os) { write_settings(os, to_settings(c.settings)); });
  }

  const auto tables = suite_tables(suite, runs);
  out.write(suite.name + ".txt", [&](std::ostream& os) {
    for (const auto& t : tables) {
      write_text(os, t);
      os << '\n';
    }
    os << "replications per case: " << suite.cases.front().settings.replications
       << ", master seed: " << m.seed << '\n';
  });
  for (std::size_t k = 0; k < tables.size(); ++k)
    out.write(suite.name + "_" + std::to_string(k + 1) + ".csv", [&](std::ostream& os) { write_csv(os, tables[k]); });
  Table summary, reps;
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const auto& label = suite.cases[k].label;
    for (const auto& r : runs[k].estimator) add_summary_rows(summary, label, r);
    if (runs[k].ols) add_summary_rows(summary, label, *runs[k].ols);
    if (runs[k].ols_fe) add_summary_rows(summary, label, *runs[k].ols_fe);
    add_replication_rows(reps, label, runs[k]);
  }
  if (!summary.header.empty())
    out.write("summary.csv", [&](std::ostream& os) { write_csv(os, summary); });
  out.write("replications.csv", [&](std::ostream& os) { write_csv(os, reps); });
  if (!failures.empty())
    out.write("failures.txt", [&](std::ostream& os) {
      for (const auto& f : failures) os << f << '\n';
    });
  out.finish(m);

  for (const auto& t : tables) {
    write_text(log, t);
    log << '\n';
  }
  if (!failures.empty()) {
    log << failures.size() << " replication(s) failed; see " << out.path("failures.txt") << '\n';
    return flagged;
  }
  return success;
}

}  // namespace pmc::cli
