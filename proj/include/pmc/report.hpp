#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "pmc/optimizer.hpp"
#include "pmc/simlab/mc.hpp"

namespace pmc {

// A rectangular table rendered either as aligned text or as CSV.
struct Table {
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> notes;  // printed under the text form only

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
};

inline std::string fixed(double v, int digits = 4) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  // "-0.0000" reads as a sign claim it cannot back up.
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

inline std::string percent(double rate) { return fixed(100.0 * rate, 0) + "%"; }

inline std::string full_precision(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_text(std::ostream& os, const Table& t) {
  std::vector<std::size_t> width(t.header.size(), 0);
  auto widen = [&](const std::vector<std::string>& row) {
    if (row.size() > width.size()) width.resize(row.size(), 0);
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  };
  widen(t.header);
  for (const auto& r : t.rows) widen(r);
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  const std::string rule(total > 2 ? total - 2 : 0, '-');
  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string cell = c < row.size() ? row[c] : "";
      // First column left aligned, numbers right aligned.
      if (c == 0) out += cell + std::string(width[c] - cell.size(), ' ');
      else out += std::string(width[c] - cell.size(), ' ') + cell;
      if (c + 1 < width.size()) out += "  ";
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    os << out << '\n';
  };
  if (!t.title.empty()) os << t.title << '\n';
  os << rule << '\n';
  line(t.header);
  os << rule << '\n';
  for (const auto& r : t.rows) line(r);
  os << rule << '\n';
  for (const auto& n : t.notes) os << n << '\n';
}

inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline void write_csv(std::ostream& os, const Table& t) {
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_cell(row[c]);
    os << '\n';
  };
  line(t.header);
  for (const auto& r : t.rows) line(r);
}

// ---------------------------------------------------------------------------
// Single estimation

inline std::vector<std::string> default_covariate_names(int d) {
  std::vector<std::string> out;
  for (int k = 1; k <= d; ++k) out.push_back("x" + std::to_string(k));
  return out;
}

// One row per coefficient: midpoint, then [lower, upper], for each c_hat.
inline Table estimate_table(const std::vector<EstimationResult>& results, const std::vector<std::string>& c_hat_labels,
                            std::vector<std::string> names = {}) {
  Table t;
  t.title = "Set estimates";
  if (results.empty()) return t;
  const std::size_t D = results.front().beta_mid.size();
  if (names.size() != D) names = default_covariate_names(int(D));
  t.header = {""};
  for (std::size_t k = 0; k < results.size(); ++k) {
    t.header.push_back("mid (c_hat=" + c_hat_labels[k] + ")");
    t.header.push_back("[lower, upper] (c_hat=" + c_hat_labels[k] + ")");
  }
  for (std::size_t d = 0; d < D; ++d) {
    std::vector<std::string> row{names[d]};
    for (const auto& r : results) {
      row.push_back(fixed(r.beta_mid[d]));
      row.push_back("[" + fixed(r.beta_lower[d]) + ", " + fixed(r.beta_upper[d]) + "]");
    }
    t.add(std::move(row));
  }
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    t.notes.push_back("c_hat=" + c_hat_labels[k] + ": q_min " + full_precision(r.q_min) + ", threshold " +
                      full_precision(r.c_hat) + ", " + std::to_string(r.rounds) + " rounds, " +
                      std::to_string(r.evaluations) + " evaluations, stop " + to_string(r.stop) +
                      (r.converged ? "" : " (not converged)"));
  }
  return t;
}

// Machine-readable form of one estimate: bounds, argmin and set enclosures.
inline Table estimate_csv(const std::vector<EstimationResult>& results, const std::vector<std::string>& c_hat_labels,
                          std::vector<std::string> names = {}) {
  Table t;
  t.header = {"c_hat", "threshold", "coefficient", "beta_lower", "beta_mid", "beta_upper", "q_min",
              "converged", "stop",  "rounds",      "evaluations"};
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    const std::size_t D = r.beta_mid.size();
    if (names.size() != D) names = default_covariate_names(int(D));
    for (std::size_t d = 0; d < D; ++d)
      t.add({c_hat_labels[k], full_precision(r.c_hat), names[d], full_precision(r.beta_lower[d]),
             full_precision(r.beta_mid[d]), full_precision(r.beta_upper[d]), full_precision(r.q_min),
             r.converged ? "true" : "false", to_string(r.stop), std::to_string(r.rounds),
             std::to_string(r.evaluations)});
  }
  return t;
}

inline Table enclosure_csv(const std::vector<EstimationResult>& results,
                           const std::vector<std::string>& c_hat_labels) {
  Table t;
  t.header = {"c_hat", "kind", "angle", "lower", "upper"};
  for (std::size_t k = 0; k < results.size(); ++k) {
    const auto& r = results[k];
    for (const auto& [kind, box] : {std::pair{"argmin", &r.argmin_enclosure}, std::pair{"set", &r.set_enclosure}})
      for (std::size_t a = 0; a < box->lower().size(); ++a)
        t.add({c_hat_labels[k], kind, std::to_string(a + 1), full_precision(box->lower()[a]),
               full_precision(box->upper()[a])});
  }
  return t;
}

// Per-round optimizer trace for external plotting.
inline Table trace_csv(const EstimationResult& r) {
  Table t;
  t.header = {"round", "grid", "evaluations", "q_min", "threshold", "selected", "diameter"};
  const std::size_t A = r.trace.empty() ? 0 : r.trace.front().box.lower().size();
  for (std::size_t a = 0; a < A; ++a) {
    t.header.push_back("lower" + std::to_string(a + 1));
    t.header.push_back("upper" + std::to_string(a + 1));
  }
  for (const auto& tr : r.trace) {
    std::vector<std::string> row{std::to_string(tr.round),  std::to_string(tr.grid),
                                 std::to_string(tr.evaluations), full_precision(tr.q_min),
                                 full_precision(tr.threshold), std::to_string(tr.selected),
                                 full_precision(tr.diameter)};
    for (std::size_t a = 0; a < A; ++a) {
      row.push_back(full_precision(tr.box.lower()[a]));
      row.push_back(full_precision(tr.box.upper()[a]));
    }
    t.add(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Monte Carlo tables

inline Table first_stage_table(const FirstStageSummary& fs) {
  Table t;
  t.title = "First-stage MSE of G(gamma_hat) against G(gamma)";
  t.header = {"", "indicator", "positive part", "adjusted normal CDF"};
  t.add({"mean MSE", fixed(fs.mean_mse[0]), fixed(fs.mean_mse[1]), fixed(fs.mean_mse[2])});
  t.add({"max MSE", fixed(fs.max_mse[0]), fixed(fs.max_mse[1]), fixed(fs.max_mse[2])});
  t.notes.push_back("replications: " + std::to_string(fs.replications));
  return t;
}

inline Table accuracy_table(const McReport& r) {
  Table t;
  t.title = "Estimator accuracy";
  t.header = {""};
  const std::size_t D = r.bias_mid.size();
  for (std::size_t d = 0; d < D; ++d) t.header.push_back("beta" + std::to_string(d + 1));
  auto row = [&](const std::string& name, const std::vector<double>& v) {
    std::vector<std::string> cells{name};
    for (double x : v) cells.push_back(fixed(x));
    t.add(std::move(cells));
  };
  row("bias", r.bias_mid);
  row("upper bias", r.bias_upper);
  row("lower bias", r.bias_lower);
  row("mean(u-l)", r.mean_width);
  std::vector<std::string> rmse{"root MSE", fixed(r.rmse_mid)}, mnd{"mean norm deviation", fixed(r.mnd_mid)};
  rmse.resize(D + 1);
  mnd.resize(D + 1);
  t.add(std::move(rmse));
  t.add(std::move(mnd));
  return t;
}

struct SizedReport {
  int n = 0;
  McReport report;
};

inline Table varying_n_table(const std::vector<SizedReport>& runs) {
  Table t;
  t.title = "Accuracy by sample size";
  t.header = {"N", "sum |bias|", "sum mean(u-l)", "rMSE", "MND"};
  for (const auto& [n, r] : runs) {
    double width = 0.0;
    for (double w : r.mean_width) width += w;
    t.add({std::to_string(n), fixed(r.mad), fixed(width), fixed(r.rmse_mid), fixed(r.mnd_mid)});
  }
  if (runs.size() < 2) return t;
  // Ratios against the smallest N.
  const SizedReport* base = &runs.front();
  for (const auto& s : runs)
    if (s.n < base->n) base = &s;
  t.notes.push_back("relative to N0 = " + std::to_string(base->n) + ":");
  for (const auto& s : runs) {
    if (&s == base) continue;
    const double q = double(s.n) / base->n;
    t.notes.push_back("  N = " + std::to_string(s.n) + ": (N/N0)^1/2 " + fixed(std::sqrt(q), 2) + ", (N/N0)^1/3 " +
                      fixed(std::cbrt(q), 2) + ", rMSE ratio " + fixed(base->report.rmse_mid / s.report.rmse_mid, 2) +
                      ", MND ratio " + fixed(base->report.mnd_mid / s.report.mnd_mid, 2));
  }
  return t;
}

struct LabeledReport {
  std::string label;
  McReport report;
};

inline Table identification_table(const std::vector<LabeledReport>& runs) {
  Table t;
  t.title = "Accuracy with and without point identification";
  t.header = {"point ID?", "c_hat", "rMSE mid", "rMSE upper", "rMSE lower", "MND mid", "MND upper", "MND lower"};
  for (const auto& [label, r] : runs)
    t.add({label, r.c_hat.empty() ? "-" : r.c_hat, fixed(r.rmse_mid), fixed(r.rmse_upper), fixed(r.rmse_lower),
           fixed(r.mnd_mid), fixed(r.mnd_upper), fixed(r.mnd_lower)});
  return t;
}

struct SignRow {
  double alpha = 0.0;
  McReport two_stage, ols, ols_fe;
};

inline Table sign_table(const std::vector<SignRow>& rows) {
  Table t;
  t.title = "Share of replications with every coefficient sign correct";
  t.header = {"alpha", "two-stage mid", "OLS", "OLS-FE"};
  for (const auto& r : rows)
    t.add({fixed(r.alpha, 2), percent(r.two_stage.sign_rate), percent(r.ols.sign_rate), percent(r.ols_fe.sign_rate)});
  return t;
}

struct DesignCell {
  int d = 0, j = 0, t = 0;
  McReport report;
};

// rMSE and MND blocks with rows D and columns (J, T).
inline std::vector<Table> dimension_tables(const std::vector<DesignCell>& cells) {
  std::vector<int> ds, cols_j, cols_t;
  std::vector<std::pair<int, int>> cols;
  for (const auto& c : cells) {
    if (std::find(ds.begin(), ds.end(), c.d) == ds.end()) ds.push_back(c.d);
    if (std::find(cols.begin(), cols.end(), std::pair{c.j, c.t}) == cols.end()) cols.push_back({c.j, c.t});
  }
  std::sort(ds.begin(), ds.end());
  std::sort(cols.begin(), cols.end());
  std::vector<Table> out;
  for (const bool rmse : {true, false}) {
    Table t;
    t.title = rmse ? "rMSE by dimensions" : "MND by dimensions";
    t.header = {""};
    for (const auto& [j, tt] : cols) t.header.push_back("J=" + std::to_string(j) + " T=" + std::to_string(tt));
    for (int d : ds) {
      std::vector<std::string> row{"D=" + std::to_string(d)};
      for (const auto& [j, tt] : cols) {
        std::string cell = "-";
        for (const auto& c : cells)
          if (c.d == d && c.j == j && c.t == tt) cell = fixed(rmse ? c.report.rmse_mid : c.report.mnd_mid);
        row.push_back(cell);
      }
      t.add(std::move(row));
    }
    out.push_back(std::move(t));
  }
  return out;
}

// Long-format summary: one row per (case, method, c_hat).
inline void add_summary_rows(Table& t, const std::string& label, const McReport& r) {
  if (t.header.empty())
    t.header = {"case",       "method",     "c_hat",      "requested", "completed", "failed",   "ties",
                "rmse_mid",   "rmse_upper", "rmse_lower", "mnd_mid",   "mnd_upper", "mnd_lower", "mad",
                "sign_rate",  "coverage",   "converged",  "bias_mid",  "mean_width"};
  auto joined = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ";" : "") + full_precision(v[k]);
    return s;
  };
  t.add({label, r.method, r.c_hat, std::to_string(r.requested), std::to_string(r.completed),
         std::to_string(r.failed), std::to_string(r.ties), full_precision(r.rmse_mid), full_precision(r.rmse_upper),
         full_precision(r.rmse_lower), full_precision(r.mnd_mid), full_precision(r.mnd_upper),
         full_precision(r.mnd_lower), full_precision(r.mad), full_precision(r.sign_rate),
         full_precision(r.coverage_rate), full_precision(r.converged_rate), joined(r.bias_mid),
         joined(r.mean_width)});
}

// One row per replication with its seed, so any single draw can be rerun.
inline void add_replication_rows(Table& t, const std::string& label, const McRun& run) {
  if (t.header.empty())
    t.header = {"case",       "replication", "seed",      "ok",    "c_hat",         "beta_lower",   "beta_mid",
                "beta_upper", "covered",     "converged", "q_min", "mse_indicator", "mse_positive", "mse_cdf",
                "error"};
  auto joined = [](const std::vector<double>& v) {
    std::string s;
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ";" : "") + full_precision(v[k]);
    return s;
  };
  const bool mse = run.settings.first_stage_mse;
  for (const auto& r : run.records) {
    // No timings: the file is reproducible byte for byte.
    std::vector<std::string> base{label, std::to_string(r.index), std::to_string(r.seed), r.ok ? "true" : "false"};
    auto tail = [&](std::vector<std::string>& row) {
      row.push_back(mse && r.ok ? full_precision(r.mse[0]) : "");
      row.push_back(mse && r.ok ? full_precision(r.mse[1]) : "");
      row.push_back(mse && r.ok ? full_precision(r.mse[2]) : "");
      row.push_back(r.error);
    };
    if (r.sets.empty()) {
      auto row = base;
      row.resize(row.size() + 7);
      tail(row);
      t.add(std::move(row));
    }
    for (const auto& s : r.sets) {
      auto row = base;
      row.insert(row.end(), {full_precision(s.c_hat), joined(s.beta_lower), joined(s.beta_mid), joined(s.beta_upper),
                             s.covered ? "true" : "false", s.converged ? "true" : "false", full_precision(s.q_min)});
      tail(row);
      t.add(std::move(row));
    }
  }
}

// Text lines summarizing failed replications, empty when all succeeded.
inline std::vector<std::string> failure_summary(const std::string& label, const McRun& run) {
  std::vector<std::string> out;
  for (const auto& r : run.records)
    if (!r.ok)
      out.push_back(label + ": replication " + std::to_string(r.index) + " (seed " + std::to_string(r.seed) +
                    ") failed: " + r.error);
  return out;
}

}  // namespace pmc
