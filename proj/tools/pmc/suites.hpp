#pragma once

#include <string>
#include <vector>

#include "pmc/report.hpp"
#include "pmc/simlab/mc.hpp"

namespace pmc::cli {

struct SuiteCase {
  std::string label;
  McSettings settings;
};

struct Suite {
  std::string name;
  std::vector<SuiteCase> cases;
};

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"table1", "table2", "table3", "table4", "table6", "table8"};
  return names;
}

namespace detail {

inline McSettings base_case(Design design, int n, int m) {
  McSettings s;
  s.dgp.design = design;
  s.dgp.n = n;
  s.replications = m;
  return s;
}

}  // namespace detail

// Desk scale keeps every suite within minutes on one core; full scale uses
// N = 10,000 (205 agents over 52 periods for table6) and 100 replications.
inline Suite make_suite(const std::string& name, bool full_scale) {
  Suite s;
  s.name = name;
  const int m = full_scale ? 100 : 20;
  const int n = full_scale ? 10000 : 2000;
  if (name == "table1") {
    auto c = detail::base_case(Design::baseline, n, m);
    c.first_stage_mse = true;
    c.run_estimator = false;
    s.cases.push_back({"baseline", c});
  } else if (name == "table2") {
    s.cases.push_back({"baseline", detail::base_case(Design::baseline, n, m)});
  } else if (name == "table3") {
    for (int full : {10000, 4000, 1000}) {
      const int size = full_scale ? full : full / 5;
      s.cases.push_back({"N=" + std::to_string(size), detail::base_case(Design::baseline, size, m)});
    }
  } else if (name == "table4") {
    s.cases.push_back({"yes", detail::base_case(Design::point_id, n, m)});
    auto c = detail::base_case(Design::partial_id, n, m);
    c.c_hat_grid = {0.01, 0.1, 1.0};
    s.cases.push_back({"no", c});
  } else if (name == "table6") {
    for (double alpha : {0.15, 0.30, 0.50}) {
      auto c = detail::base_case(Design::multiplicative_fe, 205, full_scale ? 100 : 25);
      c.dgp.j = 4;
      c.dgp.t = full_scale ? 52 : 12;
      c.dgp.alpha_mix = alpha;
      c.compare_ols = true;
      // At N = 205 the network first stage underfits the share differences.
      c.estimator.regressor.kind = RegressorKind::kernel;
      s.cases.push_back({"alpha=" + fixed(alpha, 2), c});
    }
  } else if (name == "table8") {
    for (int d : {3, 4})
      for (int j : {3, 4})
        for (int t : {2, 4}) {
          auto c = detail::base_case(Design::varying, n, m);
          c.dgp.d = d;
          c.dgp.j = j;
          c.dgp.t = t;
          s.cases.push_back({"D=" + std::to_string(d) + " J=" + std::to_string(j) + " T=" + std::to_string(t), c});
        }
  } else {
    std::string list;
    for (const auto& v : suite_names()) list += (list.empty() ? "" : ", ") + v;
    throw ValidationError("unknown suite '" + name + "' (valid suites: " + list + ")");
  }
  return s;
}

inline std::vector<Table> suite_tables(const Suite& suite, const std::vector<McRun>& runs) {
  std::vector<Table> out;
  const auto& name = suite.name;
  if (name == "table1") {
    out.push_back(first_stage_table(*runs.front().first_stage));
  } else if (name == "table2") {
    out.push_back(accuracy_table(runs.front().estimator.front()));
  } else if (name == "table3") {
    std::vector<SizedReport> rows;
    for (const auto& r : runs) rows.push_back({r.settings.dgp.n, r.estimator.front()});
    out.push_back(varying_n_table(rows));
  } else if (name == "table4") {
    std::vector<LabeledReport> rows;
    for (std::size_t k = 0; k < runs.size(); ++k)
      for (const auto& r : runs[k].estimator) {
        McReport rep = r;
        if (runs[k].settings.dgp.design == Design::point_id) rep.c_hat.clear();
        rows.push_back({suite.cases[k].label, rep});
      }
    out.push_back(identification_table(rows));
  } else if (name == "table6") {
    std::vector<SignRow> rows;
    for (const auto& r : runs) rows.push_back({r.settings.dgp.alpha_mix, r.estimator.front(), *r.ols, *r.ols_fe});
    out.push_back(sign_table(rows));
  } else if (name == "table8") {
    std::vector<DesignCell> cells;
    for (const auto& r : runs) cells.push_back({r.settings.dgp.d, r.settings.dgp.j, r.settings.dgp.t, r.estimator.front()});
    out = dimension_tables(cells);
  } else {
    for (std::size_t k = 0; k < runs.size(); ++k) {
      const auto& r = runs[k];
      if (r.first_stage) out.push_back(first_stage_table(*r.first_stage));
      for (const auto& e : r.estimator) {
        Table t = accuracy_table(e);
        t.title = suite.cases[k].label + ": two-stage, c_hat=" + e.c_hat;
        t.notes.push_back("sign rate " + percent(e.sign_rate) + ", coverage " + percent(e.coverage_rate) +
                          ", converged " + percent(e.converged_rate) + ", completed " + std::to_string(e.completed) +
                          "/" + std::to_string(e.requested));
        out.push_back(std::move(t));
      }
      for (const auto* o : {r.ols ? &*r.ols : nullptr, r.ols_fe ? &*r.ols_fe : nullptr}) {
        if (!o) continue;
        Table t = accuracy_table(*o);
        t.title = suite.cases[k].label + ": " + o->method;
        t.notes.push_back("sign rate " + percent(o->sign_rate));
        out.push_back(std::move(t));
      }
    }
  }
  // Failed replications are excluded from the metrics above.
  for (std::size_t k = 0; k < runs.size(); ++k)
    for (const auto& e : runs[k].estimator)
      if (e.completed < e.requested)
        out.back().notes.push_back(suite.cases[k].label + ": " + std::to_string(e.requested - e.completed) +
                                   " of " + std::to_string(e.requested) + " replications failed");
  return out;
}

}  // namespace pmc::cli
