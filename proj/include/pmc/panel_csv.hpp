#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pmc/error.hpp"
#include "pmc/panel.hpp"

namespace pmc {

// Long-format CSV: one row per (agent, product, period).
// Header: agent,product,period,outcome,x1..xD (column names configurable).
struct CsvSchema {
  std::string agent = "agent";
  std::string product = "product";
  std::string period = "period";
  std::string outcome = "outcome";
  // Empty: use every header column named x1, x2, ... (consecutive from x1).
  std::vector<std::string> covariates;
  OutcomeKind kind = OutcomeKind::binary;
  bool outside_option = false;
};

namespace detail {

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r')) cell.remove_suffix(1);
    cells.push_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline double parse_double(std::string_view cell, std::size_t line, std::string_view column) {
  if (cell.empty()) throw ParseError("missing value in column '" + std::string(column) + "'", line);
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw ParseError("cannot parse '" + std::string(cell) + "' as a number in column '" + std::string(column) + "'",
                     line);
  return v;
}

inline long long parse_id(std::string_view cell, std::size_t line, std::string_view column) {
  if (cell.empty()) throw ParseError("missing value in column '" + std::string(column) + "'", line);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw ParseError("cannot parse '" + std::string(cell) + "' as an integer id in column '" + std::string(column) + "'",
                     line);
  return v;
}

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline PanelDataset read_csv(std::istream& in, const CsvSchema& schema = {}) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty input: header row expected", 1);
  const auto header = detail::split_csv_line(line);

  auto find_column = [&](const std::string& name) -> std::size_t {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    throw ParseError("missing column '" + name + "' in header", 1);
  };
  const std::size_t c_agent = find_column(schema.agent);
  const std::size_t c_product = find_column(schema.product);
  const std::size_t c_period = find_column(schema.period);
  const std::size_t c_outcome = find_column(schema.outcome);

  std::vector<std::string> cov_names = schema.covariates;
  if (cov_names.empty()) {
    for (int d = 1;; ++d) {
      const std::string name = "x" + std::to_string(d);
      if (std::find(header.begin(), header.end(), name) == header.end()) break;
      cov_names.push_back(name);
    }
    if (cov_names.empty()) throw ParseError("missing column 'x1' in header", 1);
  }
  std::vector<std::size_t> c_cov;
  for (const auto& name : cov_names) c_cov.push_back(find_column(name));
  const int n_cov = static_cast<int>(c_cov.size());

  struct Row {
    long long agent, product, period;
    double outcome;
    std::vector<double> x;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw ParseError("expected " + std::to_string(header.size()) + " cells, found " + std::to_string(cells.size()),
                       line_no);
    Row r;
    r.line = line_no;
    r.agent = detail::parse_id(cells[c_agent], line_no, schema.agent);
    r.product = detail::parse_id(cells[c_product], line_no, schema.product);
    r.period = detail::parse_id(cells[c_period], line_no, schema.period);
    r.outcome = detail::parse_double(cells[c_outcome], line_no, schema.outcome);
    r.x.resize(n_cov);
    for (int d = 0; d < n_cov; ++d) r.x[d] = detail::parse_double(cells[c_cov[d]], line_no, cov_names[d]);
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("dataset has no rows");

  auto index_of = [](std::vector<long long> ids) {
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::map<long long, int> m;
    for (std::size_t k = 0; k < ids.size(); ++k) m[ids[k]] = static_cast<int>(k);
    return m;
  };
  std::vector<long long> a_ids, p_ids, t_ids;
  for (const auto& r : rows) {
    a_ids.push_back(r.agent);
    p_ids.push_back(r.product);
    t_ids.push_back(r.period);
  }
  const auto agents = index_of(a_ids), products = index_of(p_ids), periods = index_of(t_ids);
  const int n = static_cast<int>(agents.size()), j = static_cast<int>(products.size()),
            t = static_cast<int>(periods.size());
  if (t < 2) throw ValidationError("at least two periods are required, found " + std::to_string(t));

  const std::size_t cells = std::size_t(n) * j * t;
  std::vector<double> x(cells * n_cov), y(cells);
  std::vector<char> seen(cells, 0);
  for (const auto& r : rows) {
    const int i = agents.at(r.agent), jj = products.at(r.product), tt = periods.at(r.period);
    const std::size_t cell = (std::size_t(i) * t + tt) * j + jj;
    if (seen[cell]) throw ValidationError("duplicate (agent, product, period) row at line " + std::to_string(r.line));
    seen[cell] = 1;
    y[cell] = r.outcome;
    std::copy(r.x.begin(), r.x.end(), x.begin() + cell * n_cov);
  }
  if (rows.size() != cells)
    throw ValidationError("panel is unbalanced: expected " + std::to_string(cells) + " rows (N*J*T), found " +
                          std::to_string(rows.size()));
  return PanelDataset(n, j, t, n_cov, std::move(x), std::move(y), schema.kind, schema.outside_option);
}

inline PanelDataset load_csv(const std::string& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_csv(in, schema);
}

// Writes 1-based agent/product/period ids. Floats use shortest round-trip form.
inline void write_csv(std::ostream& out, const PanelDataset& data) {
  out << "agent,product,period,outcome";
  for (int d = 0; d < data.n_covariates(); ++d) out << ",x" << d + 1;
  out << '\n';
  for (int i = 0; i < data.n_agents(); ++i)
    for (int j = 0; j < data.n_products(); ++j)
      for (int t = 0; t < data.n_periods(); ++t) {
        out << i + 1 << ',' << j + 1 << ',' << t + 1 << ',' << detail::format_double(data.outcome(i, j, t));
        for (int d = 0; d < data.n_covariates(); ++d) out << ',' << detail::format_double(data.x(i, j, t, d));
        out << '\n';
      }
}

inline void save_csv(const std::string& path, const PanelDataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path + "'");
  write_csv(out, data);
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace pmc
