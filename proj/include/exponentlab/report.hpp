#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <deque>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "exponentlab/regions.hpp"

namespace exponentlab {

inline constexpr int kReportSchema = 1;

using Cell = std::variant<double, long long, std::string>;

/// Six significant digits; infinities spelled out.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline std::string format_cell(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) return format_number(*d);
  if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
  return std::get<std::string>(c);
}

inline nlohmann::json cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    if (std::isinf(*d)) return *d > 0 ? "inf" : "-inf";
    if (std::isnan(*d)) return "nan";
    return *d;
  }
  if (const auto* i = std::get_if<long long>(&c)) return *i;
  return std::get<std::string>(c);
}

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  Table(std::string n, std::vector<std::string> cols) : name(std::move(n)), columns(std::move(cols)) {}

  void add(std::vector<Cell> row) {
    if (row.size() != columns.size()) throw std::logic_error("table " + name + ": row width mismatch");
    rows.push_back(std::move(row));
  }
};

struct Check {
  std::string name;
  std::string expected;
  std::string actual;
  std::string tolerance;
  bool hard = true;
  bool passed = false;
};

struct Report {
  std::string command;
  std::string scenario_digest;
  std::deque<Table> tables;  // deque: references from table() stay valid
  std::vector<Check> checks;
  nlohmann::json diagnostics = nlohmann::json::object();
  bool nonconverged = false;

  Table& table(std::string name, std::vector<std::string> columns) {
    tables.emplace_back(std::move(name), std::move(columns));
    return tables.back();
  }
  bool hard_failure() const {
    for (const Check& c : checks)
      if (c.hard && !c.passed) return true;
    return false;
  }
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Everything but the timestamp is a pure function of the inputs.
inline nlohmann::json report_json(const Report& r, const std::string& timestamp = utc_timestamp()) {
  nlohmann::json doc;
  doc["schema"] = kReportSchema;
  doc["command"] = r.command;
  doc["scenario_digest"] = r.scenario_digest;
  doc["timestamp"] = timestamp;
  nlohmann::json tables = nlohmann::json::array();
  for (const Table& t : r.tables) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) {
      nlohmann::json jr = nlohmann::json::array();
      for (const Cell& c : row) jr.push_back(cell_json(c));
      rows.push_back(jr);
    }
    tables.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", rows}});
  }
  doc["tables"] = tables;
  nlohmann::json checks = nlohmann::json::array();
  for (const Check& c : r.checks)
    checks.push_back({{"name", c.name}, {"expected", c.expected}, {"actual", c.actual},
                      {"tolerance", c.tolerance}, {"hard", c.hard}, {"passed", c.passed}});
  doc["checks"] = checks;
  doc["diagnostics"] = r.diagnostics;
  doc["nonconverged"] = r.nonconverged;
  return doc;
}

inline void write_text(std::ostream& os, const Report& r) {
  os << "# " << r.command << "  (scenario " << r.scenario_digest << ")\n";
  for (const Table& t : r.tables) {
    std::vector<std::size_t> width(t.columns.size());
    for (std::size_t c = 0; c < t.columns.size(); ++c) width[c] = t.columns[c].size();
    std::vector<std::vector<std::string>> text;
    for (const auto& row : t.rows) {
      std::vector<std::string> line;
      for (std::size_t c = 0; c < row.size(); ++c) {
        line.push_back(format_cell(row[c]));
        width[c] = std::max(width[c], line.back().size());
      }
      text.push_back(std::move(line));
    }
    os << "\n[" << t.name << "]\n";
    auto emit = [&](const std::vector<std::string>& cells) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        os << (c ? "  " : "");
        os << std::string(width[c] - cells[c].size(), ' ') << cells[c];
      }
      os << '\n';
    };
    emit(t.columns);
    for (const auto& line : text) emit(line);
  }
  if (!r.checks.empty()) {
    os << "\n[checks]\n";
    for (const Check& c : r.checks)
      os << (c.passed ? "PASS " : (c.hard ? "FAIL " : "WARN ")) << c.name << ": expected " << c.expected
         << ", actual " << c.actual << " (tol " << c.tolerance << ")\n";
  }
}

/// One CSV file per table, named after the table.
inline void write_csv(const std::filesystem::path& dir, const Report& r) {
  std::filesystem::create_directories(dir);
  for (const Table& t : r.tables) {
    std::ofstream out(dir / (t.name + ".csv"));
    if (!out) throw std::runtime_error("cannot write " + (dir / (t.name + ".csv")).string());
    for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
    out << '\n';
    for (const auto& row : t.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) {
        const std::string s = format_cell(row[c]);
        out << (c ? "," : "") << (s.find(',') != std::string::npos ? "\"" + s + "\"" : s);
      }
      out << '\n';
    }
  }
}

/// Boundary lines of every polyhedron, one row per halfspace.
inline void add_region_table(Report& r, const std::string& name, const RegionSet& rs) {
  Table& t = r.table(name, {"decision", "polyhedron", "i", "j", "rhs", "constraint"});
  for (std::size_t d = 0; d < rs.decisions(); ++d)
    for (std::size_t p = 0; p < rs[d].size(); ++p)
      for (const Halfspace& h : rs[d][p].halfspaces) {
        auto z = [](std::size_t i) { return i ? "z" + std::to_string(i) : std::string("0"); };
        t.add({static_cast<long long>(d), static_cast<long long>(p), static_cast<long long>(h.i),
               static_cast<long long>(h.j), h.rhs, z(h.i) + " - " + z(h.j) + " >= " + format_number(h.rhs)});
      }
}

}  // namespace exponentlab
