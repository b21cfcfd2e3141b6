#pragma once

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "cfattr/errors.hpp"

namespace cfattr {

// One feature vector. Units and encoding are dataset-defined; everything in
// the core is numeric (categoricals must be encoded upstream).
using instance = std::vector<double>;

struct dataset {
  std::vector<instance> rows;
  std::vector<std::string> feature_names;

  int features() const { return static_cast<int>(feature_names.size()); }
  std::size_t size() const { return rows.size(); }
  bool empty() const { return rows.empty(); }

  void validate() const {
    std::unordered_set<std::string> seen;
    for (const auto& name : feature_names)
      if (!seen.insert(name).second)
        throw contract_error("dataset: duplicate feature name '" + name + "'");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != feature_names.size())
        throw contract_error("dataset: row " + std::to_string(r) + " has " +
                             std::to_string(rows[r].size()) + " cells, expected " +
                             std::to_string(feature_names.size()));
      for (double v : rows[r])
        if (!std::isfinite(v))
          throw contract_error("dataset: non-finite value in row " + std::to_string(r));
    }
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// CSV with a header row and numeric cells only. Errors carry 1-based
// row/column positions (header is row 1).
inline dataset load_csv(std::istream& in, const std::string& origin = "<stream>") {
  dataset out;
  std::string line;
  if (!std::getline(in, line)) throw parse_error(origin + ": empty file");
  for (auto& name : detail::split_csv_line(line)) out.feature_names.push_back(detail::trim(name));
  if (out.feature_names.empty()) throw parse_error(origin + ": empty header");

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != out.feature_names.size())
      throw parse_error(origin + ": row " + std::to_string(lineno) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(out.feature_names.size()));
    instance row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string cell = detail::trim(cells[c]);
      std::size_t pos = 0;
      double v = 0.0;
      bool ok = !cell.empty();
      if (ok) {
        try {
          v = std::stod(cell, &pos);
        } catch (const std::exception&) {
          ok = false;
        }
      }
      if (!ok || pos != cell.size() || !std::isfinite(v))
        throw parse_error(origin + ": non-numeric cell '" + cell + "' at row " +
                          std::to_string(lineno) + " column " + std::to_string(c + 1));
      row[c] = v;
    }
    out.rows.push_back(std::move(row));
  }
  if (out.rows.empty()) throw parse_error(origin + ": no data rows");
  return out;
}

inline dataset load_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open dataset file: " + path);
  return load_csv(in, path);
}

inline void save_csv(const dataset& d, std::ostream& out) {
  char buf[64];
  for (std::size_t c = 0; c < d.feature_names.size(); ++c)
    out << (c ? "," : "") << d.feature_names[c];
  out << "\n";
  for (const auto& row : d.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[c]);
      out << (c ? "," : "") << buf;
    }
    out << "\n";
  }
}

}  // namespace cfattr
