#pragma once

// CSV input: covariate tables (optionally with a unit-id column and derived
// square / interaction columns) and outcome columns aligned by unit id.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rerand/balance.hpp"
#include "rerand/error.hpp"

namespace rerand::io {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

// Splits one line on commas; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  fields.push_back(trim(field));
  return fields;
}

inline double parse_number(const std::string& cell, std::size_t row, std::size_t col, const std::string& column) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ValidationError("non-numeric cell '" + cell + "' at row " + std::to_string(row) + ", column " +
                          std::to_string(col) + " (" + column + ")");
  }
  return value;
}

}  // namespace detail

inline CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ValidationError("ragged row at line " + std::to_string(line_no) + ": expected " +
                            std::to_string(table.header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw ValidationError("empty CSV file");
  if (table.rows.empty()) throw ValidationError("no data rows");
  return table;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  return parse_csv(in);
}

struct CovariateOptions {
  /// Column holding unit ids; empty means "use an `id` column if present".
  std::string id_column;
  bool squares = false;
  bool interactions = false;
};

struct CovariateData {
  CovariateMatrix x;
  std::vector<std::string> ids;
};

/// Numeric covariates from a parsed table, with squares x_j^2 and pairwise
/// products x_i x_j appended on request.
inline CovariateData covariates_from_table(const CsvTable& table, const CovariateOptions& opt = {}) {
  std::optional<std::size_t> id_col;
  const std::string id_name = opt.id_column.empty() ? "id" : opt.id_column;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == id_name) id_col = j;
  }
  if (!opt.id_column.empty() && !id_col) throw ValidationError("id column '" + opt.id_column + "' not found");

  std::vector<std::size_t> cols;
  std::vector<std::string> names;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (id_col && j == *id_col) continue;
    cols.push_back(j);
    names.push_back(table.header[j]);
  }
  if (cols.empty()) throw ValidationError("no covariate columns");

  const std::size_t n = table.rows.size();
  const std::size_t base = cols.size();
  std::size_t k = base;
  if (opt.squares) k += base;
  if (opt.interactions) k += base * (base - 1) / 2;
  Eigen::MatrixXd data(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = table.rows[i];
    ids.push_back(id_col ? row[*id_col] : std::to_string(i + 1));
    for (std::size_t c = 0; c < base; ++c) {
      data(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          detail::parse_number(row[cols[c]], i + 2, cols[c] + 1, names[c]);
    }
  }
  std::size_t next = base;
  if (opt.squares) {
    for (std::size_t c = 0; c < base; ++c, ++next) {
      data.col(static_cast<Eigen::Index>(next)) = data.col(static_cast<Eigen::Index>(c)).array().square();
      names.push_back(names[c] + "^2");
    }
  }
  if (opt.interactions) {
    for (std::size_t a = 0; a < base; ++a) {
      for (std::size_t b = a + 1; b < base; ++b, ++next) {
        data.col(static_cast<Eigen::Index>(next)) =
            data.col(static_cast<Eigen::Index>(a)).cwiseProduct(data.col(static_cast<Eigen::Index>(b)));
        names.push_back(names[a] + "*" + names[b]);
      }
    }
  }
  return {CovariateMatrix(std::move(data), std::move(names)), std::move(ids)};
}

inline CovariateData ingest_covariates(const std::string& path, const CovariateOptions& opt = {}) {
  return covariates_from_table(read_csv(path), opt);
}

/// Outcome column `column` (default: the only non-id column), reordered to
/// follow `ids`. Without an id column the file order is used.
inline std::vector<double> outcomes_from_table(const CsvTable& table, const std::vector<std::string>& ids,
                                               const std::string& column = "", const std::string& id_column = "id") {
  std::optional<std::size_t> id_col;
  std::optional<std::size_t> y_col;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == id_column) {
      id_col = j;
    } else if (column.empty() ? !y_col : table.header[j] == column) {
      y_col = j;
    }
  }
  if (!y_col) throw ValidationError(column.empty() ? "no outcome column" : "outcome column '" + column + "' not found");
  if (table.rows.size() != ids.size()) {
    throw ValidationError("outcome file has " + std::to_string(table.rows.size()) + " rows, design has " +
                          std::to_string(ids.size()) + " units");
  }
  std::vector<double> y(ids.size());
  if (!id_col) {
    for (std::size_t i = 0; i < ids.size(); ++i) {
      y[i] = detail::parse_number(table.rows[i][*y_col], i + 2, *y_col + 1, table.header[*y_col]);
    }
    return y;
  }
  std::map<std::string, std::size_t> position;
  for (std::size_t i = 0; i < ids.size(); ++i) position[ids[i]] = i;
  std::vector<bool> seen(ids.size(), false);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& id = table.rows[r][*id_col];
    const auto it = position.find(id);
    if (it == position.end() || seen[it->second]) {
      throw ValidationError("unit id mismatch: '" + id + "' in outcomes is unknown or repeated");
    }
    seen[it->second] = true;
    y[it->second] = detail::parse_number(table.rows[r][*y_col], r + 2, *y_col + 1, table.header[*y_col]);
  }
  return y;
}

}  // namespace rerand::io
