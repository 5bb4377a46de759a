#pragma once

// Human experiment data -> cooperation matrix (+ per-game SD).
//
// Two comma-separated schemas, both with a header row; column names are
// configurable through SchemaDescriptor:
//
//   aggregate  one row per game:      S,T,coop_rate[,sd]
//   rows       one row per decision:  S,T,choice   (choice 1/0, C/D, cooperate/defect)
//
// Rows may also be written as key=value lists without a header, e.g.
// "S=8,T=7,coop_rate=0.9". Extra columns are ignored. Every grid cell must be
// covered.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dyadlab/error.hpp"
#include "dyadlab/game.hpp"
#include "dyadlab/matrix.hpp"

namespace dyadlab {

enum class SchemaKind { Aggregate, Rows };

struct SchemaDescriptor {
  SchemaKind kind = SchemaKind::Aggregate;
  std::string s_column = "S";
  std::string t_column = "T";
  std::string value_column;  // defaults: coop_rate (aggregate), choice (rows)
  std::string sd_column = "sd";
  GridSpec grid = GridSpec::original();

  std::string value_name() const {
    if (!value_column.empty()) return value_column;
    return kind == SchemaKind::Aggregate ? "coop_rate" : "choice";
  }
};

inline SchemaKind parse_schema_kind(std::string_view s) {
  if (s == "aggregate") return SchemaKind::Aggregate;
  if (s == "rows") return SchemaKind::Rows;
  throw Error(ErrorCategory::Ingestion, "unknown schema '" + std::string(s) + "' (aggregate, rows)");
}

struct HumanData {
  CooperationMatrix matrix;
  std::optional<CooperationMatrix> sd;
  std::vector<std::size_t> samples;  // decisions per cell (rows schema), else empty
};

namespace detail {

inline std::optional<int> parse_binary_choice(std::string_view v) {
  if (v == "1" || v == "C" || v == "c" || v == "cooperate" || v == "true") return 1;
  if (v == "0" || v == "D" || v == "d" || v == "defect" || v == "false") return 0;
  return std::nullopt;
}

[[noreturn]] inline void ingestion_failure(const std::string& what, const std::vector<std::string>& offenders) {
  std::string msg = what;
  const std::size_t shown = std::min<std::size_t>(offenders.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) msg += (i == 0 ? ": " : ", ") + offenders[i];
  if (offenders.size() > shown) msg += ", ... (" + std::to_string(offenders.size()) + " total)";
  throw Error(ErrorCategory::Ingestion, msg);
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // (line number, fields)
};

inline Table read_table(std::istream& is) {
  Table table;
  std::string line;
  std::size_t lineno = 0;
  bool keyed = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line, ',');
    if (table.header.empty() && !keyed) {
      keyed = line.find('=') != std::string::npos;
      if (!keyed) {
        for (auto f : fields) table.header.emplace_back(f);
        continue;
      }
    }
    if (!keyed) {
      std::vector<std::string> row;
      for (auto f : fields) row.emplace_back(f);
      table.rows.emplace_back(lineno, std::move(row));
      continue;
    }
    std::vector<std::string> row(table.header.size());
    for (auto f : fields) {
      const auto eq = f.find('=');
      if (eq == std::string_view::npos) throw Error(ErrorCategory::Ingestion, "line " + std::to_string(lineno) + ": expected key=value");
      const std::string key(trim(f.substr(0, eq)));
      std::size_t col = 0;
      while (col < table.header.size() && table.header[col] != key) ++col;
      if (col == table.header.size()) {
        table.header.push_back(key);
        row.emplace_back();
      }
      row[col] = std::string(trim(f.substr(eq + 1)));
    }
    table.rows.emplace_back(lineno, std::move(row));
  }
  if (table.header.empty()) throw Error(ErrorCategory::Ingestion, "empty input");
  return table;
}

}  // namespace detail

inline HumanData ingest_human_data(std::istream& is, const SchemaDescriptor& schema) {
  validate(schema.grid);
  const detail::Table table = detail::read_table(is);
  const auto& header = table.header;
  auto column = [&](const std::string& name, bool required) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    if (required) throw Error(ErrorCategory::Ingestion, "missing column '" + name + "'");
    return std::nullopt;
  };
  const std::size_t s_col = *column(schema.s_column, true);
  const std::size_t t_col = *column(schema.t_column, true);
  const std::size_t v_col = *column(schema.value_name(), true);
  const auto sd_found = schema.kind == SchemaKind::Aggregate ? column(schema.sd_column, false) : std::nullopt;
  const bool has_sd = sd_found.has_value();
  const std::size_t sd_col = sd_found.value_or(0);

  const GridSpec& grid = schema.grid;
  std::vector<double> sum(grid.size(), 0.0), sum_sd(grid.size(), 0.0);
  std::vector<std::size_t> count(grid.size(), 0);
  std::vector<std::string> out_of_range, malformed;
  for (const auto& [lineno, f] : table.rows) {
    Points s = 0, t = 0;
    const auto need = std::max({s_col, t_col, v_col, sd_col});
    if (f.size() <= need || !detail::parse_number(f[s_col], s) || !detail::parse_number(f[t_col], t)) {
      malformed.push_back("line " + std::to_string(lineno));
      continue;
    }
    if (!grid.contains(s, t)) {
      out_of_range.push_back(describe_cell(s, t) + " on line " + std::to_string(lineno));
      continue;
    }
    const std::size_t i = grid.index_of(s, t);
    if (schema.kind == SchemaKind::Rows) {
      const auto c = detail::parse_binary_choice(f[v_col]);
      if (!c) {
        malformed.push_back("line " + std::to_string(lineno));
        continue;
      }
      sum[i] += *c;
      ++count[i];
    } else {
      double v = 0.0, sd = 0.0;
      if (!detail::parse_number(f[v_col], v) || !(v >= 0.0 && v <= 1.0) ||
          (has_sd && !detail::parse_number(f[sd_col], sd))) {
        malformed.push_back("line " + std::to_string(lineno));
        continue;
      }
      if (count[i] > 0) {
        malformed.push_back("duplicate " + describe_cell(s, t) + " on line " + std::to_string(lineno));
        continue;
      }
      sum[i] = v;
      sum_sd[i] = sd;
      count[i] = 1;
    }
  }
  if (!malformed.empty()) detail::ingestion_failure("malformed rows", malformed);
  if (!out_of_range.empty()) detail::ingestion_failure("payoffs outside the grid", out_of_range);
  std::vector<std::string> missing;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (count[i] == 0) missing.push_back(describe_cell(grid.s_at(i), grid.t_at(i)));
  if (!missing.empty()) detail::ingestion_failure("missing cells", missing);

  HumanData out;
  std::vector<double> mean(grid.size());
  if (schema.kind == SchemaKind::Rows) {
    // Sample SD of the binary decisions (n - 1 denominator); 0 for single samples.
    std::vector<double> sd(grid.size(), 0.0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double n = static_cast<double>(count[i]);
      mean[i] = sum[i] / n;
      if (count[i] > 1) sd[i] = std::sqrt(n * mean[i] * (1.0 - mean[i]) / (n - 1.0));
    }
    out.sd = CooperationMatrix(grid, std::move(sd));
    out.samples = count;
  } else {
    mean = sum;
    if (has_sd) out.sd = CooperationMatrix(grid, sum_sd);
  }
  out.matrix = CooperationMatrix(grid, std::move(mean));
  return out;
}

inline HumanData ingest_human_data(const std::string& path, const SchemaDescriptor& schema) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCategory::Ingestion, "cannot open " + path);
  return ingest_human_data(is, schema);
}

}  // namespace dyadlab
