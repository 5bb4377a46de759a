#pragma once

// Cooperation matrices over an (S, T) grid and their CSV form:
//
//   S,T,value
//   0,5,0.5
//   ...
//
// One row per cell, S ascending then T ascending. Values are written in the
// shortest decimal form that parses back to the same double, so a write/read
// cycle is bit-exact.

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dyadlab/error.hpp"
#include "dyadlab/game.hpp"

namespace dyadlab {

class CooperationMatrix {
 public:
  CooperationMatrix() = default;
  CooperationMatrix(GridSpec grid, std::vector<double> cells) : grid_(grid), cells_(std::move(cells)) {
    validate(grid_);
    if (cells_.size() != grid_.size())
      throw specification_error("matrix has " + std::to_string(cells_.size()) + " cells, grid has " +
                                std::to_string(grid_.size()));
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      if (!(cells_[i] >= 0.0 && cells_[i] <= 1.0))
        throw specification_error("cell " + describe_cell(grid_.s_at(i), grid_.t_at(i)) +
                                  " outside [0, 1]");
    }
  }

  static CooperationMatrix filled(GridSpec grid, double value) {
    validate(grid);
    return CooperationMatrix(grid, std::vector<double>(grid.size(), value));
  }

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& cells() const { return cells_; }
  std::size_t size() const { return cells_.size(); }

  double at(Points s, Points t) const {
    if (!grid_.contains(s, t)) throw specification_error("cell " + describe_cell(s, t) + " not in grid");
    return cells_[grid_.index_of(s, t)];
  }
  double operator[](std::size_t i) const { return cells_[i]; }

  friend bool operator==(const CooperationMatrix&, const CooperationMatrix&) = default;

 private:
  GridSpec grid_{};
  std::vector<double> cells_;
};

inline bool same_shape(const GridSpec& a, const GridSpec& b) {
  return a.s_min == b.s_min && a.s_max == b.s_max && a.t_min == b.t_min && a.t_max == b.t_max &&
         a.step == b.step;
}

inline std::string format_value(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw Error(ErrorCategory::Io, "cannot format value");
  return std::string(buf, ptr);
}

inline void write_csv(std::ostream& os, const CooperationMatrix& m) {
  os << "S,T,value\n";
  const GridSpec& g = m.grid();
  for (std::size_t i = 0; i < m.size(); ++i)
    os << g.s_at(i) << ',' << g.t_at(i) << ',' << format_value(m[i]) << '\n';
}

inline std::string to_csv(const CooperationMatrix& m) {
  std::ostringstream os;
  write_csv(os, m);
  return os.str();
}

inline void save_csv(const std::string& path, const CooperationMatrix& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCategory::Io, "cannot write " + path);
  write_csv(os, m);
  if (!os) throw Error(ErrorCategory::Io, "write failed for " + path);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

// Infers a rectangular, uniformly spaced grid from a set of coordinates.
inline GridSpec infer_grid(std::vector<Points> ss, std::vector<Points> ts, Points R, Points P) {
  auto axis = [](std::vector<Points>& v, Points& lo, Points& hi, Points& step, const char* name) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    lo = v.front();
    hi = v.back();
    step = v.size() > 1 ? v[1] - v[0] : 1;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i] - v[i - 1] != step)
        throw specification_error(std::string("non-uniform ") + name + " axis");
  };
  GridSpec g;
  Points s_step = 1, t_step = 1;
  axis(ss, g.s_min, g.s_max, s_step, "S");
  axis(ts, g.t_min, g.t_max, t_step, "T");
  if (ss.size() > 1 && ts.size() > 1 && s_step != t_step)
    throw specification_error("S and T axes use different steps");
  g.step = ss.size() > 1 ? s_step : t_step;
  g.R = R;
  g.P = P;
  return g;
}

}  // namespace detail

// Strict reader for the matrix CSV. R and P are not stored in the file.
inline CooperationMatrix read_csv(std::istream& is, Points R = kDefaultReward, Points P = kDefaultPunishment) {
  std::string line;
  if (!std::getline(is, line) || detail::trim(line) != "S,T,value")
    throw specification_error("matrix CSV must start with header S,T,value");
  struct Row {
    Points s, t;
    double v;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto f = detail::split(line, ',');
    Row r{};
    if (f.size() != 3 || !detail::parse_number(f[0], r.s) || !detail::parse_number(f[1], r.t) ||
        !detail::parse_number(f[2], r.v))
      throw specification_error("malformed matrix CSV line " + std::to_string(lineno));
    rows.push_back(r);
  }
  if (rows.empty()) throw specification_error("matrix CSV has no cells");
  std::vector<Points> ss, ts;
  for (const auto& r : rows) {
    ss.push_back(r.s);
    ts.push_back(r.t);
  }
  const GridSpec grid = detail::infer_grid(ss, ts, R, P);
  if (rows.size() != grid.size())
    throw specification_error("matrix CSV does not cover a full grid");
  std::vector<double> cells(grid.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (grid.index_of(rows[i].s, rows[i].t) != i)
      throw specification_error("matrix CSV rows are not in S-then-T order at " +
                                describe_cell(rows[i].s, rows[i].t));
    cells[i] = rows[i].v;
  }
  return CooperationMatrix(grid, std::move(cells));
}

inline CooperationMatrix load_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCategory::Io, "cannot open " + path);
  return read_csv(is);
}

inline CooperationMatrix from_csv(const std::string& text) {
  std::istringstream is(text);
  return read_csv(is);
}

}  // namespace dyadlab
