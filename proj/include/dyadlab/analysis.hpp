#pragma once

// Matrix comparison metrics and region aggregates.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dyadlab/error.hpp"
#include "dyadlab/game.hpp"
#include "dyadlab/matrix.hpp"

namespace dyadlab {

struct ComparisonResult {
  double msd = 0.0;                  // mean squared displacement over cells
  std::optional<double> pearson_r;   // absent when either side is constant
  std::size_t n_cells = 0;
};

// Plain two-pass statistics over paired samples.
inline ComparisonResult compare_values(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw specification_error("compared samples differ in length");
  if (a.empty()) throw specification_error("nothing to compare");
  const double n = static_cast<double>(a.size());
  double mean_a = 0.0, mean_b = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
    sq += (a[i] - b[i]) * (a[i] - b[i]);
  }
  mean_a /= n;
  mean_b /= n;
  double cov = 0.0, var_a = 0.0, var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - mean_a) * (b[i] - mean_b);
    var_a += (a[i] - mean_a) * (a[i] - mean_a);
    var_b += (b[i] - mean_b) * (b[i] - mean_b);
  }
  ComparisonResult r;
  r.n_cells = a.size();
  r.msd = sq / n;
  if (var_a > 0.0 && var_b > 0.0) r.pearson_r = std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
  return r;
}

inline ComparisonResult compare_matrices(const CooperationMatrix& a, const CooperationMatrix& b) {
  if (!same_shape(a.grid(), b.grid())) throw specification_error("matrices are on different grids");
  return compare_values(a.cells(), b.cells());
}

struct Region {
  std::string name;
  std::function<bool(Points s, Points t)> contains;
};

inline Region original_region() {
  const GridSpec o = GridSpec::original();
  return {"original", [o](Points s, Points t) { return o.contains(s, t); }};
}
inline Region harmony_score_region() {
  return {"harmony-score", [](Points s, Points t) { return s >= t; }};
}
inline Region all_region() {
  return {"all", [](Points, Points) { return true; }};
}

inline Region parse_region(std::string_view name) {
  if (name == "original") return original_region();
  if (name == "harmony-score") return harmony_score_region();
  if (name == "all") return all_region();
  throw specification_error("unknown region '" + std::string(name) + "' (original, harmony-score, all)");
}

inline std::vector<std::size_t> region_cells(const GridSpec& grid, const Region& region) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (region.contains(grid.s_at(i), grid.t_at(i))) idx.push_back(i);
  return idx;
}

inline double region_average(const CooperationMatrix& m, const Region& region) {
  const auto idx = region_cells(m.grid(), region);
  if (idx.empty()) throw specification_error("region '" + region.name + "' selects no cells");
  double sum = 0.0;
  for (std::size_t i : idx) sum += m[i];
  return sum / static_cast<double>(idx.size());
}

// Compares two matrices over the region's cells. The matrices may live on
// different grids as long as both contain every selected cell of `a`.
inline ComparisonResult compare_in_region(const CooperationMatrix& a, const CooperationMatrix& b,
                                          const Region& region) {
  std::vector<double> va, vb;
  for (std::size_t i : region_cells(a.grid(), region)) {
    const Points s = a.grid().s_at(i), t = a.grid().t_at(i);
    if (!b.grid().contains(s, t))
      throw specification_error("second matrix lacks cell " + describe_cell(s, t) + " of region " + region.name);
    va.push_back(a[i]);
    vb.push_back(b.at(s, t));
  }
  if (va.empty()) throw specification_error("region '" + region.name + "' selects no cells");
  return compare_values(va, vb);
}

}  // namespace dyadlab
