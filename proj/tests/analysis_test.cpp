#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "dyadlab/analysis.hpp"
#include "dyadlab/equilibrium.hpp"
#include "dyadlab/heatmap.hpp"
#include "dyadlab/matrix.hpp"

using namespace dyadlab;

namespace {

CooperationMatrix random_matrix(const GridSpec& g, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(g.size());
  for (auto& x : v) x = u(rng);
  return CooperationMatrix(g, v);
}

// Textbook formulas, written independently of the library.
double ref_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
    saa += a[i] * a[i];
    sbb += b[i] * b[i];
    sab += a[i] * b[i];
  }
  return (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
}

}  // namespace

TEST(Compare, IdentityAndConstants) {
  std::mt19937_64 rng(5);
  const auto a = random_matrix(GridSpec::original(), rng);
  const auto same = compare_matrices(a, a);
  EXPECT_EQ(same.msd, 0.0);
  EXPECT_NEAR(*same.pearson_r, 1.0, 1e-12);

  const GridSpec g = GridSpec::original();
  const CooperationMatrix c3(g, std::vector<double>(g.size(), 0.3)), c5(g, std::vector<double>(g.size(), 0.5));
  const auto r = compare_matrices(c3, c5);
  EXPECT_NEAR(r.msd, 0.04, 1e-15);
  EXPECT_FALSE(r.pearson_r.has_value());
  EXPECT_EQ(r.n_cells, 121u);
}

TEST(Compare, MatchesReferenceFormulas) {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 50; ++k) {
    const auto a = random_matrix(GridSpec::original(), rng), b = random_matrix(GridSpec::original(), rng);
    const auto r = compare_matrices(a, b);
    double sq = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
    EXPECT_NEAR(r.msd, sq / 121.0, 1e-14);
    EXPECT_NEAR(*r.pearson_r, ref_pearson(a.cells(), b.cells()), 1e-10);
  }
}

TEST(Compare, SymmetricAndAffineInvariant) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> slope(0.05, 1.0);
  for (int k = 0; k < 100; ++k) {
    const GridSpec g{0, 4, 0, 6, 1};
    const auto a = random_matrix(g, rng), b = random_matrix(g, rng);
    const auto ab = compare_matrices(a, b), ba = compare_matrices(b, a);
    EXPECT_DOUBLE_EQ(ab.msd, ba.msd);
    EXPECT_NEAR(*ab.pearson_r, *ba.pearson_r, 1e-12);
    // Positive-slope rescaling kept inside [0, 1].
    const double s = slope(rng);
    const double off = (1.0 - s) * std::uniform_real_distribution<double>(0, 1)(rng);
    std::vector<double> scaled(b.cells());
    for (auto& x : scaled) x = s * x + off;
    const auto r = compare_matrices(a, CooperationMatrix(g, scaled));
    EXPECT_NEAR(*r.pearson_r, *ab.pearson_r, 1e-9);
  }
}

TEST(Compare, ShapeMismatchRejected) {
  const CooperationMatrix a(GridSpec::single(0, 5), {0.1});
  const CooperationMatrix b(GridSpec::single(0, 6), {0.1});
  EXPECT_THROW(compare_matrices(a, b), Error);
}

TEST(Region, AveragesAndPartition) {
  const GridSpec g = GridSpec::extended();
  const CooperationMatrix half(g, std::vector<double>(g.size(), 0.5));
  for (const char* name : {"original", "harmony-score", "all"}) EXPECT_EQ(region_average(half, parse_region(name)), 0.5);

  std::mt19937_64 rng(2);
  const auto m = random_matrix(g, rng);
  const Region above = harmony_score_region();
  const Region below{"below", [](Points s, Points t) { return s < t; }};
  const double na = static_cast<double>(region_cells(g, above).size());
  const double nb = static_cast<double>(region_cells(g, below).size());
  EXPECT_EQ(na + nb, 441.0);
  EXPECT_NEAR(region_average(m, all_region()),
              (na * region_average(m, above) + nb * region_average(m, below)) / (na + nb), 1e-12);
  EXPECT_EQ(region_cells(g, original_region()).size(), 121u);
  EXPECT_THROW(region_average(m, Region{"none", [](Points, Points) { return false; }}), Error);
  EXPECT_THROW(parse_region("everywhere"), Error);
}

TEST(Region, NashOriginalAverage) {
  EXPECT_NEAR(region_average(nash_matrix(GridSpec::extended()).matrix, original_region()), 0.5, 1e-12);
}

TEST(Region, CompareAcrossGrids) {
  const auto ext = nash_matrix(GridSpec::extended()).matrix;
  const auto orig = nash_matrix(GridSpec::original()).matrix;
  const auto r = compare_in_region(ext, orig, original_region());
  EXPECT_EQ(r.n_cells, 121u);
  EXPECT_EQ(r.msd, 0.0);
  EXPECT_THROW(compare_in_region(ext, orig, all_region()), Error);
}

TEST(MatrixCsv, BitExactRoundTrip) {
  std::mt19937_64 rng(77);
  for (const GridSpec& g : {GridSpec::original(), GridSpec::extended(), GridSpec{2, 8, 3, 9, 3}}) {
    const auto m = random_matrix(g, rng);
    const auto back = from_csv(to_csv(m));
    EXPECT_EQ(back.grid(), g);
    for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(back[i], m[i]);
    EXPECT_EQ(to_csv(back), to_csv(m));
  }
}

TEST(MatrixCsv, FormatAndRejections) {
  const CooperationMatrix m(GridSpec{0, 1, 5, 5, 1}, {0.25, 1.0});
  EXPECT_EQ(to_csv(m), "S,T,value\n0,5,0.25\n1,5,1\n");
  EXPECT_THROW(from_csv("S,T,v\n0,5,0.25\n"), Error);
  EXPECT_THROW(from_csv("S,T,value\n0,5,1.5\n"), Error);
  EXPECT_THROW(from_csv("S,T,value\n1,5,0.5\n0,5,0.5\n"), Error);
  EXPECT_THROW(from_csv("S,T,value\n0,5,0.5\n0,6,0.5\n0,8,0.5\n"), Error);
  EXPECT_EQ(from_csv("S,T,value\n0,5,0.5\n0,7,0.5\n").grid(), (GridSpec{0, 0, 5, 7, 2}));
  EXPECT_THROW(CooperationMatrix(GridSpec::single(0, 5), {0.1, 0.2}), Error);
}

TEST(Heatmap, TileColorsAndOutline) {
  const GridSpec g = GridSpec::extended();
  const CooperationMatrix zeros(g, std::vector<double>(g.size(), 0.0));
  HeatmapStyle style;
  style.outline_original = true;
  const std::string svg = render_heatmap(zeros, style);
  const std::regex tile_re(R"re(<rect class="tile( outlined)?"[^>]*fill="(#[0-9a-f]{6})")re");
  std::size_t tiles = 0, outlined = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), tile_re); it != std::sregex_iterator(); ++it) {
    ++tiles;
    outlined += (*it)[1].matched;
    EXPECT_EQ((*it)[2].str(), to_hex(style.low));
  }
  EXPECT_EQ(tiles, 441u);
  EXPECT_EQ(outlined, 121u);
  EXPECT_NE(svg.find(">T</text>"), std::string::npos);
  EXPECT_NE(svg.find(">S</text>"), std::string::npos);

  const std::string one = render_heatmap(CooperationMatrix(GridSpec::single(3, 3), {1.0}));
  EXPECT_NE(one.find("fill=\"" + to_hex(HeatmapStyle{}.high) + "\" data-s=\"3\""), std::string::npos);
  EXPECT_EQ(one.find("outlined"), std::string::npos);
}

TEST(Heatmap, ColorScaleEndpointsAndMonotone) {
  const HeatmapStyle s;
  EXPECT_EQ(scale_color(0.0, s), s.low);
  EXPECT_EQ(scale_color(1.0, s), s.high);
  Rgb prev = scale_color(0.0, s);
  for (int k = 1; k <= 100; ++k) {
    const Rgb c = scale_color(k / 100.0, s);
    EXPECT_GE(c.g, prev.g);  // green rises from 0x01 to 0xe7
    prev = c;
  }
  EXPECT_EQ(xml_escape("a<b & \"c\""), "a&lt;b &amp; &quot;c&quot;");
}
