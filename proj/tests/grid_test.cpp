// Copyright 2026 The tilescout Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "tilescout/grid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "tilescout/error.hpp"

namespace tilescout::grid {
namespace {

// Values frozen from an arbitrary-precision (50-digit) evaluation of
// ceil(pi*R/D) and round(2*pi*R*cos(phi_mid)/D) for R = 6378.137, D = 10.
constexpr int64_t kDefaultRows = 2004;
constexpr uint32_t kEquatorRowCols = 4008;
constexpr uint32_t kPoleRowCols = 3;
// Brute-force enumeration of every cell of the default grid.
constexpr int64_t kDefaultTotalCells = 5112696;
constexpr int64_t kDefaultSubsampled = 568297;

GridSpec toy_9x9() {
  GridSpec s;
  s.earth_radius_km = 9.0;
  s.cell_size_km = std::numbers::pi;
  s.uniform_cols = 9;
  return s;
}

TEST(GridRows, DefaultSpecHas2004Rows) {
  GridSpec spec;
  EXPECT_EQ(rows_total(spec), kDefaultRows);
  EXPECT_NEAR(row_height_deg(spec), 180.0 / 2004.0, 1e-15);
  EXPECT_NEAR(row_height_deg(spec), 0.0898, 1e-4);
  EXPECT_EQ(row_min(spec), -1002);
  EXPECT_EQ(row_max(spec), 1001);
}

TEST(GridRows, WholeMeridianInOneBand) {
  GridSpec spec;
  spec.cell_size_km = std::numbers::pi * spec.earth_radius_km;
  EXPECT_EQ(rows_total(spec), 1);
  EXPECT_EQ(row_min(spec), 0);
  EXPECT_EQ(row_max(spec), 0);
  EXPECT_DOUBLE_EQ(row_mid_lat(spec, 0), 0.0);
}

TEST(GridRows, OddRowCountCentersRowZeroOnEquator) {
  const GridSpec spec = toy_9x9();
  ASSERT_EQ(rows_total(spec), 9);
  EXPECT_EQ(row_min(spec), -4);
  EXPECT_EQ(row_max(spec), 4);
  EXPECT_NEAR(row_mid_lat(spec, 0), 0.0, 1e-12);
}

TEST(GridCols, EquatorAndPoleRows) {
  GridSpec spec;
  EXPECT_NEAR(row_mid_lat(spec, 0), 0.5 * 180.0 / 2004.0, 1e-12);
  EXPECT_EQ(cols_in_row(spec, 0), kEquatorRowCols);
  EXPECT_EQ(cols_in_row(spec, row_max(spec)), kPoleRowCols);
  EXPECT_EQ(cols_in_row(spec, row_min(spec)), kPoleRowCols);
}

TEST(GridCols, MatchesFormulaOracleOnEveryRow) {
  GridSpec spec;
  const long double pi = std::numbers::pi_v<long double>;
  const long double h = 180.0L / kDefaultRows;
  for (int32_t row = row_min(spec); row <= row_max(spec); ++row) {
    const long double mid = -90.0L + (row - row_min(spec)) * h + h / 2;
    const long double raw = 2 * pi * 6378.137L * std::cos(mid * pi / 180.0L) / 10.0L;
    const long double expected = std::max(1.0L, std::floor(raw + 0.5L));
    ASSERT_EQ(cols_in_row(spec, row), static_cast<uint32_t>(expected)) << "row " << row;
  }
}

TEST(GridCols, EvenSymmetricAboutEquator) {
  GridSpec spec;
  // Even row count: row r mirrors row -r-1.
  for (int32_t row = 0; row <= row_max(spec); ++row) {
    ASSERT_EQ(cols_in_row(spec, row), cols_in_row(spec, -row - 1)) << row;
  }
}

TEST(GridCols, RowOutOfRangeThrows) {
  GridSpec spec;
  EXPECT_THROW(cols_in_row(spec, 1002), Error);
  EXPECT_THROW(cols_in_row(spec, -1003), Error);
}

TEST(GridCellOf, OriginConvention) {
  GridSpec spec;
  EXPECT_EQ(cell_of(spec, {0.0001, -180.0}), (GridCell{0, 0}));
  // Boundary points go north / east.
  EXPECT_EQ(cell_of(spec, {0.0, -180.0}), (GridCell{0, 0}));
  EXPECT_EQ(cell_of(spec, {-0.0001, -180.0}), (GridCell{-1, 0}));
  // Longitude wraps.
  EXPECT_EQ(cell_of(spec, {0.0001, 180.0}), (GridCell{0, 0}));
}

TEST(GridCellOf, TutorialCoordinateContainment) {
  GridSpec spec;
  const GeoPoint q{-4.0, -63.0};
  const GridCell c = cell_of(spec, q);
  ASSERT_TRUE(is_valid(spec, c));
  EXPECT_TRUE(cell_bounds(spec, c).contains(q));
  EXPECT_LE(great_circle_km(cell_center(spec, c), q), spec.cell_size_km * std::sqrt(2.0) / 2);
}

TEST(GridCenter, ArithmeticOnSliceWidth) {
  GridSpec spec;
  spec.uniform_cols = 4;
  const GeoPoint c = cell_center(spec, {0, 0});
  EXPECT_DOUBLE_EQ(c.lon, -135.0);
  EXPECT_NEAR(c.lat, 0.5 * (180.0 / rows_total(spec)), 1e-12);
  EXPECT_THROW(cell_center(spec, {0, 4}), Error);
}

TEST(GridProperties, PartitionOfRandomPoints) {
  GridSpec spec;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-90.0, 90.0);
  std::uniform_real_distribution<double> lon(-180.0, 180.0);
  for (int i = 0; i < 10000; ++i) {
    const GeoPoint p{lat(rng), lon(rng)};
    const GridCell c = cell_of(spec, p);
    ASSERT_TRUE(is_valid(spec, c));
    ASSERT_TRUE(cell_bounds(spec, c).contains(p)) << p.lat << "," << p.lon;
  }
}

TEST(GridProperties, CenterRoundTrip) {
  GridSpec spec;
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int32_t> row(row_min(spec), row_max(spec));
  for (int i = 0; i < 10000; ++i) {
    const int32_t r = row(rng);
    std::uniform_int_distribution<uint32_t> col(0, cols_in_row(spec, r) - 1);
    const GridCell c{r, col(rng)};
    ASSERT_EQ(cell_of(spec, cell_center(spec, c)), c);
  }
}

TEST(GridSubsample, ToyGridKeepsExactlyOneNinth) {
  const GridSpec spec = toy_9x9();
  const auto cells = enumerate_subsampled(spec);
  EXPECT_EQ(cells.size(), 9u);
  EXPECT_EQ(total_cells(spec), 81);
  for (const auto& c : cells) {
    EXPECT_EQ(((c.row % 3) + 3) % 3, 0);
    EXPECT_EQ(c.col % 3, 0u);
  }
}

TEST(GridSubsample, StrideOneIsIdentity) {
  GridSpec spec = toy_9x9();
  spec.subsample_stride = 1;
  EXPECT_EQ(enumerate_subsampled(spec).size(), 81u);
}

TEST(GridSubsample, AnchorSelectsOtherNinth) {
  GridSpec spec = toy_9x9();
  spec.row_offset = 1;
  spec.col_offset = 2;
  const auto cells = enumerate_subsampled(spec);
  EXPECT_EQ(cells.size(), 9u);
  EXPECT_EQ(cells.front(), (GridCell{-2, 2}));
}

TEST(GridSubsample, FullGridMatchesBruteForceFilter) {
  GridSpec spec;
  int64_t all = 0;
  std::vector<GridCell> brute;
  for (int32_t row = row_min(spec); row <= row_max(spec); ++row) {
    for (uint32_t col = 0; col < cols_in_row(spec, row); ++col) {
      ++all;
      if (((row % 3) + 3) % 3 == 0 && col % 3 == 0) brute.push_back({row, col});
    }
  }
  EXPECT_EQ(all, kDefaultTotalCells);
  const auto cells = enumerate_subsampled(spec);
  EXPECT_EQ(static_cast<int64_t>(cells.size()), kDefaultSubsampled);
  EXPECT_EQ(cells, brute);

  const double frac = static_cast<double>(cells.size()) / static_cast<double>(all);
  const double eps = 2.0 * spec.subsample_stride / min_row_cols(spec);
  EXPECT_GE(frac, (1.0 / 9.0) * (1 - eps));
  EXPECT_LE(frac, (1.0 / 9.0) * (1 + eps));
  // The measured fraction is in fact much tighter than the band.
  EXPECT_NEAR(frac, 1.0 / 9.0, 1e-3);
}

TEST(GridSubsample, Deterministic) {
  GridSpec spec;
  EXPECT_EQ(enumerate_subsampled(spec), enumerate_subsampled(spec));
}

TEST(GridSpecValidation, RejectsBadFields) {
  GridSpec s;
  s.cell_size_km = 0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.subsample_stride = 0;
  EXPECT_THROW(s.validate(), Error);
  s = {};
  s.row_offset = 3;
  EXPECT_THROW(s.validate(), Error);
}

TEST(GridCellId, FormatAndParse) {
  EXPECT_EQ(cell_id_string({-45, 1023}), "R-45C1023");
  EXPECT_EQ(parse_cell_id("R0C0"), (GridCell{0, 0}));
  EXPECT_EQ(parse_cell_id("R-45C1023"), (GridCell{-45, 1023}));
  EXPECT_EQ(parse_cell_id("R+7C3"), (GridCell{7, 3}));
}

TEST(GridCellId, MalformedNamesOffendingToken) {
  try {
    parse_cell_id("C3R1");
    FAIL() << "expected parse error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kParseError);
    EXPECT_NE(std::string(e.what()).find("'C'"), std::string::npos) << e.what();
  }
  for (const char* bad : {"", "R", "RC", "R1C", "R1Cx", "R-C1", "R1 C1", "r1c1", "R1C-1"}) {
    EXPECT_THROW(parse_cell_id(bad), Error) << bad;
  }
}

TEST(GridCellId, RoundTripProperty) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int32_t> row(-100000, 100000);
  std::uniform_int_distribution<uint32_t> col(0, 1u << 30);
  for (int i = 0; i < 2000; ++i) {
    const GridCell c{row(rng), col(rng)};
    const std::string id = cell_id_string(c);
    ASSERT_EQ(parse_cell_id(id), c);
    ASSERT_EQ(cell_id_string(parse_cell_id(id)), id);
  }
}

TEST(GreatCircle, KnownDistancesAndDestination) {
  EXPECT_NEAR(great_circle_km({0, 0}, {0, 90}), std::numbers::pi / 2 * 6378.137, 1e-6);
  const GeoPoint start{-4.0, -63.0};
  for (double bearing : {0.0, 45.0, 170.0, 300.0}) {
    const GeoPoint end = destination(start, bearing, 123.0);
    EXPECT_NEAR(great_circle_km(start, end), 123.0, 1e-6);
  }
}

}  // namespace
}  // namespace tilescout::grid
