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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include "tilescout/error.hpp"

namespace tilescout::grid {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

int64_t floor_mod(int64_t x, int64_t m) {
  const int64_t r = x % m;
  return r < 0 ? r + m : r;
}

// Band index counted from the south pole, in [0, rows_total).
int64_t band_of_row(const GridSpec& spec, int32_t row) {
  return static_cast<int64_t>(row) - row_min(spec);
}

double band_south(const GridSpec& spec, int64_t band) {
  return -90.0 + static_cast<double>(band) * row_height_deg(spec);
}

void check_row(const GridSpec& spec, int32_t row) {
  if (row < row_min(spec) || row > row_max(spec)) {
    throw Error(ErrorCode::kInvalidArgument,
                "row " + std::to_string(row) + " outside [" +
                    std::to_string(row_min(spec)) + ", " +
                    std::to_string(row_max(spec)) + "]");
  }
}

[[noreturn]] void parse_fail(std::string_view text, std::string_view token) {
  throw Error(ErrorCode::kParseError, "malformed cell id '" +
                                          std::string(text) + "': bad token '" +
                                          std::string(token) + "'");
}

}  // namespace

void GridSpec::validate() const {
  if (!(cell_size_km > 0.0) || !std::isfinite(cell_size_km)) {
    throw Error(ErrorCode::kInvalidArgument, "cell_size_km must be positive");
  }
  if (!(earth_radius_km > 0.0) || !std::isfinite(earth_radius_km)) {
    throw Error(ErrorCode::kInvalidArgument, "earth_radius_km must be positive");
  }
  if (subsample_stride < 1) {
    throw Error(ErrorCode::kInvalidArgument, "subsample_stride must be >= 1");
  }
  if (row_offset < 0 || row_offset >= subsample_stride || col_offset < 0 ||
      col_offset >= subsample_stride) {
    throw Error(ErrorCode::kInvalidArgument,
                "subsample anchor must lie in [0, stride)");
  }
  if (uniform_cols < 0) {
    throw Error(ErrorCode::kInvalidArgument, "uniform_cols must be >= 0");
  }
}

int64_t rows_total(const GridSpec& spec) {
  const double n =
      std::ceil(std::numbers::pi * spec.earth_radius_km / spec.cell_size_km);
  return std::max<int64_t>(1, static_cast<int64_t>(n));
}

int32_t row_min(const GridSpec& spec) {
  return -static_cast<int32_t>(rows_total(spec) / 2);
}

int32_t row_max(const GridSpec& spec) {
  return static_cast<int32_t>(rows_total(spec) - 1) + row_min(spec);
}

double row_height_deg(const GridSpec& spec) {
  return 180.0 / static_cast<double>(rows_total(spec));
}

double row_mid_lat(const GridSpec& spec, int32_t row) {
  check_row(spec, row);
  return band_south(spec, band_of_row(spec, row)) + 0.5 * row_height_deg(spec);
}

uint32_t cols_in_row(const GridSpec& spec, int32_t row) {
  const double mid = row_mid_lat(spec, row);
  if (spec.uniform_cols > 0) return static_cast<uint32_t>(spec.uniform_cols);
  const double circumference =
      2.0 * std::numbers::pi * spec.earth_radius_km * std::cos(mid * kDegToRad);
  const double cols = std::round(circumference / spec.cell_size_km);
  return static_cast<uint32_t>(std::max(1.0, cols));
}

bool is_valid(const GridSpec& spec, const GridCell& cell) {
  if (cell.row < row_min(spec) || cell.row > row_max(spec)) return false;
  return cell.col < cols_in_row(spec, cell.row);
}

GeoPoint normalize(GeoPoint p) {
  p.lat = std::clamp(p.lat, -90.0, 90.0);
  double lon = std::fmod(p.lon + 180.0, 360.0);
  if (lon < 0.0) lon += 360.0;
  lon -= 180.0;
  // fmod can land exactly on +180 after the shift for tiny negatives.
  if (lon >= 180.0) lon -= 360.0;
  p.lon = lon;
  return p;
}

CellBounds cell_bounds(const GridSpec& spec, const GridCell& cell) {
  if (!is_valid(spec, cell)) {
    throw Error(ErrorCode::kInvalidArgument,
                "invalid cell " + cell_id_string(cell));
  }
  const int64_t band = band_of_row(spec, cell.row);
  const int64_t rows = rows_total(spec);
  const double width = 360.0 / cols_in_row(spec, cell.row);
  CellBounds b{};
  b.lat_south = band_south(spec, band);
  b.lat_north = band + 1 == rows ? 90.0 : band_south(spec, band + 1);
  b.lon_west = -180.0 + width * cell.col;
  b.lon_east = cell.col + 1 == cols_in_row(spec, cell.row)
                   ? 180.0
                   : -180.0 + width * (cell.col + 1);
  return b;
}

GridCell cell_of(const GridSpec& spec, GeoPoint p) {
  p = normalize(p);
  const int64_t rows = rows_total(spec);
  const double h = row_height_deg(spec);
  int64_t band = static_cast<int64_t>(std::floor((p.lat + 90.0) / h));
  band = std::clamp<int64_t>(band, 0, rows - 1);
  // Correct floating-point drift so the half-open bounds agree with the band.
  if (band > 0 && p.lat < band_south(spec, band)) --band;
  if (band + 1 < rows && p.lat >= band_south(spec, band + 1)) ++band;

  GridCell cell;
  cell.row = static_cast<int32_t>(band + row_min(spec));
  const uint32_t cols = cols_in_row(spec, cell.row);
  const double width = 360.0 / cols;
  int64_t col = static_cast<int64_t>(std::floor((p.lon + 180.0) / width));
  col = std::clamp<int64_t>(col, 0, cols - 1);
  if (col > 0 && p.lon < -180.0 + width * col) --col;
  if (col + 1 < cols && p.lon >= -180.0 + width * (col + 1)) ++col;
  cell.col = static_cast<uint32_t>(col);
  return cell;
}

GeoPoint cell_center(const GridSpec& spec, const GridCell& cell) {
  if (!is_valid(spec, cell)) {
    throw Error(ErrorCode::kInvalidArgument,
                "invalid cell " + cell_id_string(cell));
  }
  const double width = 360.0 / cols_in_row(spec, cell.row);
  return GeoPoint{row_mid_lat(spec, cell.row),
                  -180.0 + width * (static_cast<double>(cell.col) + 0.5)};
}

void for_each_subsampled(const GridSpec& spec,
                         const std::function<void(const GridCell&)>& visit) {
  spec.validate();
  const int64_t stride = spec.subsample_stride;
  for (int32_t row = row_min(spec); row <= row_max(spec); ++row) {
    if (floor_mod(static_cast<int64_t>(row) - spec.row_offset, stride) != 0) {
      continue;
    }
    const uint32_t cols = cols_in_row(spec, row);
    for (uint32_t col = static_cast<uint32_t>(spec.col_offset); col < cols;
         col += static_cast<uint32_t>(stride)) {
      visit(GridCell{row, col});
    }
  }
}

std::vector<GridCell> enumerate_subsampled(const GridSpec& spec) {
  std::vector<GridCell> out;
  for_each_subsampled(spec, [&](const GridCell& c) { out.push_back(c); });
  return out;
}

int64_t total_cells(const GridSpec& spec) {
  int64_t n = 0;
  for (int32_t row = row_min(spec); row <= row_max(spec); ++row) {
    n += cols_in_row(spec, row);
  }
  return n;
}

uint32_t min_row_cols(const GridSpec& spec) {
  uint32_t m = UINT32_MAX;
  for (int32_t row = row_min(spec); row <= row_max(spec); ++row) {
    m = std::min(m, cols_in_row(spec, row));
  }
  return m;
}

std::string cell_id_string(const GridCell& cell) {
  return "R" + std::to_string(cell.row) + "C" + std::to_string(cell.col);
}

GridCell parse_cell_id(std::string_view text) {
  if (text.empty() || text.front() != 'R') {
    parse_fail(text, text.substr(0, 1));
  }
  const size_t c_pos = text.find('C');
  if (c_pos == std::string_view::npos) parse_fail(text, text);
  std::string_view row_tok = text.substr(1, c_pos - 1);
  std::string_view col_tok = text.substr(c_pos + 1);

  std::string_view row_digits = row_tok;
  if (!row_digits.empty() && (row_digits.front() == '-' || row_digits.front() == '+')) {
    row_digits.remove_prefix(1);
  }
  auto all_digits = [](std::string_view s) {
    return !s.empty() &&
           std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
  };
  if (!all_digits(row_digits)) parse_fail(text, row_tok);
  if (!all_digits(col_tok)) parse_fail(text, col_tok);

  GridCell cell;
  int64_t row = 0;
  auto [rp, rec] = std::from_chars(row_digits.data(),
                                   row_digits.data() + row_digits.size(), row);
  if (rec != std::errc() || row > INT32_MAX) parse_fail(text, row_tok);
  cell.row = static_cast<int32_t>(row_tok.front() == '-' ? -row : row);
  auto [cp, cec] =
      std::from_chars(col_tok.data(), col_tok.data() + col_tok.size(), cell.col);
  if (cec != std::errc()) parse_fail(text, col_tok);
  return cell;
}

double great_circle_km(const GeoPoint& a, const GeoPoint& b, double radius_km) {
  const double phi1 = a.lat * kDegToRad;
  const double phi2 = b.lat * kDegToRad;
  const double dphi = phi2 - phi1;
  const double dlambda = (b.lon - a.lon) * kDegToRad;
  const double s = std::sin(dphi / 2) * std::sin(dphi / 2) +
                   std::cos(phi1) * std::cos(phi2) * std::sin(dlambda / 2) *
                       std::sin(dlambda / 2);
  return 2.0 * radius_km * std::asin(std::min(1.0, std::sqrt(s)));
}

double cell_steps(const GridSpec& spec, const GridCell& a, const GridCell& b) {
  const GeoPoint pa = cell_center(spec, a);
  const GeoPoint pb = cell_center(spec, b);
  const double dlon = std::abs(std::remainder(pa.lon - pb.lon, 360.0));
  const double mid = 0.5 * (pa.lat + pb.lat) * kDegToRad;
  const double ew_km = dlon * kDegToRad * spec.earth_radius_km * std::cos(mid);
  const double rows = std::abs(static_cast<double>(a.row) - static_cast<double>(b.row));
  return std::max(rows, ew_km / spec.cell_size_km);
}

GeoPoint destination(const GeoPoint& origin, double bearing_deg,
                     double distance_km, double radius_km) {
  const double delta = distance_km / radius_km;
  const double theta = bearing_deg * kDegToRad;
  const double phi1 = origin.lat * kDegToRad;
  const double lambda1 = origin.lon * kDegToRad;
  const double phi2 = std::asin(std::sin(phi1) * std::cos(delta) +
                                std::cos(phi1) * std::sin(delta) * std::cos(theta));
  const double lambda2 =
      lambda1 + std::atan2(std::sin(theta) * std::sin(delta) * std::cos(phi1),
                           std::cos(delta) - std::sin(phi1) * std::sin(phi2));
  return normalize(GeoPoint{phi2 / kDegToRad, lambda2 / kDegToRad});
}

}  // namespace tilescout::grid
