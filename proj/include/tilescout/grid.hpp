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

#pragma once

// Global equal-latitude-band grid with per-row column counts chosen so that
// cells stay roughly square (~cell_size_km on a side).
//
// Rows are numbered from the south pole band upward and then shifted so that
// row 0 is the band whose south edge is the equator (even row count) or the
// band centered on the equator (odd row count). Columns count eastward from
// longitude -180. All intervals are half-open: a point on a boundary belongs
// to the cell to its north / east.

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace tilescout::grid {

struct GridSpec {
  double cell_size_km = 10.0;
  double earth_radius_km = 6378.137;
  int subsample_stride = 3;
  int row_offset = 0;
  int col_offset = 0;
  // When > 0, every row has exactly this many columns instead of the
  // latitude-dependent count. Used for toy grids.
  int uniform_cols = 0;

  /// Throws Error(kInvalidArgument) when a field is out of range.
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

struct GridCell {
  int32_t row = 0;
  uint32_t col = 0;

  auto operator<=>(const GridCell&) const = default;
};

struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
};

struct CellBounds {
  double lat_south;
  double lat_north;
  double lon_west;
  double lon_east;

  /// Half-open containment.
  bool contains(const GeoPoint& p) const {
    return p.lat >= lat_south && p.lat < lat_north && p.lon >= lon_west &&
           p.lon < lon_east;
  }
};

int64_t rows_total(const GridSpec& spec);
int32_t row_min(const GridSpec& spec);
int32_t row_max(const GridSpec& spec);

/// Band height in degrees (180 / rows_total).
double row_height_deg(const GridSpec& spec);

/// Latitude of the midpoint of a row's band.
double row_mid_lat(const GridSpec& spec, int32_t row);

uint32_t cols_in_row(const GridSpec& spec, int32_t row);

bool is_valid(const GridSpec& spec, const GridCell& cell);

/// Wraps longitude into [-180, 180) and clamps latitude into [-90, 90].
GeoPoint normalize(GeoPoint p);

GridCell cell_of(const GridSpec& spec, GeoPoint p);
GeoPoint cell_center(const GridSpec& spec, const GridCell& cell);
CellBounds cell_bounds(const GridSpec& spec, const GridCell& cell);

/// Calls `visit` for every cell kept by the stride/anchor subsample, ordered
/// by (row asc, col asc).
void for_each_subsampled(const GridSpec& spec,
                         const std::function<void(const GridCell&)>& visit);
std::vector<GridCell> enumerate_subsampled(const GridSpec& spec);

/// Number of cells on the full grid (no subsampling).
int64_t total_cells(const GridSpec& spec);

/// Smallest per-row column count over all rows.
uint32_t min_row_cols(const GridSpec& spec);

std::string cell_id_string(const GridCell& cell);

/// Parses the canonical "R{row}C{col}" form; throws Error(kParseError).
GridCell parse_cell_id(std::string_view text);

/// Spherical great-circle distance in km (haversine).
double great_circle_km(const GeoPoint& a, const GeoPoint& b,
                       double radius_km = 6378.137);

/// Separation of two cells in cell units: the larger of the row difference
/// and the east-west ground distance between centres divided by the cell
/// size. Column indices are not comparable across rows, so they are not used.
double cell_steps(const GridSpec& spec, const GridCell& a, const GridCell& b);

/// Point reached by travelling `distance_km` from `origin` at `bearing_deg`
/// (clockwise from north) along a great circle.
GeoPoint destination(const GeoPoint& origin, double bearing_deg,
                     double distance_km, double radius_km = 6378.137);

/// Packs a cell into one sortable 64-bit key.
inline uint64_t cell_key(const GridCell& c) {
  return (static_cast<uint64_t>(static_cast<uint32_t>(c.row) ^ 0x80000000u)
          << 32) |
         c.col;
}

}  // namespace tilescout::grid
