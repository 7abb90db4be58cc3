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

// Similarity rasters in the equirectangular frame, PNG rendering and GeoJSON
// export.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tilescout/grid.hpp"
#include "tilescout/search.hpp"

namespace tilescout::mapview {

struct RasterSpec {
  uint32_t width = 1440;
  uint32_t height = 720;
  void validate() const;
  bool operator==(const RasterSpec&) const = default;
};

struct Pixel {
  uint32_t x = 0;
  uint32_t y = 0;
  bool operator==(const Pixel&) const = default;
};

/// x = floor((lon + 180) / 360 * width), y = floor((90 - lat) / 180 * height),
/// clamped to the raster. Longitudes are wrapped into [-180, 180) first.
Pixel pixel_of(const RasterSpec& spec, const grid::GeoPoint& p);

enum class Aggregator : uint8_t { kMax, kMean };
std::string_view to_string(Aggregator a);
Aggregator parse_aggregator(std::string_view s);

struct TilePoint {
  grid::GeoPoint center;
  float score = 0.0f;
};

struct SimilarityRaster {
  RasterSpec spec;
  Aggregator aggregator = Aggregator::kMax;
  std::vector<float> score;     // row-major, NaN where count == 0
  std::vector<uint32_t> count;  // row-major

  float score_at(uint32_t x, uint32_t y) const { return score[size_t{y} * spec.width + x]; }
  uint32_t count_at(uint32_t x, uint32_t y) const { return count[size_t{y} * spec.width + x]; }
};

/// Every tile lands in the pixel holding its centre. Mean pixels are summed
/// in float64 in input order, then rounded once.
SimilarityRaster bin_scores(std::span<const TilePoint> tiles, const RasterSpec& spec,
                            Aggregator aggregator = Aggregator::kMax);

/// Every record of `index` with its score, for binning.
std::vector<TilePoint> tile_points(const search::ModelIndex& index,
                                   std::span<const float> scores);

struct ThresholdMask {
  std::vector<grid::GridCell> selected;
  double fraction = 0.0;
  std::string query_id;
};

/// The top_fraction selection over all scored tiles.
ThresholdMask threshold_mask(std::span<const float> scores,
                             std::span<const grid::GridCell> cells, double fraction,
                             std::string query_id = {});

/// Colormap table (version 1), 256 RGB entries.
const std::array<std::array<uint8_t, 3>, 256>& colormap();

/// round(255 * (s - lo) / (hi - lo)); 128 when hi == lo.
uint8_t color_index(float s, float lo, float hi);

enum class Background : uint8_t { kTransparent, kGraticule };
std::string_view to_string(Background b);
Background parse_background(std::string_view s);

/// 8-bit RGBA, non-interlaced, zlib level 9, filter type None. Empty pixels
/// are transparent (or graticule grey on 30 degree lines).
std::vector<uint8_t> render_png(const SimilarityRaster& raster,
                                Background background = Background::kTransparent);

/// Point features at cell centres with {cell_id, score, rank, model_id}.
std::string export_geojson(std::span<const search::ScoredTile> tiles,
                           const grid::GridSpec& spec, std::string_view model_id);

}  // namespace tilescout::mapview
