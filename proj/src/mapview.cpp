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

#include "tilescout/mapview.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <limits>

#include <nlohmann/json.hpp>

#include "tilescout/error.hpp"

namespace tilescout::mapview {
namespace {

constexpr std::array<std::array<uint8_t, 3>, 256> kColormap = {{
#include "colormap_table.inc"
}};

constexpr std::array<uint8_t, 4> kGraticule = {160, 160, 160, 110};

void write_to_vector(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

std::vector<uint8_t> encode_rgba(uint32_t width, uint32_t height,
                                 const std::vector<uint8_t>& rgba) {
  std::vector<uint8_t> out;
  std::vector<png_bytep> rows(height);
  for (uint32_t y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(rgba.data() + size_t{y} * width * 4);
  }
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (png == nullptr) throw Error(ErrorCode::kIoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (info == nullptr || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::kIoError, "PNG encoding failed");
  }
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_compression_level(png, 9);
  png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
  png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_BASE, PNG_FILTER_TYPE_BASE);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

void RasterSpec::validate() const {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kInvalidArgument, "raster dimensions must be at least 1x1");
  }
}

Pixel pixel_of(const RasterSpec& spec, const grid::GeoPoint& p) {
  double lon = std::fmod(p.lon + 180.0, 360.0);
  if (lon < 0) lon += 360.0;
  const double fx = std::floor(lon / 360.0 * spec.width);
  const double fy = std::floor((90.0 - p.lat) / 180.0 * spec.height);
  const auto clamp = [](double v, uint32_t n) {
    return static_cast<uint32_t>(std::clamp(v, 0.0, static_cast<double>(n - 1)));
  };
  return {clamp(fx, spec.width), clamp(fy, spec.height)};
}

std::string_view to_string(Aggregator a) { return a == Aggregator::kMax ? "max" : "mean"; }

Aggregator parse_aggregator(std::string_view s) {
  if (s == "max") return Aggregator::kMax;
  if (s == "mean") return Aggregator::kMean;
  throw Error(ErrorCode::kInvalidArgument, "unknown aggregator '" + std::string(s) + "'");
}

SimilarityRaster bin_scores(std::span<const TilePoint> tiles, const RasterSpec& spec,
                            Aggregator aggregator) {
  spec.validate();
  const size_t n = size_t{spec.width} * spec.height;
  SimilarityRaster r;
  r.spec = spec;
  r.aggregator = aggregator;
  r.count.assign(n, 0);
  std::vector<double> acc(n, aggregator == Aggregator::kMax
                                 ? -std::numeric_limits<double>::infinity()
                                 : 0.0);
  for (const auto& t : tiles) {
    const Pixel px = pixel_of(spec, t.center);
    const size_t i = size_t{px.y} * spec.width + px.x;
    ++r.count[i];
    if (aggregator == Aggregator::kMax) {
      acc[i] = std::max(acc[i], static_cast<double>(t.score));
    } else {
      acc[i] += t.score;
    }
  }
  r.score.assign(n, std::numeric_limits<float>::quiet_NaN());
  for (size_t i = 0; i < n; ++i) {
    if (r.count[i] == 0) continue;
    r.score[i] = static_cast<float>(aggregator == Aggregator::kMax ? acc[i] : acc[i] / r.count[i]);
  }
  return r;
}

std::vector<TilePoint> tile_points(const search::ModelIndex& index,
                                   std::span<const float> scores) {
  if (scores.size() != index.size()) {
    throw Error(ErrorCode::kInvalidArgument, "score count does not match index size");
  }
  std::vector<TilePoint> out(index.size());
  for (size_t i = 0; i < index.size(); ++i) out[i] = {index.center(i), scores[i]};
  return out;
}

ThresholdMask threshold_mask(std::span<const float> scores,
                             std::span<const grid::GridCell> cells, double fraction,
                             std::string query_id) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyCorpus, "no scored tiles to threshold");
  const auto top = search::select_top(scores, cells, search::fraction_count(scores.size(), fraction));
  ThresholdMask m;
  m.fraction = fraction;
  m.query_id = std::move(query_id);
  m.selected.reserve(top.size());
  for (const auto& t : top) m.selected.push_back(t.cell);
  return m;
}

const std::array<std::array<uint8_t, 3>, 256>& colormap() { return kColormap; }

uint8_t color_index(float s, float lo, float hi) {
  if (!(hi > lo)) return 128;
  const double t = (static_cast<double>(s) - lo) / (static_cast<double>(hi) - lo);
  return static_cast<uint8_t>(std::clamp(std::round(t * 255.0), 0.0, 255.0));
}

std::string_view to_string(Background b) {
  return b == Background::kTransparent ? "transparent" : "graticule";
}

Background parse_background(std::string_view s) {
  if (s == "transparent") return Background::kTransparent;
  if (s == "graticule") return Background::kGraticule;
  throw Error(ErrorCode::kInvalidArgument, "unknown background '" + std::string(s) + "'");
}

std::vector<uint8_t> render_png(const SimilarityRaster& raster, Background background) {
  raster.spec.validate();
  const uint32_t w = raster.spec.width;
  const uint32_t h = raster.spec.height;
  float lo = std::numeric_limits<float>::infinity();
  float hi = -std::numeric_limits<float>::infinity();
  for (float s : raster.score) {
    if (std::isnan(s)) continue;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  std::vector<uint8_t> rgba(size_t{w} * h * 4, 0);
  if (background == Background::kGraticule) {
    auto paint = [&](uint32_t x, uint32_t y) {
      std::copy(kGraticule.begin(), kGraticule.end(), rgba.begin() + (size_t{y} * w + x) * 4);
    };
    for (int lon = -180; lon < 180; lon += 30) {
      const uint32_t x = pixel_of(raster.spec, {0.0, static_cast<double>(lon)}).x;
      for (uint32_t y = 0; y < h; ++y) paint(x, y);
    }
    for (int lat = 90; lat >= -90; lat -= 30) {
      const uint32_t y = pixel_of(raster.spec, {static_cast<double>(lat), 0.0}).y;
      for (uint32_t x = 0; x < w; ++x) paint(x, y);
    }
  }
  for (size_t i = 0; i < raster.score.size(); ++i) {
    const float s = raster.score[i];
    if (std::isnan(s)) continue;
    const auto& c = kColormap[color_index(s, lo, hi)];
    rgba[i * 4 + 0] = c[0];
    rgba[i * 4 + 1] = c[1];
    rgba[i * 4 + 2] = c[2];
    rgba[i * 4 + 3] = 255;
  }
  return encode_rgba(w, h, rgba);
}

std::string export_geojson(std::span<const search::ScoredTile> tiles,
                           const grid::GridSpec& spec, std::string_view model_id) {
  nlohmann::ordered_json features = nlohmann::ordered_json::array();
  for (const auto& t : tiles) {
    const auto c = grid::cell_center(spec, t.cell);
    nlohmann::ordered_json f;
    f["type"] = "Feature";
    f["geometry"] = {{"type", "Point"}, {"coordinates", {c.lon, c.lat}}};
    f["properties"] = {{"cell_id", grid::cell_id_string(t.cell)},
                       {"score", t.score},
                       {"rank", t.rank},
                       {"model_id", std::string(model_id)}};
    features.push_back(std::move(f));
  }
  nlohmann::ordered_json fc;
  fc["type"] = "FeatureCollection";
  fc["features"] = std::move(features);
  return fc.dump();
}

}  // namespace tilescout::mapview
