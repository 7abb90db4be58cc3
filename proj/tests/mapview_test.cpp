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

#include <gtest/gtest.h>
#include <png.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tilescout/error.hpp"

namespace tilescout::mapview {
namespace {

using testing_oracles::fraction_rule;
using testing_oracles::geojson_point_collection_error;

struct Decoded {
  uint32_t width = 0;
  uint32_t height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int interlace = 0;
  std::vector<uint8_t> rgba;

  const uint8_t* px(uint32_t x, uint32_t y) const { return &rgba[(size_t{y} * width + x) * 4]; }
};

Decoded decode(const std::vector<uint8_t>& bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  Decoded d;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    ADD_FAILURE() << "libpng rejected the image: " << image.message;
    return d;
  }
  image.format = PNG_FORMAT_RGBA;
  d.width = image.width;
  d.height = image.height;
  d.rgba.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, d.rgba.data(), 0, nullptr)) {
    ADD_FAILURE() << "libpng decode failed: " << image.message;
  }
  // IHDR fields straight from the bytes.
  auto be32 = [&](size_t o) {
    return uint32_t{bytes[o]} << 24 | uint32_t{bytes[o + 1]} << 16 | uint32_t{bytes[o + 2]} << 8 |
           bytes[o + 3];
  };
  EXPECT_EQ(std::string(bytes.begin() + 12, bytes.begin() + 16), "IHDR");
  EXPECT_EQ(be32(16), d.width);
  EXPECT_EQ(be32(20), d.height);
  d.bit_depth = bytes[24];
  d.color_type = bytes[25];
  d.interlace = bytes[28];
  return d;
}

TEST(PixelOf, Examples) {
  const RasterSpec spec;
  EXPECT_EQ(pixel_of(spec, {0.0, 0.0}), (Pixel{720, 360}));
  EXPECT_EQ(pixel_of(spec, {90.0, -180.0}), (Pixel{0, 0}));
  EXPECT_EQ(pixel_of(spec, {-90.0, 179.999}), (Pixel{1439, 719}));
  EXPECT_EQ(pixel_of(spec, {0.0, 180.0}), pixel_of(spec, {0.0, -180.0}));
  EXPECT_EQ(pixel_of(spec, {-4.0, -63.0}), (Pixel{468, 376}));
}

TEST(PixelOf, CorpusCellsStayInBounds) {
  const grid::GridSpec gspec;
  const RasterSpec spec{720, 360};
  for (int32_t row = grid::row_min(gspec); row <= grid::row_max(gspec); row += 7) {
    const uint32_t cols = grid::cols_in_row(gspec, row);
    for (uint32_t col = 0; col < cols; col += std::max<uint32_t>(1, cols / 50)) {
      const auto c = grid::cell_center(gspec, {row, col});
      const Pixel p = pixel_of(spec, c);
      ASSERT_LT(p.x, spec.width);
      ASSERT_LT(p.y, spec.height);
      EXPECT_EQ(p, pixel_of(spec, grid::cell_center(gspec, {row, col})));
    }
  }
}

TEST(RasterSpec, Validate) {
  EXPECT_NO_THROW((RasterSpec{1, 1}.validate()));
  EXPECT_THROW((RasterSpec{0, 10}.validate()), Error);
  EXPECT_THROW((RasterSpec{10, 0}.validate()), Error);
}

TEST(BinScores, SingleTileAtOrigin) {
  const RasterSpec spec;
  const std::vector<TilePoint> tiles = {{{0.0, 0.0}, 0.37f}};
  const auto r = bin_scores(tiles, spec);
  ASSERT_EQ(r.score.size(), size_t{1440} * 720);
  EXPECT_EQ(r.count_at(720, 360), 1u);
  EXPECT_EQ(r.score_at(720, 360), 0.37f);
  size_t filled = 0;
  for (size_t i = 0; i < r.count.size(); ++i) {
    if (r.count[i] != 0) ++filled;
    EXPECT_EQ(r.count[i] == 0, std::isnan(r.score[i]));
  }
  EXPECT_EQ(filled, 1u);
}

TEST(BinScores, MeanAndMax) {
  const std::vector<TilePoint> tiles = {{{10.01, 20.01}, 0.2f}, {{10.02, 20.02}, 0.8f}};
  const RasterSpec spec;
  const Pixel p = pixel_of(spec, tiles[0].center);
  ASSERT_EQ(p, pixel_of(spec, tiles[1].center));
  EXPECT_EQ(bin_scores(tiles, spec, Aggregator::kMean).score_at(p.x, p.y), 0.5f);
  EXPECT_EQ(bin_scores(tiles, spec, Aggregator::kMax).score_at(p.x, p.y), 0.8f);
  EXPECT_EQ(bin_scores(tiles, spec).aggregator, Aggregator::kMax);
}

TEST(BinScores, ConservationAgainstRebinningOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lat(-90.0, 90.0);
  std::uniform_real_distribution<double> lon(-180.0, 180.0);
  std::uniform_real_distribution<float> score(-1.0f, 1.0f);
  const RasterSpec spec{360, 180};
  std::vector<TilePoint> tiles(10000);
  for (auto& t : tiles) t = {{lat(rng), lon(rng)}, score(rng)};

  // Oracle: per-pixel contributor lists from the projection formula directly.
  std::map<std::pair<uint32_t, uint32_t>, std::vector<float>> groups;
  for (const auto& t : tiles) {
    const double fx = std::floor((t.center.lon + 180.0) / 360.0 * spec.width);
    const double fy = std::floor((90.0 - t.center.lat) / 180.0 * spec.height);
    const auto x = static_cast<uint32_t>(std::clamp(fx, 0.0, spec.width - 1.0));
    const auto y = static_cast<uint32_t>(std::clamp(fy, 0.0, spec.height - 1.0));
    groups[{x, y}].push_back(t.score);
  }

  const auto mean = bin_scores(tiles, spec, Aggregator::kMean);
  const auto max = bin_scores(tiles, spec, Aggregator::kMax);
  uint64_t total = 0;
  for (uint32_t c : mean.count) total += c;
  EXPECT_EQ(total, tiles.size());
  size_t nonempty = 0;
  for (uint32_t y = 0; y < spec.height; ++y) {
    for (uint32_t x = 0; x < spec.width; ++x) {
      const auto it = groups.find({x, y});
      if (it == groups.end()) {
        EXPECT_EQ(mean.count_at(x, y), 0u);
        EXPECT_TRUE(std::isnan(mean.score_at(x, y)));
        continue;
      }
      ++nonempty;
      const auto& g = it->second;
      ASSERT_EQ(mean.count_at(x, y), g.size());
      ASSERT_EQ(max.count_at(x, y), g.size());
      const auto [lo, hi] = std::minmax_element(g.begin(), g.end());
      EXPECT_EQ(max.score_at(x, y), *hi);
      const float m = mean.score_at(x, y);
      EXPECT_GE(m, *lo);
      EXPECT_LE(m, *hi);
      long double sum = 0;
      for (float s : g) sum += s;
      EXPECT_NEAR(m, static_cast<double>(sum / g.size()), 1e-6);
    }
  }
  EXPECT_EQ(nonempty, groups.size());
}

TEST(ThresholdMask, MatchesSearchSelection) {
  const auto registry = models::Registry::defaults();
  const auto& model = registry.at("satclip");
  const auto records = testing_util::random_records(model, 1000, 3);
  const auto index = search::ModelIndex::from_records(records);
  const auto q = search::make_query(model, records[17].to_float32());
  const auto scores = search::score_all(index, q);
  const auto cells = index.cells();

  const auto mask = threshold_mask(scores, cells, 0.025, "q1");
  EXPECT_EQ(mask.selected.size(), 25u);
  EXPECT_EQ(mask.query_id, "q1");
  const auto top = search::top_fraction(index, q, 0.025);
  ASSERT_EQ(top.size(), mask.selected.size());
  for (size_t i = 0; i < top.size(); ++i) EXPECT_EQ(top[i].cell, mask.selected[i]);

  EXPECT_EQ(threshold_mask(scores, cells, 1.0).selected.size(), 1000u);
  for (double f : {0.0001, 0.001, 0.01, 0.1, 0.33, 0.5}) {
    EXPECT_EQ(threshold_mask(scores, cells, f).selected.size(), fraction_rule(1000, f)) << f;
  }
}

TEST(Colormap, ShippedTableMatchesDataFile) {
  std::ifstream in(TILESCOUT_COLORMAP_FILE);
  ASSERT_TRUE(in) << TILESCOUT_COLORMAP_FILE;
  std::string line;
  size_t i = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int r, g, b;
    ss >> r >> g >> b;
    ASSERT_LT(i, 256u);
    EXPECT_EQ(colormap()[i], (std::array<uint8_t, 3>{uint8_t(r), uint8_t(g), uint8_t(b)})) << i;
    ++i;
  }
  EXPECT_EQ(i, 256u);
}

TEST(Colormap, IndexRule) {
  EXPECT_EQ(color_index(0.0f, 0.0f, 1.0f), 0);
  EXPECT_EQ(color_index(1.0f, 0.0f, 1.0f), 255);
  EXPECT_EQ(color_index(0.5f, 0.0f, 1.0f), 128);
  EXPECT_EQ(color_index(0.3f, 0.3f, 0.3f), 128);
  EXPECT_EQ(color_index(-0.5f, -1.0f, 1.0f), 64);
}

TEST(RenderPng, EmptyRasterIsTransparent) {
  const RasterSpec spec{64, 32};
  const auto png = render_png(bin_scores({}, spec));
  const auto d = decode(png);
  EXPECT_EQ(d.width, 64u);
  EXPECT_EQ(d.height, 32u);
  EXPECT_EQ(d.bit_depth, 8);
  EXPECT_EQ(d.color_type, 6);  // RGBA
  EXPECT_EQ(d.interlace, 0);
  for (size_t i = 3; i < d.rgba.size(); i += 4) ASSERT_EQ(d.rgba[i], 0) << i;
}

TEST(RenderPng, ExtremesUseFirstAndLastEntries) {
  const RasterSpec spec{2, 1};
  const std::vector<TilePoint> tiles = {{{0.0, -90.0}, 0.0f}, {{0.0, 90.0}, 1.0f}};
  const auto r = bin_scores(tiles, spec);
  const auto d = decode(render_png(r));
  const auto& lo = colormap().front();
  const auto& hi = colormap().back();
  EXPECT_EQ(std::vector<uint8_t>(d.px(0, 0), d.px(0, 0) + 4),
            (std::vector<uint8_t>{lo[0], lo[1], lo[2], 255}));
  EXPECT_EQ(std::vector<uint8_t>(d.px(1, 0), d.px(1, 0) + 4),
            (std::vector<uint8_t>{hi[0], hi[1], hi[2], 255}));
}

TEST(RenderPng, EqualScoresUseMidTable) {
  const std::vector<TilePoint> tiles = {{{10.0, 10.0}, 0.4f}, {{-40.0, 100.0}, 0.4f}};
  const RasterSpec spec{36, 18};
  const auto d = decode(render_png(bin_scores(tiles, spec)));
  const auto p = pixel_of(spec, tiles[1].center);
  const auto& mid = colormap()[128];
  EXPECT_EQ(std::vector<uint8_t>(d.px(p.x, p.y), d.px(p.x, p.y) + 4),
            (std::vector<uint8_t>{mid[0], mid[1], mid[2], 255}));
}

TEST(RenderPng, GraticuleOnlyTouchesEmptyPixels) {
  const RasterSpec spec{360, 180};
  const std::vector<TilePoint> tiles = {{{0.5, 0.5}, 1.0f}, {{0.5, 30.5}, 0.0f}};
  const auto r = bin_scores(tiles, spec);
  const auto d = decode(render_png(r, Background::kGraticule));
  const Pixel meridian = pixel_of(spec, {45.0, 30.0});
  EXPECT_GT(d.px(meridian.x, meridian.y)[3], 0);
  EXPECT_LT(d.px(meridian.x, meridian.y)[3], 255);
  EXPECT_EQ(d.px(15, 15)[3], 0);
  const Pixel scored = pixel_of(spec, tiles[1].center);
  EXPECT_EQ(d.px(scored.x, scored.y)[3], 255);
}

TEST(RenderPng, DeterministicBytes) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<TilePoint> tiles(5000);
  for (auto& t : tiles) {
    t = {{u(rng) * 180 - 90, u(rng) * 360 - 180}, static_cast<float>(u(rng))};
  }
  const RasterSpec spec;
  const auto a = render_png(bin_scores(tiles, spec));
  const auto b = render_png(bin_scores(tiles, spec));
  EXPECT_EQ(a, b);
  const auto d = decode(a);
  EXPECT_EQ(d.width, 1440u);
  EXPECT_EQ(d.height, 720u);
}

TEST(ExportGeojson, Empty) {
  EXPECT_EQ(export_geojson({}, grid::GridSpec{}, "farslip"),
            R"({"type":"FeatureCollection","features":[]})");
}

TEST(ExportGeojson, OneTile) {
  const grid::GridSpec spec;
  const search::ScoredTile t{{400, 42}, 0.75f, 1};
  const auto j = nlohmann::json::parse(export_geojson({&t, 1}, spec, "dinov2"));
  EXPECT_EQ(geojson_point_collection_error(j), "");
  ASSERT_EQ(j["features"].size(), 1u);
  const auto& f = j["features"][0];
  const auto c = grid::cell_center(spec, t.cell);
  EXPECT_EQ(f["geometry"]["coordinates"][0].get<double>(), c.lon);
  EXPECT_EQ(f["geometry"]["coordinates"][1].get<double>(), c.lat);
  EXPECT_EQ(f["properties"]["cell_id"], "R400C42");
  EXPECT_EQ(f["properties"]["score"].get<float>(), 0.75f);
  EXPECT_EQ(f["properties"]["rank"], 1);
  EXPECT_EQ(f["properties"]["model_id"], "dinov2");
}

TEST(ExportGeojson, TopFiveValidates) {
  const auto registry = models::Registry::defaults();
  const auto& model = registry.at("farslip");
  const auto records = testing_util::random_records(model, 500, 9, 20000);
  const auto index = search::ModelIndex::from_records(records);
  const auto q = search::make_query(model, records[3].to_float32());
  const auto top = search::top_k(index, q, 5);
  const auto j = nlohmann::json::parse(export_geojson(top, grid::GridSpec{}, model.id));
  EXPECT_EQ(geojson_point_collection_error(j), "");
  ASSERT_EQ(j["features"].size(), 5u);
  for (size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(j["features"][i]["properties"]["rank"], i + 1);
    EXPECT_EQ(j["features"][i]["properties"]["cell_id"], grid::cell_id_string(top[i].cell));
  }
}

}  // namespace
}  // namespace tilescout::mapview
