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

// One query end to end: resolve, rank, threshold, bin, render, export.
// Shared by the CLI and the HTTP service.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tilescout/encoder.hpp"
#include "tilescout/mapview.hpp"
#include "tilescout/models.hpp"
#include "tilescout/search.hpp"
#include "tilescout/store.hpp"

namespace tilescout::pipeline {

struct TileInfo {
  grid::GridCell cell;
  grid::GeoPoint center;
  std::vector<std::string> models_present;
  std::string source_product;
};

/// An opened corpus with one in-memory index per model. Immutable after
/// load, so it can be shared between threads.
class LoadedCorpus {
 public:
  /// Reads every model of the corpus found in `registry` (restricted to
  /// `only` when it is non-empty); shards of other models are skipped.
  static std::shared_ptr<const LoadedCorpus> load(const std::filesystem::path& path,
                                                  const models::Registry& registry,
                                                  const std::vector<std::string>& only = {});

  const store::Corpus& corpus() const { return corpus_; }
  const grid::GridSpec& grid_spec() const { return corpus_.manifest().grid_spec; }
  /// Null when the corpus holds no records for `model_id`.
  const search::ModelIndex* index(std::string_view model_id) const;
  const TileInfo* tile(const grid::GridCell& cell) const;
  std::vector<std::string> model_ids() const;
  uint64_t cell_count() const { return tiles_.size(); }
  uint64_t record_count() const;

 private:
  explicit LoadedCorpus(store::Corpus corpus) : corpus_(std::move(corpus)) {}

  store::Corpus corpus_;
  std::map<std::string, search::ModelIndex, std::less<>> indexes_;
  std::unordered_map<uint64_t, TileInfo> tiles_;
};

struct QueryRequest {
  encoder::QuerySpec spec;
  uint64_t k = 5;
  double fraction = 0.025;

  /// {"model_id", "modality", "payload": {...}, "k", "fraction"}. Payload
  /// keys: text | cell_id | lat, lon | vector | image_b64, content_type.
  /// Payload keys may also sit at the top level. Throws Error(kInvalidArgument).
  static QueryRequest from_json(const nlohmann::json& j);
  void validate() const;
};

struct PipelineOptions {
  encoder::ResolverConfig resolver;
  mapview::RasterSpec raster;
  mapview::Aggregator aggregator = mapview::Aggregator::kMax;
  mapview::Background background = mapview::Background::kTransparent;
  search::ScanOptions scan;
  bool render_map = true;
};

struct Timing {
  double encode_ms = 0;
  double search_ms = 0;
  double render_ms = 0;
  double total_ms = 0;
};

struct QueryResult {
  std::string model_id;
  std::vector<search::ScoredTile> results;
  mapview::ThresholdMask mask;
  uint64_t corpus_size = 0;
  std::vector<uint8_t> map_png;  // empty unless render_map
  std::string geojson;
  Timing timing;
};

QueryResult run_query(const LoadedCorpus& corpus, const models::Registry& registry,
                      const QueryRequest& request, const PipelineOptions& options,
                      std::string query_id = {});

/// [{cell_id, lat, lon, score, rank}, ...] with cell-centre coordinates.
nlohmann::json results_json(const std::vector<search::ScoredTile>& results,
                            const grid::GridSpec& spec);

}  // namespace tilescout::pipeline
