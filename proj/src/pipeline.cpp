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

#include "tilescout/pipeline.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>

#include "tilescout/error.hpp"

namespace tilescout::pipeline {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
}

std::vector<uint8_t> decode_base64(const std::string& text) {
  if (text.size() % 4 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "image_b64 is not valid base64");
  }
  std::vector<uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw Error(ErrorCode::kInvalidArgument, "image_b64 is not valid base64");
  size_t pad = 0;
  for (auto it = text.rbegin(); it != text.rend() && *it == '=' && pad < 2; ++it) ++pad;
  out.resize(static_cast<size_t>(n) - pad);
  return out;
}

const nlohmann::json* field(const nlohmann::json& j, const nlohmann::json* payload,
                            const char* key) {
  if (payload != nullptr && payload->contains(key)) return &(*payload)[key];
  if (j.contains(key)) return &j[key];
  return nullptr;
}

const nlohmann::json& required(const nlohmann::json& j, const nlohmann::json* payload,
                               const char* key, std::string_view modality) {
  const auto* v = field(j, payload, key);
  if (v == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "modality '" + std::string(modality) +
                                                 "' needs payload field '" + key + "'");
  }
  return *v;
}

}  // namespace

std::shared_ptr<const LoadedCorpus> LoadedCorpus::load(const std::filesystem::path& path,
                                                       const models::Registry& registry,
                                                       const std::vector<std::string>& only) {
  std::shared_ptr<LoadedCorpus> out(new LoadedCorpus(store::Corpus::open(path)));
  const auto& spec = out->grid_spec();
  for (const auto& model_id : out->corpus_.model_ids()) {
    if (registry.find(model_id) == nullptr) continue;
    if (!only.empty() && std::find(only.begin(), only.end(), model_id) == only.end()) continue;
    const auto records = out->corpus_.read_model(model_id);
    if (records.empty()) continue;
    for (const auto& r : records) {
      auto [it, inserted] = out->tiles_.try_emplace(grid::cell_key(r.cell));
      if (inserted) {
        it->second.cell = r.cell;
        it->second.center = grid::cell_center(spec, r.cell);
        it->second.source_product = r.source_product;
      }
      it->second.models_present.push_back(model_id);
    }
    out->indexes_.emplace(model_id, search::ModelIndex::from_records(records));
  }
  return out;
}

const search::ModelIndex* LoadedCorpus::index(std::string_view model_id) const {
  const auto it = indexes_.find(model_id);
  return it == indexes_.end() ? nullptr : &it->second;
}

const TileInfo* LoadedCorpus::tile(const grid::GridCell& cell) const {
  const auto it = tiles_.find(grid::cell_key(cell));
  return it == tiles_.end() ? nullptr : &it->second;
}

std::vector<std::string> LoadedCorpus::model_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : indexes_) out.push_back(id);
  return out;
}

uint64_t LoadedCorpus::record_count() const {
  uint64_t n = 0;
  for (const auto& [_, idx] : indexes_) n += idx.size();
  return n;
}

QueryRequest QueryRequest::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "query must be a JSON object");
  QueryRequest q;
  try {
    if (!j.contains("model_id") || !j["model_id"].is_string()) {
      throw Error(ErrorCode::kInvalidArgument, "query needs a string 'model_id'");
    }
    q.spec.model_id = j["model_id"].get<std::string>();
    const auto modality = j.value("modality", std::string("text"));
    try {
      q.spec.modality = encoder::parse_query_modality(modality);
    } catch (const Error&) {
      throw Error(ErrorCode::kUnsupportedModality, "unknown modality '" + modality + "'");
    }
    const nlohmann::json* payload = nullptr;
    if (j.contains("payload")) {
      if (!j["payload"].is_object()) {
        throw Error(ErrorCode::kInvalidArgument, "'payload' must be an object");
      }
      payload = &j["payload"];
    }
    switch (q.spec.modality) {
      case encoder::QueryModality::kText:
        q.spec.text = required(j, payload, "text", modality).get<std::string>();
        break;
      case encoder::QueryModality::kImageCell:
        q.spec.cell =
            grid::parse_cell_id(required(j, payload, "cell_id", modality).get<std::string>());
        break;
      case encoder::QueryModality::kImageUpload:
        q.spec.image =
            decode_base64(required(j, payload, "image_b64", modality).get<std::string>());
        if (const auto* ct = field(j, payload, "content_type")) {
          q.spec.content_type = ct->get<std::string>();
        }
        break;
      case encoder::QueryModality::kLocation:
        q.spec.point = {required(j, payload, "lat", modality).get<double>(),
                        required(j, payload, "lon", modality).get<double>()};
        break;
      case encoder::QueryModality::kRaw:
        q.spec.raw = required(j, payload, "vector", modality).get<std::vector<float>>();
        break;
    }
    if (j.contains("k")) q.k = j["k"].get<uint64_t>();
    if (j.contains("fraction")) q.fraction = j["fraction"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("malformed query: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError) throw Error(ErrorCode::kInvalidArgument, e.what());
    throw;
  }
  q.validate();
  return q;
}

void QueryRequest::validate() const {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be at least 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "fraction must be in (0, 1]");
  }
  if (spec.modality == encoder::QueryModality::kLocation &&
      !(std::isfinite(spec.point.lat) && std::isfinite(spec.point.lon) &&
        std::abs(spec.point.lat) <= 90.0)) {
    throw Error(ErrorCode::kInvalidArgument, "location must have lat in [-90, 90]");
  }
}

QueryResult run_query(const LoadedCorpus& corpus, const models::Registry& registry,
                      const QueryRequest& request, const PipelineOptions& options,
                      std::string query_id) {
  request.validate();
  const auto start = Clock::now();
  const auto& model = registry.at(request.spec.model_id);
  const auto* index = corpus.index(model.id);
  const auto& grid_spec = corpus.grid_spec();

  QueryResult out;
  out.model_id = model.id;
  const auto q =
      encoder::resolve_query(request.spec, registry, index, grid_spec, options.resolver);
  out.timing.encode_ms = ms_since(start);
  if (index == nullptr || index->empty()) {
    throw Error(ErrorCode::kEmptyCorpus, "corpus holds no records for model '" + model.id + "'");
  }

  const auto search_start = Clock::now();
  const auto scores = search::score_all(*index, q, options.scan);
  out.corpus_size = index->size();
  out.results = search::select_top(scores, index->cells(), request.k);
  out.mask = mapview::threshold_mask(scores, index->cells(), request.fraction, query_id);
  out.timing.search_ms = ms_since(search_start);

  const auto render_start = Clock::now();
  if (options.render_map) {
    const auto tiles = mapview::tile_points(*index, scores);
    out.map_png = mapview::render_png(
        mapview::bin_scores(tiles, options.raster, options.aggregator), options.background);
  }
  out.geojson = mapview::export_geojson(out.results, grid_spec, model.id);
  out.timing.render_ms = ms_since(render_start);
  out.timing.total_ms = ms_since(start);
  return out;
}

nlohmann::json results_json(const std::vector<search::ScoredTile>& results,
                            const grid::GridSpec& spec) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& t : results) {
    const auto c = grid::cell_center(spec, t.cell);
    arr.push_back({{"cell_id", grid::cell_id_string(t.cell)},
                   {"lat", c.lat},
                   {"lon", c.lon},
                   {"score", t.score},
                   {"rank", t.rank}});
  }
  return arr;
}

}  // namespace tilescout::pipeline
