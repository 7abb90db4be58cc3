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

#include "tilescout/encoder.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "tilescout/error.hpp"

namespace tilescout::encoder {

uint64_t fnv1a64(std::span<const uint8_t> bytes, uint64_t hash) {
  for (uint8_t b : bytes) {
    hash ^= b;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

uint64_t SplitMix64::next() {
  uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double SplitMix64::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

void SplitMix64::normals(std::span<float> out) {
  for (size_t i = 0; i < out.size(); i += 2) {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    out[i] = static_cast<float>(r * std::cos(theta));
    if (i + 1 < out.size()) out[i + 1] = static_cast<float>(r * std::sin(theta));
  }
}

uint64_t prompt_state(std::string_view prompt, uint64_t seed) {
  uint8_t seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<uint8_t>(seed >> (8 * i));
  const uint64_t h = fnv1a64({reinterpret_cast<const uint8_t*>(prompt.data()), prompt.size()});
  return fnv1a64(seed_bytes, h);
}

std::vector<float> mock_text_encoder(uint64_t seed, uint32_t dim, std::string_view prompt) {
  std::vector<float> out(dim);
  SplitMix64(prompt_state(prompt, seed)).normals(out);
  return out;
}

MockEncoderConfig MockEncoderConfig::with_seed(uint64_t seed, size_t count) {
  MockEncoderConfig c;
  c.seed = seed;
  SplitMix64 rng(prompt_state("anchors", seed));
  c.anchors.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    const double lat = std::asin(2.0 * rng.uniform() - 1.0) * 180.0 / std::numbers::pi;
    const double lon = 360.0 * rng.uniform() - 180.0;
    c.anchors.push_back({lat, lon});
  }
  return c;
}

void MockEncoderConfig::validate() const {
  if (anchors.size() < 8) {
    throw Error(ErrorCode::kInvalidArgument,
                "mock encoder needs at least 8 anchors, got " + std::to_string(anchors.size()));
  }
  if (!(tau_km > 0.0) || !std::isfinite(tau_km)) {
    throw Error(ErrorCode::kInvalidArgument, "tau_km must be positive");
  }
}

std::vector<float> anchor_vector(const MockEncoderConfig& config, size_t i, uint32_t dim) {
  return search::l2_normalize(
      mock_text_encoder(config.seed, dim, "anchor/" + std::to_string(i)));
}

MockLocationEncoder::MockLocationEncoder(MockEncoderConfig config, uint32_t dim)
    : config_(std::move(config)), dim_(dim) {
  config_.validate();
  anchor_vectors_.reserve(config_.anchors.size() * dim_);
  for (size_t i = 0; i < config_.anchors.size(); ++i) {
    const auto a = anchor_vector(config_, i, dim_);
    anchor_vectors_.insert(anchor_vectors_.end(), a.begin(), a.end());
  }
}

std::vector<double> MockLocationEncoder::weights(const grid::GeoPoint& p) const {
  std::vector<double> w(config_.anchors.size());
  for (size_t i = 0; i < w.size(); ++i) {
    w[i] = std::exp(-grid::great_circle_km(p, config_.anchors[i]) / config_.tau_km);
  }
  return w;
}

std::vector<float> MockLocationEncoder::combine(std::span<const double> weights) const {
  std::vector<double> acc(dim_, 0.0);
  for (size_t i = 0; i < weights.size(); ++i) {
    const float* a = anchor_vectors_.data() + i * dim_;
    const double w = weights[i];
    for (uint32_t d = 0; d < dim_; ++d) acc[d] += w * a[d];
  }
  return {acc.begin(), acc.end()};
}

std::vector<float> MockLocationEncoder::encode(const grid::GeoPoint& p) const {
  return combine(weights(p));
}

std::vector<float> mock_location_encoder(const MockEncoderConfig& config,
                                         const grid::GeoPoint& p, uint32_t dim) {
  return MockLocationEncoder(config, dim).encode(p);
}

std::string_view to_string(QueryModality m) {
  switch (m) {
    case QueryModality::kText: return "text";
    case QueryModality::kImageCell: return "image_cell";
    case QueryModality::kImageUpload: return "image_upload";
    case QueryModality::kLocation: return "location";
    case QueryModality::kRaw: return "raw";
  }
  return "?";
}

QueryModality parse_query_modality(std::string_view s) {
  for (auto m : {QueryModality::kText, QueryModality::kImageCell, QueryModality::kImageUpload,
                 QueryModality::kLocation, QueryModality::kRaw}) {
    if (s == to_string(m)) return m;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown query modality '" + std::string(s) + "'");
}

std::string_view to_string(LocationMode m) {
  switch (m) {
    case LocationMode::kMock: return "mock";
    case LocationMode::kRemote: return "remote";
    case LocationMode::kNearestTileProxy: return "nearest_tile_proxy";
  }
  return "?";
}

LocationMode parse_location_mode(std::string_view s) {
  if (s == "mock") return LocationMode::kMock;
  if (s == "remote") return LocationMode::kRemote;
  if (s == "proxy" || s == "nearest_tile_proxy") return LocationMode::kNearestTileProxy;
  throw Error(ErrorCode::kInvalidArgument, "unknown location mode '" + std::string(s) + "'");
}

size_t nearest_tile(const search::ModelIndex& index, const grid::GridSpec& spec,
                    const grid::GeoPoint& p) {
  if (index.empty()) {
    throw Error(ErrorCode::kEmptyCorpus,
                "no records for model '" + index.model_id() + "' to pick a proxy tile from");
  }
  if (auto hit = index.find(grid::cell_of(spec, p))) return *hit;
  size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i < index.size(); ++i) {
    const double d = grid::great_circle_km(p, index.center(i));
    if (d < best_d || (d == best_d && index.cell(i) < index.cell(best))) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

namespace {

EncoderEndpoint endpoint_for(const ResolverConfig& config, const models::ModelInfo& model) {
  if (!config.encoder_url) {
    throw Error(ErrorCode::kInvalidArgument,
                "no encoder endpoint configured for model '" + model.id + "'");
  }
  EncoderEndpoint e;
  e.base_url = *config.encoder_url;
  e.model_id = model.id;
  e.timeout_ms = config.timeout_ms;
  return e;
}

void require(const models::ModelInfo& model, models::Modality m) {
  if (!models::supports(model, m)) {
    throw Error(ErrorCode::kUnsupportedModality, "model '" + model.id + "' does not support " +
                                                     std::string(models::to_string(m)) +
                                                     " queries");
  }
}

const search::ModelIndex& need_index(const search::ModelIndex* index,
                                     const models::ModelInfo& model) {
  if (index == nullptr) {
    throw Error(ErrorCode::kCorpusNotLoaded, "corpus for model '" + model.id + "' not loaded");
  }
  return *index;
}

}  // namespace

std::vector<float> encode_location(const models::ModelInfo& model,
                                   const search::ModelIndex* index, const grid::GridSpec& spec,
                                   LocationMode mode, const grid::GeoPoint& p,
                                   const ResolverConfig& config) {
  if (!std::isfinite(p.lat) || !std::isfinite(p.lon) || p.lat < -90.0 || p.lat > 90.0) {
    throw Error(ErrorCode::kInvalidArgument, "location out of range");
  }
  switch (mode) {
    case LocationMode::kMock:
      return mock_location_encoder(config.mock, p, model.dim);
    case LocationMode::kRemote:
      return encode_location_remote(endpoint_for(config, model), p, model.dim);
    case LocationMode::kNearestTileProxy: {
      const auto& idx = need_index(index, model);
      return idx.vector(nearest_tile(idx, spec, p));
    }
  }
  throw Error(ErrorCode::kInvalidArgument, "bad location mode");
}

search::QueryVector resolve_query(const QuerySpec& spec, const models::Registry& registry,
                                  const search::ModelIndex* index,
                                  const grid::GridSpec& grid_spec,
                                  const ResolverConfig& config) {
  const auto& model = registry.at(spec.model_id);
  std::vector<float> raw;
  switch (spec.modality) {
    case QueryModality::kText:
      require(model, models::Modality::kText);
      raw = config.encoder_url
                ? encode_text_remote(endpoint_for(config, model), spec.text, model.dim)
                : mock_text_encoder(config.mock.seed, model.dim, spec.text);
      break;
    case QueryModality::kImageCell: {
      require(model, models::Modality::kImage);
      const auto& idx = need_index(index, model);
      const auto hit = idx.find(spec.cell);
      if (!hit) {
        throw Error(ErrorCode::kNotFound, "cell " + grid::cell_id_string(spec.cell) +
                                              " is not in the corpus for model '" + model.id +
                                              "'");
      }
      raw = idx.vector(*hit);
      break;
    }
    case QueryModality::kImageUpload:
      require(model, models::Modality::kImage);
      raw = encode_image_remote(endpoint_for(config, model), spec.image, spec.content_type,
                                model.dim);
      break;
    case QueryModality::kLocation:
      require(model, models::Modality::kLocation);
      raw = encode_location(model, index, grid_spec, config.location_mode, spec.point, config);
      break;
    case QueryModality::kRaw:
      raw = spec.raw;
      break;
  }
  return search::make_query(model, raw);
}

}  // namespace tilescout::encoder
