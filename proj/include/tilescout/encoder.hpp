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

// Turning text, cells, locations, uploads and raw arrays into query vectors.
//
// Mock encoders are fully pinned so that fixtures reproduce in any language:
//
//   state   = FNV-1a-64(prompt bytes || seed as 8 little-endian bytes)
//   x_i     = splitmix64(state)            (state += 0x9E3779B97F4A7C15)
//   u_i     = (x_i >> 11) * 2^-53          in [0, 1)
//   z0, z1  = sqrt(-2 ln(1 - u_a)) * (cos, sin)(2 pi u_b)
//
// Components are emitted as z0, z1, z0', z1', ... rounded to float32; an odd
// dim drops the final z1.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tilescout/grid.hpp"
#include "tilescout/models.hpp"
#include "tilescout/search.hpp"

namespace tilescout::encoder {

uint64_t fnv1a64(std::span<const uint8_t> bytes, uint64_t hash = 0xCBF29CE484222325ULL);

/// splitmix64 generator with the 53-bit uniform and Box-Muller transforms.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t state) : state_(state) {}
  uint64_t next();
  double uniform();
  /// Fills `out` with standard normals in Box-Muller pairs.
  void normals(std::span<float> out);

 private:
  uint64_t state_;
};

/// Seed derived from (prompt, seed) as in the file comment.
uint64_t prompt_state(std::string_view prompt, uint64_t seed);

std::vector<float> mock_text_encoder(uint64_t seed, uint32_t dim, std::string_view prompt);

inline constexpr uint64_t kDefaultMockSeed = 20250301;

struct MockEncoderConfig {
  uint64_t seed = kDefaultMockSeed;
  std::vector<grid::GeoPoint> anchors;
  double tau_km = 500.0;

  /// `count` anchors uniform on the sphere drawn from the stream of
  /// prompt_state("anchors", seed): lat = asin(2u - 1), lon = 360u - 180.
  static MockEncoderConfig with_seed(uint64_t seed, size_t count = 1024);
  void validate() const;
};

/// Anchor i carries the unit vector normalize(mock_text_encoder(seed, dim,
/// "anchor/<i>")).
std::vector<float> anchor_vector(const MockEncoderConfig& config, size_t i, uint32_t dim);

/// v(p) = sum_i exp(-d_gc(p, anchor_i) / tau_km) * anchor_vec_i, with anchor
/// vectors precomputed for one dim.
class MockLocationEncoder {
 public:
  MockLocationEncoder(MockEncoderConfig config, uint32_t dim);

  std::vector<float> encode(const grid::GeoPoint& p) const;
  /// Kernel weights for `p`, shared between models of different dims.
  std::vector<double> weights(const grid::GeoPoint& p) const;
  std::vector<float> combine(std::span<const double> weights) const;

  uint32_t dim() const { return dim_; }
  const MockEncoderConfig& config() const { return config_; }

 private:
  MockEncoderConfig config_;
  uint32_t dim_;
  std::vector<float> anchor_vectors_;  // anchors x dim
};

std::vector<float> mock_location_encoder(const MockEncoderConfig& config,
                                         const grid::GeoPoint& p, uint32_t dim);

struct EncoderEndpoint {
  /// Full URL of the embedding endpoint, e.g. http://127.0.0.1:9000/embed.
  std::string base_url;
  std::string model_id;
  int timeout_ms = 10000;
  std::string auth_token;
  void validate() const;
};

/// Wire-contract calls. Failures map to kEncoderTimeout, kEncoderHttp,
/// kEncoderMalformed, kEncoderFailure (connection), kDimensionMismatch and
/// kNonFinite.
std::vector<float> encode_text_remote(const EncoderEndpoint& endpoint, std::string_view prompt,
                                      uint32_t dim);
std::vector<float> encode_location_remote(const EncoderEndpoint& endpoint,
                                          const grid::GeoPoint& p, uint32_t dim);
std::vector<float> encode_image_remote(const EncoderEndpoint& endpoint,
                                       std::span<const uint8_t> image,
                                       std::string_view content_type, uint32_t dim);

enum class QueryModality : uint8_t { kText, kImageCell, kImageUpload, kLocation, kRaw };
std::string_view to_string(QueryModality m);
QueryModality parse_query_modality(std::string_view s);

enum class LocationMode : uint8_t { kMock, kRemote, kNearestTileProxy };
std::string_view to_string(LocationMode m);
/// Accepts "mock", "remote", "proxy" and "nearest_tile_proxy".
LocationMode parse_location_mode(std::string_view s);

struct QuerySpec {
  QueryModality modality = QueryModality::kText;
  std::string model_id;
  std::string text;
  grid::GridCell cell;
  std::vector<uint8_t> image;
  std::string content_type = "image/png";
  grid::GeoPoint point;
  std::vector<float> raw;
};

struct ResolverConfig {
  MockEncoderConfig mock = MockEncoderConfig::with_seed(kDefaultMockSeed);
  LocationMode location_mode = LocationMode::kMock;
  /// When set, text and location (remote mode) go to this endpoint and image
  /// uploads become possible.
  std::optional<std::string> encoder_url;
  int timeout_ms = 10000;
};

/// Index of the corpus cell nearest `p`: the cell containing `p` when it is
/// present, otherwise the smallest great-circle distance between `p` and cell
/// centres (lowest (row, col) on ties).
size_t nearest_tile(const search::ModelIndex& index, const grid::GridSpec& spec,
                    const grid::GeoPoint& p);

/// Raw (unnormalized) location vector for `model` under `mode`.
std::vector<float> encode_location(const models::ModelInfo& model,
                                   const search::ModelIndex* index, const grid::GridSpec& spec,
                                   LocationMode mode, const grid::GeoPoint& p,
                                   const ResolverConfig& config);

/// Unit-norm, dim-checked query vector for `spec.model_id`. `index` may be
/// null when the query needs no corpus access.
search::QueryVector resolve_query(const QuerySpec& spec, const models::Registry& registry,
                                  const search::ModelIndex* index,
                                  const grid::GridSpec& grid_spec,
                                  const ResolverConfig& config);

}  // namespace tilescout::encoder
