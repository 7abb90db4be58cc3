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

// Embedding shards: one file per contiguous, (row, col)-sorted slice of a
// single model's records, plus JSON manifests describing row groups so that
// readers can fetch any subset of groups with one range read each.
//
// Two containers share the same manifest:
//   parquet  standard Parquet file (PLAIN, uncompressed, one data page per
//            column chunk); checksum is SHA-256 of the whole file.
//   eesh1    little-endian binary container with a SHA-256 trailer over the
//            body (header + records).

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tilescout/bytes.hpp"
#include "tilescout/grid.hpp"
#include "tilescout/models.hpp"

namespace tilescout::grid {
void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);
}  // namespace tilescout::grid

namespace tilescout::store {

enum class ShardFormat : uint8_t { kParquet, kEesh1 };

std::string_view to_string(ShardFormat f);
ShardFormat parse_shard_format(std::string_view s);
std::string_view file_extension(ShardFormat f);

struct EmbeddingRecord {
  grid::GridCell cell;
  double lat = 0.0;
  double lon = 0.0;
  std::string model_id;
  models::Dtype dtype = models::Dtype::kFloat32;
  /// Little-endian IEEE-754 components in `dtype`.
  std::vector<uint8_t> vector_bytes;
  int64_t acquired_at = 0;
  std::string source_product;

  uint32_t dim() const {
    return static_cast<uint32_t>(vector_bytes.size() / models::dtype_size(dtype));
  }
  /// Widened copy of the vector.
  std::vector<float> to_float32() const;

  bool operator==(const EmbeddingRecord&) const = default;
};

/// Stores `values` in `dtype` (float16 rounds to nearest even).
std::vector<uint8_t> pack_vector(models::Dtype dtype, std::span<const float> values);

struct BBox {
  double lat_min = 90.0;
  double lat_max = -90.0;
  double lon_min = 180.0;
  double lon_max = -180.0;

  /// Inverted sentinel means "contains nothing".
  bool empty() const { return lat_min > lat_max; }
  void extend(double lat, double lon);
  bool contains(double lat, double lon) const {
    return lat >= lat_min && lat <= lat_max && lon >= lon_min && lon <= lon_max;
  }
  bool operator==(const BBox&) const = default;
};

struct RowGroup {
  uint64_t first_record_index = 0;
  uint64_t record_count = 0;
  uint64_t byte_offset = 0;
  uint64_t byte_length = 0;
  bool operator==(const RowGroup&) const = default;
};

struct ShardManifest {
  std::string shard_id;
  std::string model_id;
  uint32_t dim = 0;
  models::Dtype dtype = models::Dtype::kFloat32;
  uint64_t record_count = 0;
  BBox bbox;
  std::vector<RowGroup> row_groups;
  std::string checksum;  // 64 lowercase hex digits
  ShardFormat format = ShardFormat::kEesh1;
  /// Shard file name relative to the corpus directory.
  std::string file;

  /// Checks the structural invariants (row-group partition, ascending
  /// non-overlapping byte ranges). Throws Error(kCorruptData).
  void validate() const;

  bool operator==(const ShardManifest&) const = default;
};

void to_json(nlohmann::json& j, const ShardManifest& m);
void from_json(const nlohmann::json& j, ShardManifest& m);

struct WriteOptions {
  ShardFormat format = ShardFormat::kEesh1;
  uint64_t row_group_size = 1024;
  std::string shard_id = "shard-0000";
  // Schema used when `records` is empty; otherwise checked against records.
  std::string model_id;
  uint32_t dim = 0;
  models::Dtype dtype = models::Dtype::kFloat32;
};

/// Serializes `records` (same model, sorted by (row, col)) to `sink`.
ShardManifest write_shard(std::span<const EmbeddingRecord> records, ByteSink& sink,
                          const WriteOptions& options);

struct ReadOptions {
  bool verify_checksum = true;
};

std::vector<EmbeddingRecord> read_shard(ByteSource& source, const ShardManifest& manifest,
                                        const ReadOptions& options = {});

/// Reads only the byte ranges of the requested row groups (one range read per
/// group, in ascending group order). Indices may be given in any order;
/// duplicates are ignored.
std::vector<EmbeddingRecord> partial_fetch(ByteSource& source, const ShardManifest& manifest,
                                           std::span<const size_t> row_group_indices);

struct CorpusManifest {
  grid::GridSpec grid_spec;
  std::vector<ShardManifest> shards;
  std::map<std::string, uint64_t> total_records;
  int64_t created_at = 0;

  /// Per-model totals match the shards.
  void validate() const;
  bool operator==(const CorpusManifest&) const = default;
};

void to_json(nlohmann::json& j, const CorpusManifest& m);
void from_json(const nlohmann::json& j, CorpusManifest& m);

inline constexpr const char* kCorpusManifestName = "corpus.json";

struct LookupResult {
  std::vector<EmbeddingRecord> found;
  std::vector<grid::GridCell> missing;
};

/// A corpus directory: corpus.json, one shard file and one shard manifest
/// JSON per shard.
class Corpus {
 public:
  /// `path` is the corpus directory or the corpus.json file inside it.
  static Corpus open(const std::filesystem::path& path);

  const CorpusManifest& manifest() const { return manifest_; }
  const std::filesystem::path& directory() const { return dir_; }
  std::filesystem::path shard_path(const ShardManifest& shard) const;

  std::vector<std::string> model_ids() const;
  std::vector<const ShardManifest*> shards_for(std::string_view model_id) const;

  /// All records of one model in (row, col) order. Throws
  /// Error(kUnknownModel) if the corpus holds no shards for it.
  std::vector<EmbeddingRecord> read_model(std::string_view model_id,
                                          const ReadOptions& options = {}) const;

  LookupResult lookup(std::string_view model_id, std::span<const grid::GridCell> cells) const;

 private:
  std::filesystem::path dir_;
  CorpusManifest manifest_;
};

/// Writes shards + manifests for a set of per-model record lists into `dir`.
/// Records of each model are split into shards of at most `shard_size`.
struct CorpusWriteOptions {
  ShardFormat format = ShardFormat::kEesh1;
  uint64_t shard_size = 4096;
  uint64_t row_group_size = 1024;
  int64_t created_at = 0;
};

CorpusManifest write_corpus(const std::filesystem::path& dir, const grid::GridSpec& spec,
                            const std::vector<models::ModelInfo>& models,
                            const std::map<std::string, std::vector<EmbeddingRecord>>& records,
                            const CorpusWriteOptions& options);

struct VerifyIssue {
  std::string shard_id;
  std::string message;
};

struct VerifyReport {
  uint64_t shards_checked = 0;
  uint64_t records_checked = 0;
  std::vector<VerifyIssue> issues;
  bool ok() const { return issues.empty(); }
};

/// Full integrity check: checksums, manifest closure, dim/dtype consistency
/// against `registry` (when given), one record per (cell, model).
VerifyReport verify_corpus(const std::filesystem::path& path,
                           const models::Registry* registry = nullptr);

}  // namespace tilescout::store
