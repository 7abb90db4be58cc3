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

// Exact cosine search over one model's embeddings.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tilescout/grid.hpp"
#include "tilescout/models.hpp"
#include "tilescout/store.hpp"

namespace tilescout::search {

struct QueryVector {
  std::string model_id;
  std::vector<float> values;  // unit L2 norm
};

struct ScoredTile {
  grid::GridCell cell;
  float score = 0.0f;
  uint32_t rank = 0;  // 1-based
  bool operator==(const ScoredTile&) const = default;
};

struct SearchParams {
  uint32_t k = 5;
  double fraction = 0.025;
  void validate() const;
};

/// Ordering used everywhere results are ranked: score descending, then
/// (row, col) ascending.
inline bool ranks_before(float score_a, const grid::GridCell& a, float score_b,
                         const grid::GridCell& b) {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

/// Throws Error(kInvalidArgument) when the norm is at most 1e-12.
std::vector<float> l2_normalize(std::span<const float> v);

/// Dot product clamped to [-1, 1]; inputs are assumed unit length.
float cosine(std::span<const float> a, std::span<const float> b);

/// max(1, round(fraction * n)), half away from zero.
uint64_t fraction_count(uint64_t n, double fraction);

/// Normalizes `raw` and checks it against the model's dim.
QueryVector make_query(const models::ModelInfo& model, std::span<const float> raw);

/// Contiguous in-memory copy of one model's vectors.
class ModelIndex {
 public:
  ModelIndex(std::string model_id, uint32_t dim, models::Dtype dtype);

  static ModelIndex from_records(std::span<const store::EmbeddingRecord> records);
  static ModelIndex from_corpus(const store::Corpus& corpus, const std::string& model_id);

  /// Appends one vector (little-endian in the index dtype). Duplicate cells
  /// are rejected.
  void add(const grid::GridCell& cell, const grid::GeoPoint& center,
           std::span<const uint8_t> vector_bytes);
  void add(const store::EmbeddingRecord& record);

  const std::string& model_id() const { return model_id_; }
  uint32_t dim() const { return dim_; }
  models::Dtype dtype() const { return dtype_; }
  size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  const grid::GridCell& cell(size_t i) const { return cells_[i]; }
  const grid::GeoPoint& center(size_t i) const { return centers_[i]; }
  std::span<const grid::GridCell> cells() const { return cells_; }
  std::optional<size_t> find(const grid::GridCell& cell) const;

  /// Widened stored vector (not normalized).
  std::vector<float> vector(size_t i) const;

  /// Dot product of `q` with stored vector i, accumulated in double.
  double dot(size_t i, std::span<const float> q) const;
  double norm(size_t i) const { return norms_[i]; }

 private:
  std::string model_id_;
  uint32_t dim_;
  models::Dtype dtype_;
  std::vector<grid::GridCell> cells_;
  std::vector<grid::GeoPoint> centers_;
  std::vector<double> norms_;
  std::vector<uint16_t> f16_;
  std::vector<float> f32_;
  std::unordered_map<uint64_t, size_t> by_cell_;
};

struct ScanOptions {
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 1;
  size_t chunk_records = 8192;
};

/// Cosine of `q` against every stored vector, in index order.
std::vector<float> score_all(const ModelIndex& index, const QueryVector& q,
                             const ScanOptions& options = {});

/// The `k` best of `scores` under ranks_before, ranked from 1.
std::vector<ScoredTile> select_top(std::span<const float> scores,
                                   std::span<const grid::GridCell> cells, uint64_t k);

std::vector<ScoredTile> top_k(const ModelIndex& index, const QueryVector& q, uint64_t k,
                              const ScanOptions& options = {});

std::vector<ScoredTile> top_fraction(const ModelIndex& index, const QueryVector& q,
                                     double fraction, const ScanOptions& options = {});

/// Reference ranking: sequential float64 accumulation per record followed by
/// a stable sort. Deliberately unoptimized.
std::vector<ScoredTile> brute_force_oracle(std::span<const store::EmbeddingRecord> records,
                                           const QueryVector& q);

}  // namespace tilescout::search
