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

#include "tilescout/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <numeric>
#include <thread>

#include "tilescout/error.hpp"
#include "tilescout/half.hpp"

namespace tilescout::search {
namespace {

constexpr double kMinNorm = 1e-12;

double sequential_norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

float finish_score(double dot, double qnorm, double vnorm) {
  const double denom = qnorm * vnorm;
  if (!(denom > kMinNorm)) return 0.0f;
  return static_cast<float>(std::clamp(dot / denom, -1.0, 1.0));
}

void check_query(const ModelIndex& index, const QueryVector& q) {
  if (index.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, "no records for model '" + index.model_id() + "'");
  }
  if (q.values.size() != index.dim()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "query has " + std::to_string(q.values.size()) + " components, model '" +
                    index.model_id() + "' expects " + std::to_string(index.dim()));
  }
}

}  // namespace

void SearchParams::validate() const {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "fraction must be in (0, 1], got " + std::to_string(fraction));
  }
}

std::vector<float> l2_normalize(std::span<const float> v) {
  for (size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw Error(ErrorCode::kNonFinite, "component " + std::to_string(i) + " is not finite");
    }
  }
  const double n = sequential_norm(v);
  if (!(n > kMinNorm)) {
    throw Error(ErrorCode::kInvalidArgument, "cannot normalize a near-zero vector");
  }
  std::vector<float> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
  return out;
}

float cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "cosine of vectors with lengths " +
                                                   std::to_string(a.size()) + " and " +
                                                   std::to_string(b.size()));
  }
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
  return static_cast<float>(std::clamp(s, -1.0, 1.0));
}

uint64_t fraction_count(uint64_t n, double fraction) {
  SearchParams{1, fraction}.validate();
  const double k = std::round(fraction * static_cast<double>(n));
  return std::max<uint64_t>(1, static_cast<uint64_t>(k));
}

QueryVector make_query(const models::ModelInfo& model, std::span<const float> raw) {
  return QueryVector{model.id, l2_normalize(models::validate_vector(model, raw))};
}

ModelIndex::ModelIndex(std::string model_id, uint32_t dim, models::Dtype dtype)
    : model_id_(std::move(model_id)), dim_(dim), dtype_(dtype) {
  if (dim_ == 0) throw Error(ErrorCode::kInvalidArgument, "index dim must be positive");
}

ModelIndex ModelIndex::from_records(std::span<const store::EmbeddingRecord> records) {
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyCorpus, "cannot build an index from zero records");
  }
  ModelIndex index(records[0].model_id, records[0].dim(), records[0].dtype);
  for (const auto& r : records) index.add(r);
  return index;
}

ModelIndex ModelIndex::from_corpus(const store::Corpus& corpus, const std::string& model_id) {
  const auto shards = corpus.shards_for(model_id);
  if (shards.empty()) {
    throw Error(ErrorCode::kUnknownModel, "corpus has no shards for model '" + model_id + "'");
  }
  ModelIndex index(model_id, shards[0]->dim, shards[0]->dtype);
  for (const auto* shard : shards) {
    store::FileSource src(corpus.shard_path(*shard));
    for (const auto& r : store::read_shard(src, *shard)) index.add(r);
  }
  return index;
}

void ModelIndex::add(const grid::GridCell& cell, const grid::GeoPoint& center,
                     std::span<const uint8_t> vector_bytes) {
  const size_t expected = static_cast<size_t>(dim_) * models::dtype_size(dtype_);
  if (vector_bytes.size() != expected) {
    throw Error(ErrorCode::kDimensionMismatch,
                "vector for " + grid::cell_id_string(cell) + " has " +
                    std::to_string(vector_bytes.size()) + " bytes, expected " +
                    std::to_string(expected));
  }
  const auto [it, inserted] = by_cell_.emplace(grid::cell_key(cell), cells_.size());
  if (!inserted) {
    throw Error(ErrorCode::kInvalidArgument,
                "duplicate cell " + grid::cell_id_string(cell) + " in index");
  }
  const size_t offset = cells_.size() * dim_;
  std::vector<float> widened(dim_);
  if (dtype_ == models::Dtype::kFloat16) {
    f16_.resize(offset + dim_);
    std::memcpy(f16_.data() + offset, vector_bytes.data(), expected);
    const float* table = f16_table();
    for (uint32_t d = 0; d < dim_; ++d) widened[d] = table[f16_[offset + d]];
  } else {
    f32_.resize(offset + dim_);
    std::memcpy(f32_.data() + offset, vector_bytes.data(), expected);
    std::copy_n(f32_.data() + offset, dim_, widened.data());
  }
  cells_.push_back(cell);
  centers_.push_back(center);
  norms_.push_back(sequential_norm(widened));
}

void ModelIndex::add(const store::EmbeddingRecord& record) {
  if (record.model_id != model_id_ || record.dtype != dtype_) {
    throw Error(ErrorCode::kInvalidArgument, "record for " + grid::cell_id_string(record.cell) +
                                                 " belongs to '" + record.model_id +
                                                 "', index is '" + model_id_ + "'");
  }
  add(record.cell, {record.lat, record.lon}, record.vector_bytes);
}

std::optional<size_t> ModelIndex::find(const grid::GridCell& cell) const {
  const auto it = by_cell_.find(grid::cell_key(cell));
  if (it == by_cell_.end()) return std::nullopt;
  return it->second;
}

std::vector<float> ModelIndex::vector(size_t i) const {
  std::vector<float> out(dim_);
  const size_t offset = i * dim_;
  if (dtype_ == models::Dtype::kFloat16) {
    const float* table = f16_table();
    for (uint32_t d = 0; d < dim_; ++d) out[d] = table[f16_[offset + d]];
  } else {
    std::copy_n(f32_.data() + offset, dim_, out.data());
  }
  return out;
}

double ModelIndex::dot(size_t i, std::span<const float> q) const {
  constexpr size_t kLanes = 8;
  double acc[kLanes] = {};
  const size_t offset = i * dim_;
  const size_t body = dim_ - dim_ % kLanes;
  if (dtype_ == models::Dtype::kFloat16) {
    const float* table = f16_table();
    const uint16_t* v = f16_.data() + offset;
    for (size_t d = 0; d < body; d += kLanes) {
      for (size_t l = 0; l < kLanes; ++l) {
        acc[l] += static_cast<double>(q[d + l]) * table[v[d + l]];
      }
    }
    for (size_t d = body; d < dim_; ++d) acc[0] += static_cast<double>(q[d]) * table[v[d]];
  } else {
    const float* v = f32_.data() + offset;
    for (size_t d = 0; d < body; d += kLanes) {
      for (size_t l = 0; l < kLanes; ++l) acc[l] += static_cast<double>(q[d + l]) * v[d + l];
    }
    for (size_t d = body; d < dim_; ++d) acc[0] += static_cast<double>(q[d]) * v[d];
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

std::vector<float> score_all(const ModelIndex& index, const QueryVector& q,
                             const ScanOptions& options) {
  check_query(index, q);
  const double qnorm = sequential_norm(q.values);
  std::vector<float> scores(index.size());
  auto scan = [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) {
      scores[i] = finish_score(index.dot(i, q.values), qnorm, index.norm(i));
    }
  };
  unsigned threads = options.threads == 0 ? std::thread::hardware_concurrency() : options.threads;
  const size_t chunk = std::max<size_t>(1, options.chunk_records);
  const size_t chunks = (index.size() + chunk - 1) / chunk;
  threads = static_cast<unsigned>(std::clamp<size_t>(threads, 1, chunks));
  if (threads == 1) {
    scan(0, index.size());
    return scores;
  }
  // Each score depends only on its own record, so chunk scheduling cannot
  // change the output.
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (size_t c; (c = next.fetch_add(1)) < chunks;) {
        scan(c * chunk, std::min(index.size(), (c + 1) * chunk));
      }
    });
  }
  for (auto& th : pool) th.join();
  return scores;
}

std::vector<ScoredTile> select_top(std::span<const float> scores,
                                   std::span<const grid::GridCell> cells, uint64_t k) {
  if (scores.size() != cells.size()) {
    throw Error(ErrorCode::kInvalidArgument, "scores and cells differ in length");
  }
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  std::vector<uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  const auto before = [&](uint32_t a, uint32_t b) {
    return ranks_before(scores[a], cells[a], scores[b], cells[b]);
  };
  const size_t take = static_cast<size_t>(std::min<uint64_t>(k, scores.size()));
  if (take < order.size()) {
    std::nth_element(order.begin(), order.begin() + take, order.end(), before);
    order.resize(take);
  }
  std::sort(order.begin(), order.end(), before);
  std::vector<ScoredTile> out;
  out.reserve(take);
  for (size_t r = 0; r < take; ++r) {
    out.push_back({cells[order[r]], scores[order[r]], static_cast<uint32_t>(r + 1)});
  }
  return out;
}

std::vector<ScoredTile> top_k(const ModelIndex& index, const QueryVector& q, uint64_t k,
                              const ScanOptions& options) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
  const auto scores = score_all(index, q, options);
  return select_top(scores, index.cells(), k);
}

std::vector<ScoredTile> top_fraction(const ModelIndex& index, const QueryVector& q,
                                     double fraction, const ScanOptions& options) {
  const uint64_t k = fraction_count(index.size(), fraction);
  return top_k(index, q, k, options);
}

std::vector<ScoredTile> brute_force_oracle(std::span<const store::EmbeddingRecord> records,
                                           const QueryVector& q) {
  const double qnorm = sequential_norm(q.values);
  std::vector<ScoredTile> all;
  all.reserve(records.size());
  for (const auto& r : records) {
    const std::vector<float> v = r.to_float32();
    if (v.size() != q.values.size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "record " + grid::cell_id_string(r.cell) + " has dim " +
                      std::to_string(v.size()) + ", query has " +
                      std::to_string(q.values.size()));
    }
    double dot = 0.0;
    for (size_t d = 0; d < v.size(); ++d) dot += static_cast<double>(q.values[d]) * v[d];
    all.push_back({r.cell, finish_score(dot, qnorm, sequential_norm(v)), 0});
  }
  std::stable_sort(all.begin(), all.end(), [](const ScoredTile& a, const ScoredTile& b) {
    return ranks_before(a.score, a.cell, b.score, b.cell);
  });
  for (size_t i = 0; i < all.size(); ++i) all[i].rank = static_cast<uint32_t>(i + 1);
  return all;
}

}  // namespace tilescout::search
