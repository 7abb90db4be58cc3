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

// eesh1 layout (all integers little-endian):
//   "EESH1\0" | u16 version=1 | u32 dim | u8 dtype (0=f32, 1=f16) |
//   u64 record_count |
//   record_count x [i32 row | u32 col | f64 lat | f64 lon | i64 acquired_at |
//                   u16 product_len | product bytes | dim*dtype_size bytes] |
//   32-byte SHA-256 of everything before it.

#include <algorithm>
#include <cstring>
#include <limits>

#include "byte_io.hpp"
#include "shard_codec.hpp"

namespace tilescout::store::detail {
namespace {

constexpr uint8_t kMagic[6] = {'E', 'E', 'S', 'H', '1', '\0'};
constexpr uint16_t kVersion = 1;
constexpr size_t kHeaderSize = 6 + 2 + 4 + 1 + 8;
constexpr size_t kTrailerSize = 32;

void put_record(LeWriter& w, const EmbeddingRecord& r) {
  if (r.source_product.size() > std::numeric_limits<uint16_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument,
                "source_product longer than 65535 bytes for cell " +
                    grid::cell_id_string(r.cell));
  }
  w.put<int32_t>(r.cell.row);
  w.put<uint32_t>(r.cell.col);
  w.put<double>(r.lat);
  w.put<double>(r.lon);
  w.put<int64_t>(r.acquired_at);
  w.put<uint16_t>(static_cast<uint16_t>(r.source_product.size()));
  w.put_bytes(r.source_product);
  w.put_bytes(r.vector_bytes);
}

EmbeddingRecord get_record(LeReader& rd, const ShardSchema& schema, uint64_t index) {
  EmbeddingRecord r;
  r.cell.row = rd.get<int32_t>();
  r.cell.col = rd.get<uint32_t>();
  r.lat = rd.get<double>();
  r.lon = rd.get<double>();
  r.acquired_at = rd.get<int64_t>();
  const uint16_t product_len = rd.get<uint16_t>();
  auto product = rd.get_bytes(product_len);
  r.source_product.assign(product.begin(), product.end());
  const size_t vec_len = static_cast<size_t>(schema.dim) * models::dtype_size(schema.dtype);
  if (rd.remaining() < vec_len) {
    rd.fail("record " + std::to_string(index) + ": vector truncated");
  }
  auto vec = rd.get_bytes(vec_len);
  r.vector_bytes.assign(vec.begin(), vec.end());
  r.model_id = schema.model_id;
  r.dtype = schema.dtype;
  return r;
}

}  // namespace

EncodedShard encode_eesh1(std::span<const EmbeddingRecord> records, const ShardSchema& schema,
                          uint64_t row_group_size) {
  EncodedShard out;
  LeWriter w(out.bytes);
  w.put_bytes(std::span<const uint8_t>(kMagic, sizeof(kMagic)));
  w.put<uint16_t>(kVersion);
  w.put<uint32_t>(schema.dim);
  w.put<uint8_t>(static_cast<uint8_t>(schema.dtype));
  w.put<uint64_t>(records.size());

  for (auto [first, count] : partition_groups(records.size(), row_group_size)) {
    RowGroup g;
    g.first_record_index = first;
    g.record_count = count;
    g.byte_offset = w.size();
    for (uint64_t i = first; i < first + count; ++i) put_record(w, records[i]);
    g.byte_length = w.size() - g.byte_offset;
    out.row_groups.push_back(g);
  }
  const Sha256Digest digest = sha256(out.bytes);
  w.put_bytes(digest);
  return out;
}

std::vector<EmbeddingRecord> decode_eesh1_file(std::span<const uint8_t> bytes,
                                               const ShardSchema& schema, uint64_t record_count,
                                               bool verify_trailer) {
  const std::string ctx = "shard " + schema.shard_id;
  if (bytes.size() < kHeaderSize + kTrailerSize) {
    throw Error(ErrorCode::kCorruptData, ctx + ": truncated body (" +
                                             std::to_string(bytes.size()) + " bytes)");
  }
  const auto body = bytes.first(bytes.size() - kTrailerSize);
  if (verify_trailer) {
    const Sha256Digest digest = sha256(body);
    if (!std::equal(digest.begin(), digest.end(), bytes.end() - kTrailerSize)) {
      throw Error(ErrorCode::kChecksumMismatch, ctx + ": trailer checksum mismatch");
    }
  }
  LeReader rd(body, ctx);
  auto magic = rd.get_bytes(sizeof(kMagic));
  if (std::memcmp(magic.data(), kMagic, sizeof(kMagic)) != 0) rd.fail("bad magic");
  const auto version = rd.get<uint16_t>();
  if (version != kVersion) rd.fail("unsupported version " + std::to_string(version));
  const auto dim = rd.get<uint32_t>();
  const auto dtype = rd.get<uint8_t>();
  const auto count = rd.get<uint64_t>();
  if (dim != schema.dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                ctx + ": decode error at record 0: manifest dim " + std::to_string(schema.dim) +
                    " but body encodes " + std::to_string(dim) + "-long vectors");
  }
  if (dtype != static_cast<uint8_t>(schema.dtype)) {
    throw Error(ErrorCode::kCorruptData, ctx + ": dtype disagrees with manifest");
  }
  if (count != record_count) {
    throw Error(ErrorCode::kCorruptData, ctx + ": header holds " + std::to_string(count) +
                                             " records, manifest says " +
                                             std::to_string(record_count));
  }
  std::vector<EmbeddingRecord> out;
  out.reserve(count);
  for (uint64_t i = 0; i < count; ++i) out.push_back(get_record(rd, schema, i));
  if (rd.remaining() != 0) rd.fail("trailing bytes after last record");
  return out;
}

std::vector<EmbeddingRecord> decode_eesh1_group(std::span<const uint8_t> bytes,
                                                const ShardSchema& schema,
                                                const RowGroup& group) {
  LeReader rd(bytes, "shard " + schema.shard_id + " row group at offset " +
                         std::to_string(group.byte_offset));
  std::vector<EmbeddingRecord> out;
  out.reserve(group.record_count);
  for (uint64_t i = 0; i < group.record_count; ++i) {
    out.push_back(get_record(rd, schema, group.first_record_index + i));
  }
  if (rd.remaining() != 0) rd.fail("row group length disagrees with its records");
  return out;
}

}  // namespace tilescout::store::detail
