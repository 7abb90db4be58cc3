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

// Parquet writer/reader for the embedding-shard schema:
//
//   required int32 cell_row
//   required int32 cell_col (UINT_32)
//   required double lat
//   required double lon
//   required int64 acquired_at
//   required binary source_product (STRING)
//   required group embedding (LIST) {
//     repeated group list { required float|fixed_len_byte_array(2) element (FLOAT16) }
//   }
//
// Every column chunk is a single uncompressed v1 data page with PLAIN values;
// the embedding column carries RLE repetition/definition levels. The reader
// accepts multi-page chunks but rejects dictionary pages and compression.

#include <zlib.h>

#include <array>
#include <cstring>

#include "byte_io.hpp"
#include "shard_codec.hpp"
#include "thrift_compact.hpp"

namespace tilescout::store::detail {
namespace {

using thrift::CompactWriter;
using thrift::CType;

constexpr uint8_t kParMagic[4] = {'P', 'A', 'R', '1'};

// parquet.thrift enums
enum PqType : int32_t { kInt32 = 1, kInt64 = 2, kFloat = 4, kDouble = 5, kByteArray = 6, kFlba = 7 };
enum PqRepetition : int32_t { kRequired = 0, kRepeated = 2 };
enum PqEncoding : int32_t { kPlain = 0, kRle = 3 };
enum PqConverted : int32_t { kUtf8 = 0, kList = 3, kUint32 = 13 };
constexpr int32_t kDataPage = 0;

constexpr size_t kNumColumns = 7;
constexpr std::array<const char*, 6> kFlatNames = {"cell_row", "cell_col", "lat",
                                                    "lon", "acquired_at", "source_product"};

struct Columns {
  std::vector<int32_t> row;
  std::vector<uint32_t> col;
  std::vector<double> lat;
  std::vector<double> lon;
  std::vector<int64_t> acquired_at;
  std::vector<std::string> product;
  std::vector<uint8_t> embedding;  // n * dim * dtype_size bytes
};

void put_varint(std::vector<uint8_t>& out, uint64_t v) {
  while (v >= 0x80) {
    out.push_back(static_cast<uint8_t>(v | 0x80));
    v >>= 7;
  }
  out.push_back(static_cast<uint8_t>(v));
}

// RLE run of `count` copies of a 1-bit level value.
void put_rle_run(std::vector<uint8_t>& out, uint64_t count, uint8_t value) {
  if (count == 0) return;
  put_varint(out, count << 1);
  out.push_back(value);
}

void put_levels_block(std::vector<uint8_t>& page, const std::vector<uint8_t>& encoded) {
  LeWriter w(page);
  w.put<uint32_t>(static_cast<uint32_t>(encoded.size()));
  w.put_bytes(encoded);
}

struct ChunkMeta {
  int32_t type;
  std::vector<std::string> path;
  std::vector<int32_t> encodings;
  int64_t num_values;
  int64_t offset;
  int64_t size;
};

void write_page(std::vector<uint8_t>& file, const std::vector<uint8_t>& page,
                int32_t num_values) {
  std::vector<uint8_t> header;
  CompactWriter w(header);
  w.field_i32(1, kDataPage);
  w.field_i32(2, static_cast<int32_t>(page.size()));
  w.field_i32(3, static_cast<int32_t>(page.size()));
  const uLong crc = crc32(0L, page.data(), static_cast<uInt>(page.size()));
  w.field_i32(4, static_cast<int32_t>(static_cast<uint32_t>(crc)));
  w.begin_struct_field(5);
  w.field_i32(1, num_values);
  w.field_i32(2, kPlain);
  w.field_i32(3, kRle);
  w.field_i32(4, kRle);
  w.end_struct();
  w.stop();
  file.insert(file.end(), header.begin(), header.end());
  file.insert(file.end(), page.begin(), page.end());
}

std::vector<uint8_t> flat_page(std::span<const EmbeddingRecord> rs, size_t column) {
  std::vector<uint8_t> page;
  LeWriter w(page);
  for (const auto& r : rs) {
    switch (column) {
      case 0: w.put<int32_t>(r.cell.row); break;
      case 1: w.put<uint32_t>(r.cell.col); break;
      case 2: w.put<double>(r.lat); break;
      case 3: w.put<double>(r.lon); break;
      case 4: w.put<int64_t>(r.acquired_at); break;
      case 5:
        w.put<uint32_t>(static_cast<uint32_t>(r.source_product.size()));
        w.put_bytes(r.source_product);
        break;
    }
  }
  return page;
}

std::vector<uint8_t> embedding_page(std::span<const EmbeddingRecord> rs, uint32_t dim) {
  std::vector<uint8_t> rep;
  for (size_t i = 0; i < rs.size(); ++i) {
    put_rle_run(rep, 1, 0);
    put_rle_run(rep, dim - 1, 1);
  }
  std::vector<uint8_t> def;
  put_rle_run(def, static_cast<uint64_t>(rs.size()) * dim, 1);

  std::vector<uint8_t> page;
  put_levels_block(page, rep);
  put_levels_block(page, def);
  for (const auto& r : rs) page.insert(page.end(), r.vector_bytes.begin(), r.vector_bytes.end());
  return page;
}

void write_schema_element(CompactWriter& w, const char* name, int32_t repetition,
                          std::optional<int32_t> type, int32_t num_children = 0) {
  w.begin_struct();
  if (type) w.field_i32(1, *type);
  w.field_i32(3, repetition);
  w.field_binary(4, name);
  if (num_children > 0) w.field_i32(5, num_children);
  w.end_struct();
}

std::vector<uint8_t> file_metadata(const ShardSchema& schema, uint64_t num_rows,
                                   const std::vector<std::vector<ChunkMeta>>& groups,
                                   const std::vector<uint64_t>& group_rows) {
  std::vector<uint8_t> out;
  CompactWriter w(out);
  w.field_i32(1, 1);
  w.begin_list_field(2, CType::kStruct, 10);
  write_schema_element(w, "schema", kRequired, std::nullopt, 7);
  write_schema_element(w, "cell_row", kRequired, kInt32);
  // cell_col: UINT_32 / IntType(32, unsigned)
  w.begin_struct();
  w.field_i32(1, kInt32);
  w.field_i32(3, kRequired);
  w.field_binary(4, "cell_col");
  w.field_i32(6, kUint32);
  w.begin_struct_field(10);
  w.begin_struct_field(10);
  w.field_byte(1, 32);
  w.field_bool(2, false);
  w.end_struct();
  w.end_struct();
  w.end_struct();
  write_schema_element(w, "lat", kRequired, kDouble);
  write_schema_element(w, "lon", kRequired, kDouble);
  write_schema_element(w, "acquired_at", kRequired, kInt64);
  // source_product: STRING
  w.begin_struct();
  w.field_i32(1, kByteArray);
  w.field_i32(3, kRequired);
  w.field_binary(4, "source_product");
  w.field_i32(6, kUtf8);
  w.begin_struct_field(10);
  w.begin_struct_field(1);
  w.end_struct();
  w.end_struct();
  w.end_struct();
  // embedding: LIST
  w.begin_struct();
  w.field_i32(3, kRequired);
  w.field_binary(4, "embedding");
  w.field_i32(5, 1);
  w.field_i32(6, kList);
  w.begin_struct_field(10);
  w.begin_struct_field(3);
  w.end_struct();
  w.end_struct();
  w.end_struct();
  write_schema_element(w, "list", kRepeated, std::nullopt, 1);
  if (schema.dtype == models::Dtype::kFloat32) {
    write_schema_element(w, "element", kRequired, kFloat);
  } else {
    w.begin_struct();
    w.field_i32(1, kFlba);
    w.field_i32(2, 2);
    w.field_i32(3, kRequired);
    w.field_binary(4, "element");
    w.begin_struct_field(10);
    w.begin_struct_field(15);
    w.end_struct();
    w.end_struct();
    w.end_struct();
  }

  w.field_i64(3, static_cast<int64_t>(num_rows));

  w.begin_list_field(4, CType::kStruct, groups.size());
  for (size_t g = 0; g < groups.size(); ++g) {
    w.begin_struct();
    w.begin_list_field(1, CType::kStruct, groups[g].size());
    int64_t total = 0;
    for (const auto& c : groups[g]) {
      total += c.size;
      w.begin_struct();
      w.field_i64(2, c.offset);
      w.begin_struct_field(3);
      w.field_i32(1, c.type);
      w.begin_list_field(2, CType::kI32, c.encodings.size());
      for (int32_t e : c.encodings) w.list_i32(e);
      w.begin_list_field(3, CType::kBinary, c.path.size());
      for (const auto& p : c.path) w.list_binary(p);
      w.field_i32(4, 0);  // UNCOMPRESSED
      w.field_i64(5, c.num_values);
      w.field_i64(6, c.size);
      w.field_i64(7, c.size);
      w.field_i64(9, c.offset);
      w.end_struct();
      w.end_struct();
    }
    w.field_i64(2, total);
    w.field_i64(3, static_cast<int64_t>(group_rows[g]));
    w.field_i64(5, groups[g].empty() ? 0 : groups[g].front().offset);
    w.field_i64(6, total);
    w.end_struct();
  }

  const std::array<std::pair<const char*, std::string>, 3> kv = {{
      {"tilescout.model_id", schema.model_id},
      {"tilescout.dim", std::to_string(schema.dim)},
      {"tilescout.dtype", std::string(models::to_string(schema.dtype))},
  }};
  w.begin_list_field(5, CType::kStruct, kv.size());
  for (const auto& [k, v] : kv) {
    w.begin_struct();
    w.field_binary(1, k);
    w.field_binary(2, v);
    w.end_struct();
  }
  w.field_binary(6, "tilescout");
  w.stop();
  return out;
}

// ---- decoding ----

class LevelDecoder {
 public:
  LevelDecoder(std::span<const uint8_t> data, LeReader& ctx) : data_(data), ctx_(ctx) {}

  // Returns the next 1-bit level.
  uint8_t next() {
    while (run_left_ == 0) start_run();
    --run_left_;
    if (rle_) return rle_value_;
    const uint8_t v = (data_[bp_pos_ + (bp_index_ >> 3)] >> (bp_index_ & 7)) & 1;
    ++bp_index_;
    return v;
  }

 private:
  uint64_t varint() {
    uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      if (pos_ >= data_.size()) ctx_.fail("truncated level data");
      const uint8_t b = data_[pos_++];
      v |= static_cast<uint64_t>(b & 0x7F) << shift;
      if ((b & 0x80) == 0) return v;
    }
    ctx_.fail("bad level varint");
  }

  void start_run() {
    const uint64_t h = varint();
    if ((h & 1) == 0) {
      rle_ = true;
      run_left_ = h >> 1;
      if (pos_ >= data_.size()) ctx_.fail("truncated RLE run");
      rle_value_ = data_[pos_++];
    } else {
      rle_ = false;
      const uint64_t groups = h >> 1;
      run_left_ = groups * 8;
      if (groups > data_.size() - pos_) ctx_.fail("truncated bit-packed run");
      bp_pos_ = pos_;
      bp_index_ = 0;
      pos_ += groups;  // bit width 1: one byte per group of 8
    }
  }

  std::span<const uint8_t> data_;
  LeReader& ctx_;
  size_t pos_ = 0;
  uint64_t run_left_ = 0;
  bool rle_ = true;
  uint8_t rle_value_ = 0;
  size_t bp_pos_ = 0;
  uint64_t bp_index_ = 0;
};

std::span<const uint8_t> read_levels(LeReader& rd) {
  const uint32_t len = rd.get<uint32_t>();
  return rd.get_bytes(len);
}

// Decodes the pages of one column chunk starting at rd.pos() until
// `expected_values` values were produced.
void decode_column(LeReader& rd, size_t column, const ShardSchema& schema, uint64_t nrows,
                   uint64_t first_index, Columns& cols) {
  const uint64_t expected =
      column == 6 ? nrows * static_cast<uint64_t>(schema.dim) : nrows;
  uint64_t produced = 0;
  uint64_t record_in_group = 0;
  uint64_t elems_in_record = 0;
  const size_t elem_size = models::dtype_size(schema.dtype);

  while (produced < expected) {
    size_t header_len = 0;
    const size_t start = rd.pos();
    std::span<const uint8_t> tail = rd.get_bytes(rd.remaining());
    rd.seek(start);
    const thrift::Value header = thrift::read_struct(tail, header_len);
    rd.get_bytes(header_len);

    const int64_t page_type = header.at(1).i;
    const int64_t uncompressed = header.at(2).i;
    const int64_t compressed = header.at(3).i;
    if (page_type != kDataPage) {
      rd.fail("column " + std::to_string(column) + ": unsupported page type " +
              std::to_string(page_type));
    }
    if (uncompressed != compressed) rd.fail("compressed pages are not supported");
    if (compressed < 0) rd.fail("negative page size");
    auto page = rd.get_bytes(static_cast<size_t>(compressed));
    if (header.has(4)) {
      const uint32_t want = static_cast<uint32_t>(header.at(4).i);
      const uint32_t got =
          static_cast<uint32_t>(crc32(0L, page.data(), static_cast<uInt>(page.size())));
      if (want != got) {
        throw Error(ErrorCode::kChecksumMismatch,
                    "shard " + schema.shard_id + ": page CRC mismatch in column " +
                        std::to_string(column));
      }
    }
    const thrift::Value& dph = header.at(5);
    const uint64_t num_values = static_cast<uint64_t>(dph.at(1).i);
    if (dph.at(2).i != kPlain) rd.fail("only PLAIN encoding is supported");
    if (num_values > expected - produced) rd.fail("page holds more values than expected");

    LeReader pr(page, "shard " + schema.shard_id + " column " + std::to_string(column));
    if (column < 6) {
      for (uint64_t k = 0; k < num_values; ++k) {
        switch (column) {
          case 0: cols.row.push_back(pr.get<int32_t>()); break;
          case 1: cols.col.push_back(pr.get<uint32_t>()); break;
          case 2: cols.lat.push_back(pr.get<double>()); break;
          case 3: cols.lon.push_back(pr.get<double>()); break;
          case 4: cols.acquired_at.push_back(pr.get<int64_t>()); break;
          case 5: {
            const uint32_t len = pr.get<uint32_t>();
            auto s = pr.get_bytes(len);
            cols.product.emplace_back(s.begin(), s.end());
            break;
          }
        }
      }
    } else {
      auto rep_bytes = read_levels(pr);
      auto def_bytes = read_levels(pr);
      LevelDecoder rep(rep_bytes, pr);
      LevelDecoder def(def_bytes, pr);
      for (uint64_t k = 0; k < num_values; ++k) {
        const uint8_t r = rep.next();
        const uint8_t d = def.next();
        if (d != 1) pr.fail("null or empty embedding lists are not supported");
        if (r == 0) {
          if (produced + k > 0 && elems_in_record != schema.dim) {
            throw Error(ErrorCode::kDimensionMismatch,
                        "shard " + schema.shard_id + ": decode error at record " +
                            std::to_string(first_index + record_in_group) +
                            ": embedding has " + std::to_string(elems_in_record) +
                            " components, manifest dim " + std::to_string(schema.dim));
          }
          if (produced + k > 0) ++record_in_group;
          elems_in_record = 0;
        }
        ++elems_in_record;
      }
      auto values = pr.get_bytes(num_values * elem_size);
      cols.embedding.insert(cols.embedding.end(), values.begin(), values.end());
    }
    if (pr.remaining() != 0) pr.fail("trailing bytes in data page");
    produced += num_values;
  }
  if (column == 6 && nrows > 0 && elems_in_record != schema.dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "shard " + schema.shard_id + ": decode error at record " +
                    std::to_string(first_index + record_in_group) + ": embedding has " +
                    std::to_string(elems_in_record) + " components, manifest dim " +
                    std::to_string(schema.dim));
  }
}

std::vector<EmbeddingRecord> assemble(Columns&& cols, const ShardSchema& schema, uint64_t n) {
  const size_t vec_len = static_cast<size_t>(schema.dim) * models::dtype_size(schema.dtype);
  std::vector<EmbeddingRecord> out(n);
  for (uint64_t i = 0; i < n; ++i) {
    auto& r = out[i];
    r.cell = {cols.row[i], cols.col[i]};
    r.lat = cols.lat[i];
    r.lon = cols.lon[i];
    r.acquired_at = cols.acquired_at[i];
    r.source_product = std::move(cols.product[i]);
    r.model_id = schema.model_id;
    r.dtype = schema.dtype;
    auto first = cols.embedding.begin() + static_cast<ptrdiff_t>(i * vec_len);
    r.vector_bytes.assign(first, first + static_cast<ptrdiff_t>(vec_len));
  }
  return out;
}

void check_leaf_schema(const thrift::Value& meta, const ShardSchema& schema, LeReader& rd) {
  const auto& elems = meta.at(2).list;
  if (elems.size() != 10) {
    rd.fail("unexpected schema with " + std::to_string(elems.size()) + " elements");
  }
  for (size_t k = 0; k < kFlatNames.size(); ++k) {
    if (elems[k + 1].at(4).bin != kFlatNames[k]) {
      rd.fail("unexpected column '" + elems[k + 1].at(4).bin + "'");
    }
  }
  const auto& leaf = elems[9];
  const int64_t type = leaf.int_or(1, -1);
  const bool ok = schema.dtype == models::Dtype::kFloat32
                      ? type == kFloat
                      : (type == kFlba && leaf.int_or(2, 0) == 2);
  if (!ok) {
    throw Error(ErrorCode::kCorruptData,
                "shard " + schema.shard_id + ": embedding element type disagrees with dtype " +
                    std::string(models::to_string(schema.dtype)));
  }
}

}  // namespace

EncodedShard encode_parquet(std::span<const EmbeddingRecord> records, const ShardSchema& schema,
                            uint64_t row_group_size) {
  EncodedShard out;
  auto& file = out.bytes;
  file.insert(file.end(), kParMagic, kParMagic + 4);

  std::vector<std::vector<ChunkMeta>> groups;
  std::vector<uint64_t> group_rows;
  const std::array<int32_t, 6> flat_types = {kInt32, kInt32, kDouble, kDouble, kInt64, kByteArray};
  for (auto [first, count] : partition_groups(records.size(), row_group_size)) {
    auto rs = records.subspan(first, count);
    RowGroup g;
    g.first_record_index = first;
    g.record_count = count;
    g.byte_offset = file.size();
    std::vector<ChunkMeta> chunks;
    for (size_t c = 0; c < kNumColumns; ++c) {
      const int64_t offset = static_cast<int64_t>(file.size());
      if (c < 6) {
        write_page(file, flat_page(rs, c), static_cast<int32_t>(count));
        chunks.push_back({flat_types[c], {kFlatNames[c]}, {kPlain}, static_cast<int64_t>(count),
                          offset, static_cast<int64_t>(file.size()) - offset});
      } else {
        const int64_t nv = static_cast<int64_t>(count) * schema.dim;
        write_page(file, embedding_page(rs, schema.dim), static_cast<int32_t>(nv));
        chunks.push_back({schema.dtype == models::Dtype::kFloat32 ? kFloat : kFlba,
                          {"embedding", "list", "element"},
                          {kPlain, kRle},
                          nv,
                          offset,
                          static_cast<int64_t>(file.size()) - offset});
      }
    }
    g.byte_length = file.size() - g.byte_offset;
    out.row_groups.push_back(g);
    groups.push_back(std::move(chunks));
    group_rows.push_back(count);
  }

  const auto footer = file_metadata(schema, records.size(), groups, group_rows);
  file.insert(file.end(), footer.begin(), footer.end());
  LeWriter w(file);
  w.put<uint32_t>(static_cast<uint32_t>(footer.size()));
  w.put_bytes(std::span<const uint8_t>(kParMagic, 4));
  return out;
}

std::vector<EmbeddingRecord> decode_parquet_file(std::span<const uint8_t> bytes,
                                                 const ShardSchema& schema,
                                                 uint64_t record_count) {
  LeReader rd(bytes, "shard " + schema.shard_id);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kParMagic, 4) != 0 ||
      std::memcmp(bytes.data() + bytes.size() - 4, kParMagic, 4) != 0) {
    rd.fail("truncated body or missing PAR1 magic");
  }
  uint32_t footer_len = 0;
  std::memcpy(&footer_len, bytes.data() + bytes.size() - 8, 4);
  if (footer_len > bytes.size() - 12) rd.fail("footer length out of range");
  const auto footer = bytes.subspan(bytes.size() - 8 - footer_len, footer_len);
  size_t consumed = 0;
  const thrift::Value meta = thrift::read_struct(footer, consumed);

  check_leaf_schema(meta, schema, rd);
  const auto num_rows = static_cast<uint64_t>(meta.at(3).i);
  if (num_rows != record_count) {
    rd.fail("file holds " + std::to_string(num_rows) + " rows, manifest says " +
            std::to_string(record_count));
  }

  std::vector<EmbeddingRecord> out;
  out.reserve(num_rows);
  uint64_t first = 0;
  static const std::vector<thrift::Value> kNoGroups;
  for (const auto& group : meta.has(4) ? meta.at(4).list : kNoGroups) {
    const auto nrows = static_cast<uint64_t>(group.at(3).i);
    const auto& chunks = group.at(1).list;
    if (chunks.size() != kNumColumns) rd.fail("row group has wrong column count");
    Columns cols;
    for (size_t c = 0; c < kNumColumns; ++c) {
      const auto& cm = chunks[c].at(3);
      if (cm.at(4).i != 0) rd.fail("compressed column chunks are not supported");
      const auto offset = static_cast<uint64_t>(cm.at(9).i);
      const auto size = static_cast<uint64_t>(cm.at(7).i);
      if (offset > bytes.size() || size > bytes.size() - offset) {
        rd.fail("column chunk outside file");
      }
      LeReader cr(bytes.subspan(offset, size), "shard " + schema.shard_id);
      decode_column(cr, c, schema, nrows, first, cols);
    }
    auto records = assemble(std::move(cols), schema, nrows);
    std::move(records.begin(), records.end(), std::back_inserter(out));
    first += nrows;
  }
  if (first != num_rows) rd.fail("row groups do not cover all rows");
  return out;
}

std::vector<EmbeddingRecord> decode_parquet_group(std::span<const uint8_t> bytes,
                                                  const ShardSchema& schema,
                                                  const RowGroup& group) {
  LeReader rd(bytes, "shard " + schema.shard_id + " row group at offset " +
                         std::to_string(group.byte_offset));
  Columns cols;
  for (size_t c = 0; c < kNumColumns; ++c) {
    decode_column(rd, c, schema, group.record_count, group.first_record_index, cols);
  }
  if (rd.remaining() != 0) rd.fail("row group length disagrees with its column chunks");
  return assemble(std::move(cols), schema, group.record_count);
}

}  // namespace tilescout::store::detail
