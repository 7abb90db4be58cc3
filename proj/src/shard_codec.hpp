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

#include <span>
#include <string>
#include <vector>

#include "tilescout/store.hpp"

namespace tilescout::store::detail {

struct ShardSchema {
  std::string shard_id;
  std::string model_id;
  uint32_t dim = 0;
  models::Dtype dtype = models::Dtype::kFloat32;
};

struct EncodedShard {
  std::vector<uint8_t> bytes;
  std::vector<RowGroup> row_groups;
};

std::vector<std::pair<uint64_t, uint64_t>> partition_groups(uint64_t n, uint64_t group_size);

EncodedShard encode_eesh1(std::span<const EmbeddingRecord> records, const ShardSchema& schema,
                          uint64_t row_group_size);
/// Decodes a whole eesh1 file (checksum already verified by the caller if
/// requested).
std::vector<EmbeddingRecord> decode_eesh1_file(std::span<const uint8_t> bytes,
                                               const ShardSchema& schema, uint64_t record_count,
                                               bool verify_trailer);
std::vector<EmbeddingRecord> decode_eesh1_group(std::span<const uint8_t> bytes,
                                                const ShardSchema& schema,
                                                const RowGroup& group);

EncodedShard encode_parquet(std::span<const EmbeddingRecord> records, const ShardSchema& schema,
                            uint64_t row_group_size);
std::vector<EmbeddingRecord> decode_parquet_file(std::span<const uint8_t> bytes,
                                                 const ShardSchema& schema,
                                                 uint64_t record_count);
/// Decodes one row group from its contiguous column-chunk bytes alone.
std::vector<EmbeddingRecord> decode_parquet_group(std::span<const uint8_t> bytes,
                                                  const ShardSchema& schema,
                                                  const RowGroup& group);

}  // namespace tilescout::store::detail
