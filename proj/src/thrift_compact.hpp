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

// Minimal Thrift compact protocol, enough for Parquet footers and page
// headers. The reader decodes into a generic tree so unknown fields written
// by other Parquet implementations are skipped naturally.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tilescout::store::thrift {

enum class CType : uint8_t {
  kStop = 0,
  kBoolTrue = 1,
  kBoolFalse = 2,
  kByte = 3,
  kI16 = 4,
  kI32 = 5,
  kI64 = 6,
  kDouble = 7,
  kBinary = 8,
  kList = 9,
  kSet = 10,
  kMap = 11,
  kStruct = 12,
};

class CompactWriter {
 public:
  explicit CompactWriter(std::vector<uint8_t>& out) : out_(out) {}

  void field_i32(int16_t id, int32_t v);
  void field_i64(int16_t id, int64_t v);
  void field_byte(int16_t id, int8_t v);
  void field_bool(int16_t id, bool v);
  void field_binary(int16_t id, std::string_view v);

  void begin_struct_field(int16_t id);
  /// For structs that are list elements (no field header).
  void begin_struct();
  void end_struct();

  void begin_list_field(int16_t id, CType elem, size_t size);
  void list_i32(int32_t v) { varint(zigzag(v)); }
  void list_binary(std::string_view v);

  /// Terminates the top-level struct.
  void stop() { out_.push_back(0); }

 private:
  void field_header(int16_t id, CType type);
  void varint(uint64_t v);
  static uint64_t zigzag(int64_t v) {
    return (static_cast<uint64_t>(v) << 1) ^ static_cast<uint64_t>(v >> 63);
  }

  std::vector<uint8_t>& out_;
  int16_t last_field_ = 0;
  std::vector<int16_t> stack_;
};

struct Value {
  CType type = CType::kStop;
  int64_t i = 0;
  double d = 0.0;
  std::string bin;
  std::vector<Value> list;
  std::map<int16_t, Value> fields;

  bool has(int16_t id) const { return fields.count(id) != 0; }
  /// Throws Error(kCorruptData) if absent.
  const Value& at(int16_t id) const;
  int64_t int_or(int16_t id, int64_t fallback) const;
};

/// Decodes one struct starting at `data[0]`; `consumed` receives its length.
Value read_struct(std::span<const uint8_t> data, size_t& consumed);

}  // namespace tilescout::store::thrift
