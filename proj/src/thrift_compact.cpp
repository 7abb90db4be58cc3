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

#include "thrift_compact.hpp"

#include <cstring>

#include "tilescout/error.hpp"

namespace tilescout::store::thrift {

void CompactWriter::varint(uint64_t v) {
  while (v >= 0x80) {
    out_.push_back(static_cast<uint8_t>(v | 0x80));
    v >>= 7;
  }
  out_.push_back(static_cast<uint8_t>(v));
}

void CompactWriter::field_header(int16_t id, CType type) {
  const int delta = id - last_field_;
  if (delta > 0 && delta <= 15) {
    out_.push_back(static_cast<uint8_t>((delta << 4) | static_cast<uint8_t>(type)));
  } else {
    out_.push_back(static_cast<uint8_t>(type));
    varint(zigzag(id));
  }
  last_field_ = id;
}

void CompactWriter::field_i32(int16_t id, int32_t v) {
  field_header(id, CType::kI32);
  varint(zigzag(v));
}

void CompactWriter::field_i64(int16_t id, int64_t v) {
  field_header(id, CType::kI64);
  varint(zigzag(v));
}

void CompactWriter::field_byte(int16_t id, int8_t v) {
  field_header(id, CType::kByte);
  out_.push_back(static_cast<uint8_t>(v));
}

void CompactWriter::field_bool(int16_t id, bool v) {
  field_header(id, v ? CType::kBoolTrue : CType::kBoolFalse);
}

void CompactWriter::field_binary(int16_t id, std::string_view v) {
  field_header(id, CType::kBinary);
  varint(v.size());
  out_.insert(out_.end(), v.begin(), v.end());
}

void CompactWriter::begin_struct_field(int16_t id) {
  field_header(id, CType::kStruct);
  begin_struct();
}

void CompactWriter::begin_struct() {
  stack_.push_back(last_field_);
  last_field_ = 0;
}

void CompactWriter::end_struct() {
  out_.push_back(0);
  last_field_ = stack_.back();
  stack_.pop_back();
}

void CompactWriter::begin_list_field(int16_t id, CType elem, size_t size) {
  field_header(id, CType::kList);
  if (size < 15) {
    out_.push_back(static_cast<uint8_t>((size << 4) | static_cast<uint8_t>(elem)));
  } else {
    out_.push_back(static_cast<uint8_t>(0xF0 | static_cast<uint8_t>(elem)));
    varint(size);
  }
}

void CompactWriter::list_binary(std::string_view v) {
  varint(v.size());
  out_.insert(out_.end(), v.begin(), v.end());
}

const Value& Value::at(int16_t id) const {
  auto it = fields.find(id);
  if (it == fields.end()) {
    throw Error(ErrorCode::kCorruptData,
                "parquet metadata: required field " + std::to_string(id) + " missing");
  }
  return it->second;
}

int64_t Value::int_or(int16_t id, int64_t fallback) const {
  auto it = fields.find(id);
  return it == fields.end() ? fallback : it->second.i;
}

namespace {

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> data) : data_(data) {}

  size_t pos() const { return pos_; }

  uint8_t byte() {
    if (pos_ >= data_.size()) fail("truncated thrift data");
    return data_[pos_++];
  }

  uint64_t varint() {
    uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      const uint8_t b = byte();
      v |= static_cast<uint64_t>(b & 0x7F) << shift;
      if ((b & 0x80) == 0) return v;
    }
    fail("varint too long");
  }

  int64_t zigzag() {
    const uint64_t v = varint();
    return static_cast<int64_t>(v >> 1) ^ -static_cast<int64_t>(v & 1);
  }

  Value value(CType type, int depth) {
    if (depth > 64) fail("thrift nesting too deep");
    Value v;
    v.type = type;
    switch (type) {
      case CType::kBoolTrue: v.i = 1; break;
      case CType::kBoolFalse: v.i = 0; break;
      case CType::kByte: v.i = static_cast<int8_t>(byte()); break;
      case CType::kI16:
      case CType::kI32:
      case CType::kI64: v.i = zigzag(); break;
      case CType::kDouble: {
        if (data_.size() - pos_ < 8) fail("truncated double");
        std::memcpy(&v.d, data_.data() + pos_, 8);
        pos_ += 8;
        break;
      }
      case CType::kBinary: {
        const uint64_t n = varint();
        if (n > data_.size() - pos_) fail("truncated binary");
        v.bin.assign(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        break;
      }
      case CType::kList:
      case CType::kSet: {
        const uint8_t h = byte();
        uint64_t size = h >> 4;
        if (size == 15) size = varint();
        const auto elem = static_cast<CType>(h & 0x0F);
        if (size > data_.size()) fail("implausible list size");
        v.list.reserve(size);
        for (uint64_t k = 0; k < size; ++k) {
          if (elem == CType::kBoolTrue || elem == CType::kBoolFalse) {
            Value b;
            b.type = elem;
            b.i = byte() == 1 ? 1 : 0;
            v.list.push_back(std::move(b));
          } else {
            v.list.push_back(value(elem, depth + 1));
          }
        }
        break;
      }
      case CType::kStruct: {
        int16_t last = 0;
        while (true) {
          const uint8_t h = byte();
          if (h == 0) break;
          const auto ft = static_cast<CType>(h & 0x0F);
          const int delta = h >> 4;
          const int16_t id = delta != 0 ? static_cast<int16_t>(last + delta)
                                        : static_cast<int16_t>(zigzag());
          last = id;
          v.fields[id] = value(ft, depth + 1);
        }
        break;
      }
      default:
        fail("unsupported thrift type " + std::to_string(static_cast<int>(type)));
    }
    return v;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::kCorruptData, "parquet metadata: " + what);
  }

 private:
  std::span<const uint8_t> data_;
  size_t pos_ = 0;
};

}  // namespace

Value read_struct(std::span<const uint8_t> data, size_t& consumed) {
  Reader r(data);
  Value v = r.value(CType::kStruct, 0);
  consumed = r.pos();
  return v;
}

}  // namespace tilescout::store::thrift
