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

// Byte sources and sinks for shard I/O. Sources are random-access so that
// row groups can be fetched without touching the rest of a shard.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace tilescout::store {

class ByteSource {
 public:
  virtual ~ByteSource() = default;
  virtual uint64_t size() const = 0;
  /// Reads exactly `length` bytes at `offset`; throws Error(kIoError) on a
  /// short read.
  virtual std::vector<uint8_t> read(uint64_t offset, uint64_t length) = 0;
  virtual std::string describe() const = 0;
};

class MemorySource : public ByteSource {
 public:
  explicit MemorySource(std::vector<uint8_t> data, std::string name = "memory")
      : data_(std::move(data)), name_(std::move(name)) {}

  uint64_t size() const override { return data_.size(); }
  std::vector<uint8_t> read(uint64_t offset, uint64_t length) override;
  std::string describe() const override { return name_; }

 private:
  std::vector<uint8_t> data_;
  std::string name_;
};

class FileSource : public ByteSource {
 public:
  explicit FileSource(const std::filesystem::path& path);

  uint64_t size() const override { return size_; }
  std::vector<uint8_t> read(uint64_t offset, uint64_t length) override;
  std::string describe() const override { return path_.string(); }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
  uint64_t size_ = 0;
  std::mutex mu_;
};

struct ByteRange {
  uint64_t offset;
  uint64_t length;
  bool operator==(const ByteRange&) const = default;
};

/// Forwards to another source and records every requested range.
class RecordingSource : public ByteSource {
 public:
  explicit RecordingSource(ByteSource& inner) : inner_(inner) {}

  uint64_t size() const override { return inner_.size(); }
  std::vector<uint8_t> read(uint64_t offset, uint64_t length) override {
    ranges_.push_back({offset, length});
    return inner_.read(offset, length);
  }
  std::string describe() const override { return inner_.describe(); }

  const std::vector<ByteRange>& ranges() const { return ranges_; }
  void clear() { ranges_.clear(); }

 private:
  ByteSource& inner_;
  std::vector<ByteRange> ranges_;
};

class ByteSink {
 public:
  virtual ~ByteSink() = default;
  virtual void write(std::span<const uint8_t> bytes) = 0;
  virtual void close() {}
};

class MemorySink : public ByteSink {
 public:
  void write(std::span<const uint8_t> bytes) override {
    data_.insert(data_.end(), bytes.begin(), bytes.end());
  }
  const std::vector<uint8_t>& data() const { return data_; }
  std::vector<uint8_t> take() { return std::move(data_); }

 private:
  std::vector<uint8_t> data_;
};

class FileSink : public ByteSink {
 public:
  explicit FileSink(const std::filesystem::path& path);
  void write(std::span<const uint8_t> bytes) override;
  void close() override;

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

using Sha256Digest = std::array<uint8_t, 32>;

Sha256Digest sha256(std::span<const uint8_t> bytes);
std::string to_hex(std::span<const uint8_t> bytes);
Sha256Digest digest_from_hex(const std::string& hex);

}  // namespace tilescout::store
