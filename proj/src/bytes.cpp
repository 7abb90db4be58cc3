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

#include "tilescout/bytes.hpp"

#include <openssl/evp.h>

#include "tilescout/error.hpp"

namespace tilescout::store {

std::vector<uint8_t> MemorySource::read(uint64_t offset, uint64_t length) {
  if (offset > data_.size() || length > data_.size() - offset) {
    throw Error(ErrorCode::kIoError, name_ + ": range [" + std::to_string(offset) +
                                         ", +" + std::to_string(length) +
                                         ") past end of " +
                                         std::to_string(data_.size()) + " bytes");
  }
  return {data_.begin() + static_cast<ptrdiff_t>(offset),
          data_.begin() + static_cast<ptrdiff_t>(offset + length)};
}

FileSource::FileSource(const std::filesystem::path& path)
    : path_(path), in_(path, std::ios::binary) {
  if (!in_) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::error_code ec;
  size_ = std::filesystem::file_size(path, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot stat " + path.string());
}

std::vector<uint8_t> FileSource::read(uint64_t offset, uint64_t length) {
  if (offset > size_ || length > size_ - offset) {
    throw Error(ErrorCode::kIoError, path_.string() + ": range past end of file");
  }
  std::vector<uint8_t> out(length);
  std::lock_guard lock(mu_);
  in_.clear();
  in_.seekg(static_cast<std::streamoff>(offset));
  in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(length));
  if (static_cast<uint64_t>(in_.gcount()) != length) {
    throw Error(ErrorCode::kIoError, path_.string() + ": short read");
  }
  return out;
}

FileSink::FileSink(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::kIoError, "cannot create " + path.string());
}

void FileSink::write(std::span<const uint8_t> bytes) {
  out_.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  if (!out_) throw Error(ErrorCode::kIoError, "write failed on " + path_.string());
}

void FileSink::close() {
  out_.close();
  if (!out_) throw Error(ErrorCode::kIoError, "close failed on " + path_.string());
}

Sha256Digest sha256(std::span<const uint8_t> bytes) {
  Sha256Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != out.size()) {
    throw Error(ErrorCode::kIoError, "SHA-256 computation failed");
  }
  return out;
}

std::string to_hex(std::span<const uint8_t> bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    s.push_back(kDigits[b >> 4]);
    s.push_back(kDigits[b & 0xF]);
  }
  return s;
}

Sha256Digest digest_from_hex(const std::string& hex) {
  if (hex.size() != 64) throw Error(ErrorCode::kParseError, "checksum must be 64 hex chars");
  auto nibble = [&](char c) -> uint8_t {
    if (c >= '0' && c <= '9') return static_cast<uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<uint8_t>(c - 'A' + 10);
    throw Error(ErrorCode::kParseError, "bad hex digit in checksum");
  };
  Sha256Digest d{};
  for (size_t i = 0; i < 32; ++i) {
    d[i] = static_cast<uint8_t>((nibble(hex[2 * i]) << 4) | nibble(hex[2 * i + 1]));
  }
  return d;
}

}  // namespace tilescout::store
