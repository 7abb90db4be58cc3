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

#include "tilescout/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "shard_codec.hpp"
#include "tilescout/error.hpp"
#include "tilescout/half.hpp"

namespace tilescout::grid {

using nlohmann::json;

void to_json(json& j, const GridSpec& g) {
  j = json{{"cell_size_km", g.cell_size_km},
           {"earth_radius_km", g.earth_radius_km},
           {"subsample_stride", g.subsample_stride},
           {"subsample_anchor", {g.row_offset, g.col_offset}},
           {"uniform_cols", g.uniform_cols}};
}

void from_json(const json& j, GridSpec& g) {
  g.cell_size_km = j.at("cell_size_km").get<double>();
  g.earth_radius_km = j.at("earth_radius_km").get<double>();
  g.subsample_stride = j.at("subsample_stride").get<int>();
  const auto& anchor = j.at("subsample_anchor");
  g.row_offset = anchor.at(0).get<int>();
  g.col_offset = anchor.at(1).get<int>();
  g.uniform_cols = j.value("uniform_cols", 0);
  g.validate();
}

}  // namespace tilescout::grid

namespace tilescout::store {

using nlohmann::json;

std::string_view to_string(ShardFormat f) {
  return f == ShardFormat::kParquet ? "parquet" : "eesh1";
}

ShardFormat parse_shard_format(std::string_view s) {
  if (s == "parquet") return ShardFormat::kParquet;
  if (s == "eesh1") return ShardFormat::kEesh1;
  throw Error(ErrorCode::kParseError, "unknown shard format '" + std::string(s) + "'");
}

std::string_view file_extension(ShardFormat f) {
  return f == ShardFormat::kParquet ? ".parquet" : ".eesh1";
}

std::vector<float> EmbeddingRecord::to_float32() const {
  const uint32_t n = dim();
  std::vector<float> out(n);
  if (dtype == models::Dtype::kFloat32) {
    std::memcpy(out.data(), vector_bytes.data(), n * sizeof(float));
  } else {
    for (uint32_t i = 0; i < n; ++i) {
      uint16_t h;
      std::memcpy(&h, vector_bytes.data() + 2 * i, 2);
      out[i] = search::f16_to_f32(h);
    }
  }
  return out;
}

std::vector<uint8_t> pack_vector(models::Dtype dtype, std::span<const float> values) {
  std::vector<uint8_t> out(values.size() * models::dtype_size(dtype));
  if (dtype == models::Dtype::kFloat32) {
    std::memcpy(out.data(), values.data(), out.size());
  } else {
    for (size_t i = 0; i < values.size(); ++i) {
      const uint16_t h = search::f32_to_f16(values[i]);
      std::memcpy(out.data() + 2 * i, &h, 2);
    }
  }
  return out;
}

void BBox::extend(double lat, double lon) {
  lat_min = std::min(lat_min, lat);
  lat_max = std::max(lat_max, lat);
  lon_min = std::min(lon_min, lon);
  lon_max = std::max(lon_max, lon);
}

void ShardManifest::validate() const {
  auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kCorruptData, "shard manifest " + shard_id + ": " + what);
  };
  uint64_t next_record = 0;
  uint64_t min_offset = 0;
  for (const auto& g : row_groups) {
    if (g.first_record_index != next_record) fail("row groups do not partition the records");
    if (g.record_count == 0) fail("empty row group");
    if (g.byte_offset < min_offset) fail("row-group byte ranges overlap or descend");
    next_record += g.record_count;
    min_offset = g.byte_offset + g.byte_length;
  }
  if (next_record != record_count) fail("row-group counts do not sum to record_count");
  if (checksum.size() != 64) fail("checksum must be 64 hex digits");
}

namespace {

detail::ShardSchema schema_of(const ShardManifest& m) {
  return {m.shard_id, m.model_id, m.dim, m.dtype};
}

}  // namespace

namespace detail {

std::vector<std::pair<uint64_t, uint64_t>> partition_groups(uint64_t n, uint64_t group_size) {
  std::vector<std::pair<uint64_t, uint64_t>> out;
  for (uint64_t first = 0; first < n; first += group_size) {
    out.emplace_back(first, std::min(group_size, n - first));
  }
  return out;
}

}  // namespace detail

void to_json(json& j, const ShardManifest& m) {
  json groups = json::array();
  for (const auto& g : m.row_groups) {
    groups.push_back({{"first_record_index", g.first_record_index},
                      {"record_count", g.record_count},
                      {"byte_offset", g.byte_offset},
                      {"byte_length", g.byte_length}});
  }
  j = json{{"shard_id", m.shard_id},
           {"model_id", m.model_id},
           {"dim", m.dim},
           {"dtype", models::to_string(m.dtype)},
           {"record_count", m.record_count},
           {"bbox",
            {{"lat_min", m.bbox.lat_min},
             {"lat_max", m.bbox.lat_max},
             {"lon_min", m.bbox.lon_min},
             {"lon_max", m.bbox.lon_max}}},
           {"row_groups", groups},
           {"checksum", m.checksum},
           {"format", to_string(m.format)},
           {"file", m.file}};
}

void from_json(const json& j, ShardManifest& m) {
  try {
    m.shard_id = j.at("shard_id").get<std::string>();
    m.model_id = j.at("model_id").get<std::string>();
    m.dim = j.at("dim").get<uint32_t>();
    m.dtype = models::parse_dtype(j.at("dtype").get<std::string>());
    m.record_count = j.at("record_count").get<uint64_t>();
    const auto& b = j.at("bbox");
    m.bbox = {b.at("lat_min").get<double>(), b.at("lat_max").get<double>(),
              b.at("lon_min").get<double>(), b.at("lon_max").get<double>()};
    m.row_groups.clear();
    for (const auto& g : j.at("row_groups")) {
      m.row_groups.push_back({g.at("first_record_index").get<uint64_t>(),
                              g.at("record_count").get<uint64_t>(),
                              g.at("byte_offset").get<uint64_t>(),
                              g.at("byte_length").get<uint64_t>()});
    }
    m.checksum = j.at("checksum").get<std::string>();
    m.format = parse_shard_format(j.at("format").get<std::string>());
    m.file = j.value("file", m.shard_id + std::string(file_extension(m.format)));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("bad shard manifest: ") + e.what());
  }
}

ShardManifest write_shard(std::span<const EmbeddingRecord> records, ByteSink& sink,
                          const WriteOptions& options) {
  if (options.row_group_size < 1) {
    throw Error(ErrorCode::kInvalidArgument, "row_group_size must be >= 1");
  }
  detail::ShardSchema schema{options.shard_id, options.model_id, options.dim, options.dtype};
  if (!records.empty()) {
    if (schema.model_id.empty()) schema.model_id = records.front().model_id;
    if (schema.dim == 0) {
      schema.dim = records.front().dim();
      schema.dtype = records.front().dtype;
    }
  }
  if (schema.dim == 0) throw Error(ErrorCode::kInvalidArgument, "shard dim must be > 0");

  ShardManifest m;
  m.shard_id = options.shard_id;
  m.model_id = schema.model_id;
  m.dim = schema.dim;
  m.dtype = schema.dtype;
  m.record_count = records.size();
  m.format = options.format;
  m.file = options.shard_id + std::string(file_extension(options.format));

  const size_t vec_len = static_cast<size_t>(schema.dim) * models::dtype_size(schema.dtype);
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.model_id != schema.model_id) {
      throw Error(ErrorCode::kInvalidArgument,
                  "mixed models in one shard: '" + schema.model_id + "' and '" + r.model_id + "'");
    }
    if (r.dtype != schema.dtype || r.vector_bytes.size() != vec_len) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "record " + std::to_string(i) + " disagrees with shard dim/dtype");
    }
    if (i > 0 && !(records[i - 1].cell < r.cell)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "records not strictly sorted by (row, col) at index " + std::to_string(i));
    }
    m.bbox.extend(r.lat, r.lon);
  }

  detail::EncodedShard enc = options.format == ShardFormat::kEesh1
                                 ? detail::encode_eesh1(records, schema, options.row_group_size)
                                 : detail::encode_parquet(records, schema, options.row_group_size);
  m.row_groups = std::move(enc.row_groups);
  // eesh1 checksums its body (everything but the trailer); parquet the file.
  const std::span<const uint8_t> body =
      options.format == ShardFormat::kEesh1
          ? std::span<const uint8_t>(enc.bytes).first(enc.bytes.size() - 32)
          : std::span<const uint8_t>(enc.bytes);
  m.checksum = to_hex(sha256(body));
  sink.write(enc.bytes);
  sink.close();
  return m;
}

std::vector<EmbeddingRecord> read_shard(ByteSource& source, const ShardManifest& manifest,
                                        const ReadOptions& options) {
  manifest.validate();
  const auto bytes = source.read(0, source.size());
  if (options.verify_checksum) {
    const auto body = manifest.format == ShardFormat::kEesh1 && bytes.size() >= 32
                          ? std::span<const uint8_t>(bytes).first(bytes.size() - 32)
                          : std::span<const uint8_t>(bytes);
    if (to_hex(sha256(body)) != manifest.checksum) {
      throw Error(ErrorCode::kChecksumMismatch,
                  "checksum mismatch in shard " + manifest.shard_id + " (" +
                      source.describe() + ")");
    }
  }
  const auto schema = schema_of(manifest);
  if (manifest.format == ShardFormat::kEesh1) {
    if (options.verify_checksum && bytes.size() >= 32) {
      const Sha256Digest want = digest_from_hex(manifest.checksum);
      if (!std::equal(want.begin(), want.end(), bytes.end() - 32)) {
        throw Error(ErrorCode::kChecksumMismatch,
                    "checksum trailer mismatch in shard " + manifest.shard_id);
      }
    }
    return detail::decode_eesh1_file(bytes, schema, manifest.record_count,
                                     /*verify_trailer=*/false);
  }
  return detail::decode_parquet_file(bytes, schema, manifest.record_count);
}

std::vector<EmbeddingRecord> partial_fetch(ByteSource& source, const ShardManifest& manifest,
                                           std::span<const size_t> row_group_indices) {
  manifest.validate();
  std::set<size_t> wanted(row_group_indices.begin(), row_group_indices.end());
  for (size_t idx : wanted) {
    if (idx >= manifest.row_groups.size()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "row group " + std::to_string(idx) + " out of range for shard " +
                      manifest.shard_id + " with " +
                      std::to_string(manifest.row_groups.size()) + " groups");
    }
  }
  const auto schema = schema_of(manifest);
  std::vector<EmbeddingRecord> out;
  for (size_t idx : wanted) {
    const RowGroup& g = manifest.row_groups[idx];
    const auto bytes = source.read(g.byte_offset, g.byte_length);
    auto records = manifest.format == ShardFormat::kEesh1
                       ? detail::decode_eesh1_group(bytes, schema, g)
                       : detail::decode_parquet_group(bytes, schema, g);
    std::move(records.begin(), records.end(), std::back_inserter(out));
  }
  return out;
}

void CorpusManifest::validate() const {
  std::map<std::string, uint64_t> sums;
  for (const auto& s : shards) sums[s.model_id] += s.record_count;
  for (const auto& [model, total] : total_records) {
    if (sums[model] != total) {
      throw Error(ErrorCode::kCorruptData,
                  "corpus manifest: total_records for " + model + " is " + std::to_string(total) +
                      " but shards hold " + std::to_string(sums[model]));
    }
  }
  for (const auto& [model, sum] : sums) {
    if (!total_records.count(model)) {
      throw Error(ErrorCode::kCorruptData, "corpus manifest: no total for model " + model);
    }
  }
}

void to_json(json& j, const CorpusManifest& m) {
  j = json{{"format_version", 1},
           {"grid_spec", m.grid_spec},
           {"shards", m.shards},
           {"total_records", m.total_records},
           {"created_at", m.created_at}};
}

void from_json(const json& j, CorpusManifest& m) {
  try {
    m.grid_spec = j.at("grid_spec").get<grid::GridSpec>();
    m.shards = j.at("shards").get<std::vector<ShardManifest>>();
    m.total_records = j.at("total_records").get<std::map<std::string, uint64_t>>();
    m.created_at = j.value("created_at", int64_t{0});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("bad corpus manifest: ") + e.what());
  }
}

Corpus Corpus::open(const std::filesystem::path& path) {
  Corpus c;
  std::filesystem::path manifest_path = path;
  if (std::filesystem::is_directory(path)) manifest_path = path / kCorpusManifestName;
  c.dir_ = manifest_path.parent_path();
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open corpus manifest " + manifest_path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParseError,
                "corpus manifest " + manifest_path.string() + ": " + e.what());
  }
  c.manifest_ = j.get<CorpusManifest>();
  c.manifest_.validate();
  for (const auto& s : c.manifest_.shards) s.validate();
  return c;
}

std::filesystem::path Corpus::shard_path(const ShardManifest& shard) const {
  return dir_ / shard.file;
}

std::vector<std::string> Corpus::model_ids() const {
  std::vector<std::string> ids;
  for (const auto& [model, total] : manifest_.total_records) ids.push_back(model);
  return ids;
}

std::vector<const ShardManifest*> Corpus::shards_for(std::string_view model_id) const {
  std::vector<const ShardManifest*> out;
  for (const auto& s : manifest_.shards) {
    if (s.model_id == model_id) out.push_back(&s);
  }
  return out;
}

std::vector<EmbeddingRecord> Corpus::read_model(std::string_view model_id,
                                                const ReadOptions& options) const {
  if (!manifest_.total_records.count(std::string(model_id))) {
    throw Error(ErrorCode::kUnknownModel,
                "corpus has no records for model '" + std::string(model_id) + "'");
  }
  std::vector<EmbeddingRecord> out;
  for (const ShardManifest* s : shards_for(model_id)) {
    FileSource src(shard_path(*s));
    auto records = read_shard(src, *s, options);
    std::move(records.begin(), records.end(), std::back_inserter(out));
  }
  return out;
}

LookupResult Corpus::lookup(std::string_view model_id,
                            std::span<const grid::GridCell> cells) const {
  if (!manifest_.total_records.count(std::string(model_id))) {
    throw Error(ErrorCode::kUnknownModel,
                "corpus has no records for model '" + std::string(model_id) + "'");
  }
  std::set<grid::GridCell> wanted(cells.begin(), cells.end());
  std::set<grid::GridCell> pending = wanted;
  LookupResult result;
  for (const ShardManifest* s : shards_for(model_id)) {
    if (pending.empty()) break;
    bool may_contain = false;
    for (const auto& c : pending) {
      if (!grid::is_valid(manifest_.grid_spec, c)) continue;
      const auto p = grid::cell_center(manifest_.grid_spec, c);
      if (s->bbox.contains(p.lat, p.lon)) {
        may_contain = true;
        break;
      }
    }
    if (!may_contain) continue;
    FileSource src(shard_path(*s));
    for (auto& r : read_shard(src, *s)) {
      if (pending.erase(r.cell)) result.found.push_back(std::move(r));
    }
  }
  std::sort(result.found.begin(), result.found.end(),
            [](const auto& a, const auto& b) { return a.cell < b.cell; });
  result.missing.assign(pending.begin(), pending.end());
  return result;
}

CorpusManifest write_corpus(const std::filesystem::path& dir, const grid::GridSpec& spec,
                            const std::vector<models::ModelInfo>& models,
                            const std::map<std::string, std::vector<EmbeddingRecord>>& records,
                            const CorpusWriteOptions& options) {
  if (options.shard_size < 1) throw Error(ErrorCode::kInvalidArgument, "shard_size must be >= 1");
  std::filesystem::create_directories(dir);
  CorpusManifest corpus;
  corpus.grid_spec = spec;
  corpus.created_at = options.created_at;
  for (const auto& model : models) {
    auto it = records.find(model.id);
    if (it == records.end()) continue;
    const auto& rs = it->second;
    corpus.total_records[model.id] = rs.size();
    const auto parts = detail::partition_groups(rs.size(), options.shard_size);
    for (size_t k = 0; k < parts.size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof(name), "%s-%05zu", model.id.c_str(), k);
      WriteOptions wo;
      wo.format = options.format;
      wo.row_group_size = options.row_group_size;
      wo.shard_id = name;
      wo.model_id = model.id;
      wo.dim = model.dim;
      wo.dtype = model.dtype;
      FileSink sink(dir / (std::string(name) + std::string(file_extension(options.format))));
      auto span = std::span<const EmbeddingRecord>(rs).subspan(parts[k].first, parts[k].second);
      ShardManifest m = write_shard(span, sink, wo);
      std::ofstream(dir / (std::string(name) + ".json")) << json(m).dump(2) << "\n";
      corpus.shards.push_back(std::move(m));
    }
  }
  std::ofstream out(dir / kCorpusManifestName);
  out << json(corpus).dump(2) << "\n";
  if (!out) throw Error(ErrorCode::kIoError, "cannot write corpus manifest in " + dir.string());
  return corpus;
}

VerifyReport verify_corpus(const std::filesystem::path& path, const models::Registry* registry) {
  VerifyReport report;
  Corpus corpus;
  try {
    corpus = Corpus::open(path);
  } catch (const Error& e) {
    report.issues.push_back({"", e.what()});
    return report;
  }
  const auto& spec = corpus.manifest().grid_spec;
  std::map<std::string, std::set<grid::GridCell>> seen;
  for (const auto& shard : corpus.manifest().shards) {
    ++report.shards_checked;
    auto issue = [&](const std::string& msg) { report.issues.push_back({shard.shard_id, msg}); };
    if (registry != nullptr) {
      const auto* info = registry->find(shard.model_id);
      if (info == nullptr) {
        issue("model '" + shard.model_id + "' not in registry");
      } else if (info->dim != shard.dim || info->dtype != shard.dtype) {
        issue("dim/dtype disagree with registry entry for " + shard.model_id);
      }
    }
    const auto file = corpus.shard_path(shard);
    if (!std::filesystem::exists(file)) {
      issue("missing shard file " + file.string());
      continue;
    }
    std::vector<EmbeddingRecord> records;
    try {
      FileSource src(file);
      records = read_shard(src, shard);
    } catch (const Error& e) {
      issue(e.what());
      continue;
    }
    report.records_checked += records.size();
    for (const auto& r : records) {
      const std::string id = grid::cell_id_string(r.cell);
      if (!grid::is_valid(spec, r.cell)) {
        issue("record " + id + " is not a valid grid cell");
        continue;
      }
      const auto center = grid::cell_center(spec, r.cell);
      if (std::abs(center.lat - r.lat) > 1e-9 || std::abs(center.lon - r.lon) > 1e-9) {
        issue("record " + id + " coordinates differ from its cell center");
      }
      if (!shard.bbox.contains(r.lat, r.lon)) issue("record " + id + " outside shard bbox");
      if (!seen[shard.model_id].insert(r.cell).second) {
        issue("duplicate record for cell " + id + " in model " + shard.model_id);
      }
    }
  }
  return report;
}

}  // namespace tilescout::store
