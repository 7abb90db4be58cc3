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

#include "tilescout/synth.hpp"

#include <cstdio>

#include "tilescout/error.hpp"
#include "tilescout/search.hpp"

namespace tilescout::synth {

std::vector<grid::GridCell> synth_cells(const grid::GridSpec& spec, const SynthOptions& options) {
  if (options.cell_limit < 1) throw Error(ErrorCode::kInvalidArgument, "cell_limit must be >= 1");
  std::vector<grid::GridCell> pool;
  grid::for_each_subsampled(spec, [&](const grid::GridCell& c) {
    if (options.region) {
      const auto p = grid::cell_center(spec, c);
      if (!options.region->contains(p.lat, p.lon)) return;
    }
    pool.push_back(c);
  });
  if (pool.size() <= options.cell_limit) return pool;
  std::vector<grid::GridCell> out;
  out.reserve(options.cell_limit);
  const uint64_t m = pool.size();
  for (uint64_t j = 0; j < options.cell_limit; ++j) out.push_back(pool[j * m / options.cell_limit]);
  return out;
}

std::map<std::string, std::vector<store::EmbeddingRecord>> synth_records(
    const grid::GridSpec& spec, const models::Registry& registry, const SynthOptions& options) {
  std::vector<const models::ModelInfo*> chosen;
  if (options.model_ids.empty()) {
    for (const auto& m : registry.models()) chosen.push_back(&m);
  } else {
    for (const auto& id : options.model_ids) chosen.push_back(&registry.at(id));
  }
  const auto cells = synth_cells(spec, options);

  std::vector<std::optional<encoder::MockLocationEncoder>> location(chosen.size());
  if (options.smooth) {
    for (size_t m = 0; m < chosen.size(); ++m) location[m].emplace(options.mock, chosen[m]->dim);
  }

  std::map<std::string, std::vector<store::EmbeddingRecord>> out;
  for (const auto* m : chosen) out[m->id].reserve(cells.size());
  for (size_t ci = 0; ci < cells.size(); ++ci) {
    const auto& cell = cells[ci];
    const auto center = grid::cell_center(spec, cell);
    const std::string id = grid::cell_id_string(cell);
    std::vector<double> weights;
    if (options.smooth) weights = location[0]->weights(center);
    char product[64];
    std::snprintf(product, sizeof(product), "SYNTH_%016llx_%s",
                  static_cast<unsigned long long>(options.seed), id.c_str());
    for (size_t mi = 0; mi < chosen.size(); ++mi) {
      const auto& model = *chosen[mi];
      auto v = search::l2_normalize(
          encoder::mock_text_encoder(options.seed, model.dim, "cell/" + model.id + "/" + id));
      if (options.smooth) {
        const auto loc = search::l2_normalize(location[mi]->combine(weights));
        for (size_t d = 0; d < v.size(); ++d) {
          v[d] = static_cast<float>(loc[d] + options.smooth_noise * static_cast<double>(v[d]));
        }
        v = search::l2_normalize(v);
      }
      store::EmbeddingRecord r;
      r.cell = cell;
      r.lat = center.lat;
      r.lon = center.lon;
      r.model_id = model.id;
      r.dtype = model.dtype;
      r.vector_bytes = store::pack_vector(model.dtype, v);
      r.acquired_at = options.acquired_at + static_cast<int64_t>(ci);
      r.source_product = product;
      out[model.id].push_back(std::move(r));
    }
  }
  return out;
}

store::CorpusManifest synth_corpus(const std::filesystem::path& dir, const grid::GridSpec& spec,
                                   const models::Registry& registry, const SynthOptions& options,
                                   const store::CorpusWriteOptions& write_options) {
  const auto records = synth_records(spec, registry, options);
  std::vector<models::ModelInfo> infos;
  for (const auto& [id, _] : records) infos.push_back(registry.at(id));
  return store::write_corpus(dir, spec, infos, records, write_options);
}

}  // namespace tilescout::synth
