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

// Seeded synthetic corpora.
//
// Random vectors: normalize(mock_text_encoder(seed, dim, "cell/<model>/<id>")).
// Smooth vectors: normalize(normalize(v(centre)) + noise * random vector),
// where v is the mock location encoder of `mock`.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tilescout/encoder.hpp"
#include "tilescout/store.hpp"

namespace tilescout::synth {

struct SynthOptions {
  uint64_t seed = 42;
  uint64_t cell_limit = 10000;
  bool smooth = false;
  double smooth_noise = 0.01;
  /// Only cells whose centre lies inside the box (inclusive).
  std::optional<store::BBox> region;
  /// Models to generate; empty means every registry model.
  std::vector<std::string> model_ids;
  encoder::MockEncoderConfig mock = encoder::MockEncoderConfig::with_seed(encoder::kDefaultMockSeed);
  int64_t acquired_at = 1704067200;  // 2024-01-01T00:00:00Z
};

/// Up to cell_limit subsampled cells, evenly spaced through the (row, col)
/// enumeration of the region.
std::vector<grid::GridCell> synth_cells(const grid::GridSpec& spec, const SynthOptions& options);

std::map<std::string, std::vector<store::EmbeddingRecord>> synth_records(
    const grid::GridSpec& spec, const models::Registry& registry, const SynthOptions& options);

store::CorpusManifest synth_corpus(const std::filesystem::path& dir, const grid::GridSpec& spec,
                                   const models::Registry& registry, const SynthOptions& options,
                                   const store::CorpusWriteOptions& write_options = {});

}  // namespace tilescout::synth
