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

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace tilescout::models {

enum class Dtype : uint8_t { kFloat32 = 0, kFloat16 = 1 };

enum class Modality : uint8_t { kText = 0, kImage = 1, kLocation = 2 };

enum class InputBands : uint8_t { kRgb, kMultispectral };

std::string_view to_string(Dtype d);
std::string_view to_string(Modality m);
std::string_view to_string(InputBands b);
Dtype parse_dtype(std::string_view s);
Modality parse_modality(std::string_view s);
InputBands parse_input_bands(std::string_view s);

/// Bytes per stored component.
inline size_t dtype_size(Dtype d) { return d == Dtype::kFloat32 ? 4 : 2; }

/// Small ordered set of modalities.
class ModalitySet {
 public:
  ModalitySet() = default;
  ModalitySet(std::initializer_list<Modality> ms) {
    for (Modality m : ms) insert(m);
  }

  void insert(Modality m) { bits_ |= bit(m); }
  bool contains(Modality m) const { return (bits_ & bit(m)) != 0; }
  bool empty() const { return bits_ == 0; }
  std::vector<Modality> list() const;

  bool operator==(const ModalitySet&) const = default;

 private:
  static uint8_t bit(Modality m) { return static_cast<uint8_t>(1u << static_cast<int>(m)); }
  uint8_t bits_ = 0;
};

struct ModelInfo {
  std::string id;
  std::string arch_label;
  uint32_t dim = 0;
  Dtype dtype = Dtype::kFloat32;
  ModalitySet modalities;
  uint32_t input_size_px = 0;
  InputBands input_bands = InputBands::kRgb;

  bool operator==(const ModelInfo&) const = default;
};

bool supports(const ModelInfo& m, Modality modality);

/// Returns `values` unchanged if it has length m.dim and only finite
/// components. Throws Error(kDimensionMismatch) or Error(kNonFinite).
std::vector<float> validate_vector(const ModelInfo& m, std::span<const float> values);

void to_json(nlohmann::json& j, const ModelInfo& m);
void from_json(const nlohmann::json& j, ModelInfo& m);

class Registry {
 public:
  Registry() = default;
  explicit Registry(std::vector<ModelInfo> models);

  /// The four built-in embedding models.
  static Registry defaults();

  /// Loads a JSON array of ModelInfo objects.
  static Registry from_json_text(std::string_view text);
  static Registry from_file(const std::string& path);

  const std::vector<ModelInfo>& models() const { return models_; }
  size_t size() const { return models_.size(); }

  const ModelInfo* find(std::string_view id) const;
  /// Throws Error(kUnknownModel).
  const ModelInfo& at(std::string_view id) const;

  /// Enables an additional modality for one model (e.g. text for satclip).
  void enable_modality(std::string_view id, Modality m);

  nlohmann::json to_json() const;

 private:
  std::vector<ModelInfo> models_;
};

const std::vector<ModelInfo>& default_registry();

}  // namespace tilescout::models
