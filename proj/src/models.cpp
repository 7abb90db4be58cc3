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

#include "tilescout/models.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tilescout/error.hpp"

namespace tilescout::models {

std::string_view to_string(Dtype d) {
  return d == Dtype::kFloat32 ? "float32" : "float16";
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kText: return "text";
    case Modality::kImage: return "image";
    case Modality::kLocation: return "location";
  }
  return "?";
}

std::string_view to_string(InputBands b) {
  return b == InputBands::kRgb ? "rgb" : "multispectral";
}

Dtype parse_dtype(std::string_view s) {
  if (s == "float32") return Dtype::kFloat32;
  if (s == "float16") return Dtype::kFloat16;
  throw Error(ErrorCode::kParseError, "unknown dtype '" + std::string(s) + "'");
}

Modality parse_modality(std::string_view s) {
  if (s == "text") return Modality::kText;
  if (s == "image") return Modality::kImage;
  if (s == "location") return Modality::kLocation;
  throw Error(ErrorCode::kParseError, "unknown modality '" + std::string(s) + "'");
}

InputBands parse_input_bands(std::string_view s) {
  if (s == "rgb") return InputBands::kRgb;
  if (s == "multispectral") return InputBands::kMultispectral;
  throw Error(ErrorCode::kParseError, "unknown input_bands '" + std::string(s) + "'");
}

std::vector<Modality> ModalitySet::list() const {
  std::vector<Modality> out;
  for (Modality m : {Modality::kText, Modality::kImage, Modality::kLocation}) {
    if (contains(m)) out.push_back(m);
  }
  return out;
}

bool supports(const ModelInfo& m, Modality modality) {
  return m.modalities.contains(modality);
}

std::vector<float> validate_vector(const ModelInfo& m, std::span<const float> values) {
  if (values.size() != m.dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "model " + m.id + " expects dim " + std::to_string(m.dim) +
                    ", got " + std::to_string(values.size()));
  }
  for (size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::kNonFinite,
                  "non-finite component at index " + std::to_string(i));
    }
  }
  return {values.begin(), values.end()};
}

void to_json(nlohmann::json& j, const ModelInfo& m) {
  nlohmann::json mods = nlohmann::json::array();
  for (Modality x : m.modalities.list()) mods.push_back(to_string(x));
  j = nlohmann::json{{"id", m.id},
                     {"arch_label", m.arch_label},
                     {"dim", m.dim},
                     {"dtype", to_string(m.dtype)},
                     {"modalities", mods},
                     {"input_size_px", m.input_size_px},
                     {"input_bands", to_string(m.input_bands)}};
}

void from_json(const nlohmann::json& j, ModelInfo& m) {
  try {
    m.id = j.at("id").get<std::string>();
    m.arch_label = j.at("arch_label").get<std::string>();
    m.dim = j.at("dim").get<uint32_t>();
    m.dtype = parse_dtype(j.at("dtype").get<std::string>());
    m.modalities = {};
    for (const auto& x : j.at("modalities")) {
      m.modalities.insert(parse_modality(x.get<std::string>()));
    }
    m.input_size_px = j.at("input_size_px").get<uint32_t>();
    m.input_bands = parse_input_bands(j.at("input_bands").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("bad model entry: ") + e.what());
  }
}

Registry::Registry(std::vector<ModelInfo> models) : models_(std::move(models)) {
  std::set<std::string> seen;
  for (const auto& m : models_) {
    if (m.id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty model id");
    if (m.dim == 0) {
      throw Error(ErrorCode::kInvalidArgument, "model " + m.id + " has dim 0");
    }
    if (m.modalities.empty()) {
      throw Error(ErrorCode::kInvalidArgument,
                  "model " + m.id + " declares no modalities");
    }
    if (!seen.insert(m.id).second) {
      throw Error(ErrorCode::kInvalidArgument, "duplicate model id " + m.id);
    }
  }
}

const std::vector<ModelInfo>& default_registry() {
  using M = Modality;
  static const std::vector<ModelInfo> kModels = {
      {"dinov2", "ViT-L/14", 1024, Dtype::kFloat32, {M::kImage}, 224, InputBands::kRgb},
      {"farslip", "ViT-B/16", 512, Dtype::kFloat16, {M::kText, M::kImage}, 224,
       InputBands::kRgb},
      {"satclip", "ViT16-L40", 256, Dtype::kFloat16, {M::kLocation, M::kImage}, 224,
       InputBands::kMultispectral},
      {"siglip", "ViT-SO400M", 1152, Dtype::kFloat16, {M::kText, M::kImage}, 384,
       InputBands::kRgb},
  };
  return kModels;
}

Registry Registry::defaults() { return Registry(default_registry()); }

Registry Registry::from_json_text(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("registry manifest: ") + e.what());
  }
  if (!j.is_array()) {
    throw Error(ErrorCode::kParseError, "registry manifest must be a JSON array");
  }
  std::vector<ModelInfo> models;
  for (const auto& entry : j) models.push_back(entry.get<ModelInfo>());
  return Registry(std::move(models));
}

Registry Registry::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open registry " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

const ModelInfo* Registry::find(std::string_view id) const {
  for (const auto& m : models_) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

const ModelInfo& Registry::at(std::string_view id) const {
  const ModelInfo* m = find(id);
  if (m == nullptr) {
    throw Error(ErrorCode::kUnknownModel, "unknown model '" + std::string(id) + "'");
  }
  return *m;
}

void Registry::enable_modality(std::string_view id, Modality m) {
  for (auto& model : models_) {
    if (model.id == id) {
      model.modalities.insert(m);
      return;
    }
  }
  throw Error(ErrorCode::kUnknownModel, "unknown model '" + std::string(id) + "'");
}

nlohmann::json Registry::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : models_) arr.push_back(m);
  return arr;
}

}  // namespace tilescout::models
