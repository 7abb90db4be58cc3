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

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <regex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tilescout/encoder.hpp"
#include "tilescout/error.hpp"

namespace tilescout::encoder {
namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/?#]+)(/[^#]*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::kInvalidArgument, "bad encoder URL '" + url + "'");
  }
  return {m[1].str(), m[2].matched ? m[2].str() : "/embed"};
}

std::string base64(std::span<const uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<size_t>(n));
  return out;
}

std::vector<float> post(const EncoderEndpoint& endpoint, const nlohmann::json& body,
                        uint32_t dim) {
  endpoint.validate();
  const auto url = parse_url(endpoint.base_url);
  httplib::Client client(url.origin);
  const auto timeout = std::chrono::milliseconds(endpoint.timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  if (!endpoint.auth_token.empty()) client.set_bearer_token_auth(endpoint.auth_token);

  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post(url.path, body.dump(), "application/json");
  if (!res) {
    const auto elapsed = std::chrono::steady_clock::now() - start;
    const auto err = res.error();
    if (err == httplib::Error::ConnectionTimeout ||
        (err == httplib::Error::Read && elapsed >= timeout * 9 / 10)) {
      throw Error(ErrorCode::kEncoderTimeout, "encoder at " + endpoint.base_url +
                                                  " timed out after " +
                                                  std::to_string(endpoint.timeout_ms) + " ms");
    }
    throw Error(ErrorCode::kEncoderFailure,
                "encoder at " + endpoint.base_url + " failed: " + httplib::to_string(err));
  }
  if (res->status >= 400) {
    throw Error(ErrorCode::kEncoderHttp, "encoder at " + endpoint.base_url + " returned HTTP " +
                                             std::to_string(res->status) + ": " + res->body);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::out_of_range& e) {
    // 406: a number literal that only fits as infinity.
    throw Error(e.id == 406 ? ErrorCode::kNonFinite : ErrorCode::kEncoderMalformed,
                "encoder at " + endpoint.base_url + " sent an unusable number: " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kEncoderMalformed,
                "encoder at " + endpoint.base_url + " sent invalid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("embedding") || !j["embedding"].is_array()) {
    throw Error(ErrorCode::kEncoderMalformed,
                "encoder at " + endpoint.base_url + " response lacks an embedding array");
  }
  const auto& arr = j["embedding"];
  std::vector<float> out;
  out.reserve(arr.size());
  for (size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) {
      throw Error(ErrorCode::kEncoderMalformed, "encoder at " + endpoint.base_url +
                                                    " sent a non-numeric component at " +
                                                    std::to_string(i));
    }
    const double v = arr[i].get<double>();
    if (!std::isfinite(v) || std::abs(v) > std::numeric_limits<float>::max()) {
      throw Error(ErrorCode::kNonFinite, "encoder at " + endpoint.base_url +
                                             " sent a non-finite component at " +
                                             std::to_string(i));
    }
    out.push_back(static_cast<float>(v));
  }
  if (out.size() != dim) {
    throw Error(ErrorCode::kDimensionMismatch,
                "encoder at " + endpoint.base_url + " returned " + std::to_string(out.size()) +
                    " components for model '" + endpoint.model_id + "', expected " +
                    std::to_string(dim));
  }
  return out;
}

}  // namespace

void EncoderEndpoint::validate() const {
  if (timeout_ms <= 0) throw Error(ErrorCode::kInvalidArgument, "timeout_ms must be positive");
  parse_url(base_url);
}

std::vector<float> encode_text_remote(const EncoderEndpoint& endpoint, std::string_view prompt,
                                      uint32_t dim) {
  return post(endpoint,
              {{"model", endpoint.model_id}, {"modality", "text"}, {"text", std::string(prompt)}},
              dim);
}

std::vector<float> encode_location_remote(const EncoderEndpoint& endpoint,
                                          const grid::GeoPoint& p, uint32_t dim) {
  return post(endpoint,
              {{"model", endpoint.model_id}, {"modality", "location"}, {"lat", p.lat},
               {"lon", p.lon}},
              dim);
}

std::vector<float> encode_image_remote(const EncoderEndpoint& endpoint,
                                       std::span<const uint8_t> image,
                                       std::string_view content_type, uint32_t dim) {
  return post(endpoint,
              {{"model", endpoint.model_id},
               {"modality", "image"},
               {"image_b64", base64(image)},
               {"content_type", std::string(content_type)}},
              dim);
}

}  // namespace tilescout::encoder
