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

// HTTP JSON API over a loaded corpus.
//
//   GET  /api/models                   registry
//   POST /api/query                    run a query, cache its artifacts
//   GET  /api/map/{query_id}.png       rendered similarity map
//   GET  /api/export/{query_id}.geojson top-k features
//   GET  /api/tile/{cell_id}           tile metadata
//   GET  /healthz                      status, corpus size, uptime
//
// Error bodies are {"error": message, "code": token}.

#include <atomic>
#include <cstdlib>
#include <chrono>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "tilescout/error.hpp"
#include "tilescout/pipeline.hpp"

namespace tilescout::service {

enum class EncoderMode : uint8_t { kMock, kRemote, kProxy };
std::string_view to_string(EncoderMode m);
EncoderMode parse_encoder_mode(std::string_view s);

struct ServiceConfig {
  std::string corpus_manifest;
  std::string registry_path;  // empty = built-in registry
  std::string bind_host = "127.0.0.1";
  int bind_port = 8080;  // 0 = any free port
  EncoderMode encoder_mode = EncoderMode::kProxy;
  std::string encoder_url;
  int encoder_timeout_ms = 10000;
  size_t cache_capacity = 256;
  std::chrono::seconds cache_ttl{3600};
  mapview::RasterSpec raster;
  std::string cors_origin = "*";
  unsigned scan_threads = 0;
  uint64_t mock_seed = encoder::kDefaultMockSeed;

  void validate() const;
  pipeline::PipelineOptions pipeline_options() const;
};

/// Reads CORPUS_MANIFEST, REGISTRY, BIND (host:port), ENCODER_MODE,
/// ENCODER_URL, CACHE_CAPACITY, RASTER_WIDTH, RASTER_HEIGHT, CORS_ORIGIN and
/// SCAN_THREADS on top of `base`.
ServiceConfig config_from_env(
    ServiceConfig base = {},
    const std::function<const char*(const char*)>& getenv = [](const char* k) {
      return std::getenv(k);
    });

/// "host:port"; a bare port binds 127.0.0.1.
std::pair<std::string, int> parse_bind(std::string_view text);

/// HTTP status for an error category.
int http_status(ErrorCode code);

struct Session {
  std::string query_id;
  std::string model_id;
  nlohmann::json response;
  std::vector<uint8_t> map_png;
  std::string geojson;
  mapview::ThresholdMask mask;
};

/// LRU map from query id to session with a time-to-live. Thread safe.
class SessionCache {
 public:
  using Clock = std::chrono::steady_clock;

  SessionCache(size_t capacity, std::chrono::seconds ttl,
               std::function<Clock::time_point()> now = Clock::now);

  void put(std::shared_ptr<const Session> session);
  /// Null when unknown, evicted or expired. A hit refreshes recency only.
  std::shared_ptr<const Session> get(const std::string& query_id);
  size_t size() const;
  size_t capacity() const { return capacity_; }

 private:
  struct Entry {
    std::shared_ptr<const Session> session;
    Clock::time_point inserted;
  };
  using List = std::list<Entry>;

  size_t capacity_;
  std::chrono::seconds ttl_;
  std::function<Clock::time_point()> now_;
  mutable std::mutex mu_;
  List lru_;  // most recent first
  std::unordered_map<std::string, List::iterator> by_id_;
};

/// 32 lowercase hex digits from a CSPRNG.
std::string new_query_id();

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// The API without a socket. Every handler returns an HttpResponse and never
/// throws.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Blocking load; throws on failure.
  void load_corpus();
  /// Loads on a background thread; /healthz reports "loading" until done.
  void load_corpus_async();
  /// Waits for a background load to finish.
  void wait_loaded();

  /// Installs an already loaded corpus.
  void set_corpus(std::shared_ptr<const pipeline::LoadedCorpus> corpus);

  HttpResponse models() const;
  HttpResponse query(const std::string& body);
  HttpResponse map(const std::string& query_id);
  HttpResponse geojson(const std::string& query_id);
  HttpResponse tile(const std::string& cell_id) const;
  HttpResponse healthz() const;

  const ServiceConfig& config() const { return config_; }
  const models::Registry& registry() const { return registry_; }
  SessionCache& cache() { return cache_; }

 private:
  std::shared_ptr<const pipeline::LoadedCorpus> corpus() const;

  ServiceConfig config_;
  models::Registry registry_;
  pipeline::PipelineOptions options_;
  SessionCache cache_;
  std::chrono::steady_clock::time_point started_;

  mutable std::mutex corpus_mu_;
  std::shared_ptr<const pipeline::LoadedCorpus> corpus_;
  std::string load_error_;
  std::thread loader_;
};

HttpResponse error_response(ErrorCode code, const std::string& message);
HttpResponse error_response(int status, std::string_view code, const std::string& message);

/// Binds `service` to a socket with cpp-httplib.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  /// Binds the configured address; throws Error(kIoError) when the address
  /// is unavailable. Returns the bound port.
  int bind();
  /// Serves until stop(). bind() must have succeeded.
  void listen();
  /// bind() + listen() on a background thread.
  int start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tilescout::service
