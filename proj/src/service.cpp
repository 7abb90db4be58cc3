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

#include "tilescout/service.hpp"

#include <openssl/rand.h>
#include <sys/socket.h>

#include <charconv>
#include <cstdio>

#include <httplib.h>

namespace tilescout::service {
namespace {

int parse_int_env(const char* name, const char* value) {
  int out = 0;
  const std::string_view s(value);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(name) + " must be an integer, got '" + value + "'");
  }
  return out;
}

HttpResponse json_response(const nlohmann::json& j, int status = 200) {
  return {status, "application/json", j.dump()};
}

template <typename F>
HttpResponse guarded(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    return error_response(e.code(), e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

}  // namespace

std::string_view to_string(EncoderMode m) {
  switch (m) {
    case EncoderMode::kMock: return "mock";
    case EncoderMode::kRemote: return "remote";
    case EncoderMode::kProxy: return "proxy";
  }
  return "mock";
}

EncoderMode parse_encoder_mode(std::string_view s) {
  if (s == "mock") return EncoderMode::kMock;
  if (s == "remote") return EncoderMode::kRemote;
  if (s == "proxy") return EncoderMode::kProxy;
  throw Error(ErrorCode::kInvalidArgument, "unknown encoder mode '" + std::string(s) + "'");
}

std::pair<std::string, int> parse_bind(std::string_view text) {
  const auto colon = text.rfind(':');
  const std::string host = colon == std::string_view::npos ? "127.0.0.1"
                                                           : std::string(text.substr(0, colon));
  const auto port_text = colon == std::string_view::npos ? text : text.substr(colon + 1);
  int port = -1;
  const auto [p, ec] =
      std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
  if (ec != std::errc() || p != port_text.data() + port_text.size() || port < 0 ||
      port > 65535 || host.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "bad bind address '" + std::string(text) + "'");
  }
  return {host, port};
}

ServiceConfig config_from_env(ServiceConfig c,
                              const std::function<const char*(const char*)>& getenv) {
  if (const char* v = getenv("CORPUS_MANIFEST")) c.corpus_manifest = v;
  if (const char* v = getenv("REGISTRY")) c.registry_path = v;
  if (const char* v = getenv("BIND")) std::tie(c.bind_host, c.bind_port) = parse_bind(v);
  if (const char* v = getenv("ENCODER_MODE")) c.encoder_mode = parse_encoder_mode(v);
  if (const char* v = getenv("ENCODER_URL")) c.encoder_url = v;
  if (const char* v = getenv("CACHE_CAPACITY")) {
    c.cache_capacity = static_cast<size_t>(parse_int_env("CACHE_CAPACITY", v));
  }
  if (const char* v = getenv("RASTER_WIDTH")) {
    c.raster.width = static_cast<uint32_t>(parse_int_env("RASTER_WIDTH", v));
  }
  if (const char* v = getenv("RASTER_HEIGHT")) {
    c.raster.height = static_cast<uint32_t>(parse_int_env("RASTER_HEIGHT", v));
  }
  if (const char* v = getenv("CORS_ORIGIN")) c.cors_origin = v;
  if (const char* v = getenv("SCAN_THREADS")) {
    c.scan_threads = static_cast<unsigned>(parse_int_env("SCAN_THREADS", v));
  }
  return c;
}

void ServiceConfig::validate() const {
  if (corpus_manifest.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "no corpus manifest configured");
  }
  if (cache_capacity < 1) throw Error(ErrorCode::kInvalidArgument, "cache capacity must be >= 1");
  if (cache_ttl.count() < 1) throw Error(ErrorCode::kInvalidArgument, "cache TTL must be >= 1 s");
  if (bind_port < 0 || bind_port > 65535) {
    throw Error(ErrorCode::kInvalidArgument, "bind port out of range");
  }
  raster.validate();
  if (encoder_mode == EncoderMode::kRemote && encoder_url.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "encoder mode 'remote' needs an encoder URL");
  }
  if (!encoder_url.empty()) {
    encoder::EncoderEndpoint{encoder_url, "", encoder_timeout_ms, ""}.validate();
  }
}

pipeline::PipelineOptions ServiceConfig::pipeline_options() const {
  pipeline::PipelineOptions o;
  o.resolver.mock = encoder::MockEncoderConfig::with_seed(mock_seed);
  o.resolver.timeout_ms = encoder_timeout_ms;
  switch (encoder_mode) {
    case EncoderMode::kMock:
      o.resolver.location_mode = encoder::LocationMode::kMock;
      break;
    case EncoderMode::kRemote:
      o.resolver.location_mode = encoder::LocationMode::kRemote;
      o.resolver.encoder_url = encoder_url;
      break;
    case EncoderMode::kProxy:
      o.resolver.location_mode = encoder::LocationMode::kNearestTileProxy;
      if (!encoder_url.empty()) o.resolver.encoder_url = encoder_url;
      break;
  }
  o.raster = raster;
  o.scan.threads = scan_threads;
  return o;
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kParseError:
    case ErrorCode::kUnknownModel:
    case ErrorCode::kUnsupportedModality:
    case ErrorCode::kNonFinite:
      return 400;
    case ErrorCode::kNotFound:
      return 404;
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kEmptyCorpus:
      return 422;
    case ErrorCode::kEncoderTimeout:
    case ErrorCode::kEncoderHttp:
    case ErrorCode::kEncoderMalformed:
    case ErrorCode::kEncoderFailure:
      return 502;
    case ErrorCode::kCorpusNotLoaded:
      return 503;
    case ErrorCode::kChecksumMismatch:
    case ErrorCode::kCorruptData:
    case ErrorCode::kIoError:
      return 500;
  }
  return 500;
}

HttpResponse error_response(ErrorCode code, const std::string& message) {
  return error_response(http_status(code), error_code_token(code), message);
}

HttpResponse error_response(int status, std::string_view code, const std::string& message) {
  return json_response({{"error", message}, {"code", std::string(code)}}, status);
}

SessionCache::SessionCache(size_t capacity, std::chrono::seconds ttl,
                           std::function<Clock::time_point()> now)
    : capacity_(capacity), ttl_(ttl), now_(std::move(now)) {
  if (capacity_ < 1) throw Error(ErrorCode::kInvalidArgument, "cache capacity must be >= 1");
}

void SessionCache::put(std::shared_ptr<const Session> session) {
  const auto now = now_();
  std::lock_guard lock(mu_);
  if (const auto it = by_id_.find(session->query_id); it != by_id_.end()) {
    lru_.erase(it->second);
    by_id_.erase(it);
  }
  lru_.push_front({session, now});
  by_id_[session->query_id] = lru_.begin();
  while (lru_.size() > capacity_) {
    by_id_.erase(lru_.back().session->query_id);
    lru_.pop_back();
  }
}

std::shared_ptr<const Session> SessionCache::get(const std::string& query_id) {
  const auto now = now_();
  std::lock_guard lock(mu_);
  const auto it = by_id_.find(query_id);
  if (it == by_id_.end()) return nullptr;
  if (now - it->second->inserted >= ttl_) {
    lru_.erase(it->second);
    by_id_.erase(it);
    return nullptr;
  }
  lru_.splice(lru_.begin(), lru_, it->second);
  return it->second->session;
}

size_t SessionCache::size() const {
  std::lock_guard lock(mu_);
  return lru_.size();
}

std::string new_query_id() {
  unsigned char bytes[16];
  if (RAND_bytes(bytes, sizeof bytes) != 1) {
    throw Error(ErrorCode::kIoError, "random source unavailable");
  }
  std::string out(32, '0');
  static constexpr char kHex[] = "0123456789abcdef";
  for (size_t i = 0; i < 16; ++i) {
    out[2 * i] = kHex[bytes[i] >> 4];
    out[2 * i + 1] = kHex[bytes[i] & 0xF];
  }
  return out;
}

Service::Service(ServiceConfig config)
    : config_(std::move(config)),
      registry_(config_.registry_path.empty()
                    ? models::Registry::defaults()
                    : models::Registry::from_file(config_.registry_path)),
      options_(config_.pipeline_options()),
      cache_(config_.cache_capacity, config_.cache_ttl),
      started_(std::chrono::steady_clock::now()) {}

Service::~Service() {
  if (loader_.joinable()) loader_.join();
}

void Service::load_corpus() {
  set_corpus(pipeline::LoadedCorpus::load(config_.corpus_manifest, registry_));
}

void Service::load_corpus_async() {
  if (loader_.joinable()) loader_.join();
  loader_ = std::thread([this] {
    try {
      load_corpus();
    } catch (const std::exception& e) {
      std::lock_guard lock(corpus_mu_);
      load_error_ = e.what();
    }
  });
}

void Service::wait_loaded() {
  if (loader_.joinable()) loader_.join();
}

void Service::set_corpus(std::shared_ptr<const pipeline::LoadedCorpus> corpus) {
  std::lock_guard lock(corpus_mu_);
  corpus_ = std::move(corpus);
  load_error_.clear();
}

std::shared_ptr<const pipeline::LoadedCorpus> Service::corpus() const {
  std::lock_guard lock(corpus_mu_);
  return corpus_;
}

HttpResponse Service::models() const {
  return guarded([&] { return json_response({{"models", registry_.to_json()}}); });
}

HttpResponse Service::query(const std::string& body) {
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kInvalidArgument, std::string("request is not JSON: ") + e.what());
    }
    const auto request = pipeline::QueryRequest::from_json(j);
    const auto corpus = this->corpus();
    if (!corpus) throw Error(ErrorCode::kCorpusNotLoaded, "corpus is still loading");

    auto session = std::make_shared<Session>();
    session->query_id = new_query_id();
    auto result = pipeline::run_query(*corpus, registry_, request, options_, session->query_id);
    session->model_id = result.model_id;
    session->response = {
        {"query_id", session->query_id},
        {"model_id", result.model_id},
        {"modality", std::string(encoder::to_string(request.spec.modality))},
        {"k", request.k},
        {"fraction", request.fraction},
        {"results", pipeline::results_json(result.results, corpus->grid_spec())},
        {"mask_size", result.mask.selected.size()},
        {"corpus_size", result.corpus_size},
        {"map_ref", "/api/map/" + session->query_id + ".png"},
        {"geojson_ref", "/api/export/" + session->query_id + ".geojson"},
        {"timing_ms", result.timing.total_ms},
        {"timing_breakdown_ms",
         {{"encode", result.timing.encode_ms},
          {"search", result.timing.search_ms},
          {"render", result.timing.render_ms}}},
    };
    session->map_png = std::move(result.map_png);
    session->geojson = std::move(result.geojson);
    session->mask = std::move(result.mask);
    cache_.put(session);
    return json_response(session->response);
  });
}

HttpResponse Service::map(const std::string& query_id) {
  return guarded([&] {
    const auto s = cache_.get(query_id);
    if (!s) throw Error(ErrorCode::kNotFound, "unknown or expired query id '" + query_id + "'");
    return HttpResponse{200, "image/png", std::string(s->map_png.begin(), s->map_png.end())};
  });
}

HttpResponse Service::geojson(const std::string& query_id) {
  return guarded([&] {
    const auto s = cache_.get(query_id);
    if (!s) throw Error(ErrorCode::kNotFound, "unknown or expired query id '" + query_id + "'");
    return HttpResponse{200, "application/geo+json", s->geojson};
  });
}

HttpResponse Service::tile(const std::string& cell_id) const {
  return guarded([&] {
    grid::GridCell cell;
    try {
      cell = grid::parse_cell_id(cell_id);
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidArgument, e.what());
    }
    const auto corpus = this->corpus();
    if (!corpus) throw Error(ErrorCode::kCorpusNotLoaded, "corpus is still loading");
    const auto* t = corpus->tile(cell);
    if (t == nullptr) throw Error(ErrorCode::kNotFound, "cell " + cell_id + " is not in the corpus");
    return json_response({{"cell_id", grid::cell_id_string(t->cell)},
                          {"lat", t->center.lat},
                          {"lon", t->center.lon},
                          {"models_present", t->models_present},
                          {"source_product", t->source_product}});
  });
}

HttpResponse Service::healthz() const {
  return guarded([&] {
    const double uptime =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    std::shared_ptr<const pipeline::LoadedCorpus> corpus;
    std::string error;
    {
      std::lock_guard lock(corpus_mu_);
      corpus = corpus_;
      error = load_error_;
    }
    nlohmann::json j = {{"uptime_s", uptime}};
    if (corpus) {
      j["status"] = "ok";
      j["corpus"] = {{"cells", corpus->cell_count()},
                     {"records", corpus->record_count()},
                     {"models", corpus->model_ids()}};
      return json_response(j);
    }
    j["corpus"] = {{"cells", 0}, {"records", 0}, {"models", nlohmann::json::array()}};
    if (!error.empty()) {
      j["status"] = "error";
      j["error"] = error;
      return json_response(j, 503);
    }
    j["status"] = "loading";
    return json_response(j);
  });
}

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;
  std::thread thread;
  bool bound = false;

  explicit Impl(Service& s) : service(s) {
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    const auto& origin = service.config().cors_origin;
    if (!origin.empty()) {
      server.set_default_headers({{"Access-Control-Allow-Origin", origin},
                                  {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                  {"Access-Control-Allow-Headers", "Content-Type"}});
    }
    const auto send = [](httplib::Response& res, const HttpResponse& r) {
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Get("/api/models", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, service.models());
    });
    server.Post("/api/query", [this, send](const httplib::Request& req, httplib::Response& res) {
      send(res, service.query(req.body));
    });
    server.Get(R"(/api/map/([^/]+)\.png)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, service.map(req.matches[1]));
               });
    server.Get(R"(/api/export/([^/]+)\.geojson)",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, service.geojson(req.matches[1]));
               });
    server.Get(R"(/api/tile/([^/]+))",
               [this, send](const httplib::Request& req, httplib::Response& res) {
                 send(res, service.tile(req.matches[1]));
               });
    server.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, service.healthz());
    });
    server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
    server.set_error_handler([send](const httplib::Request& req, httplib::Response& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      const int status = res.status;
      send(res, error_response(status, status == 404 ? "not_found" : "http_error",
                               "no route for " + req.method + " " + req.path));
      return httplib::Server::HandlerResponse::Handled;
    });
    server.set_exception_handler(
        [send](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
          send(res, error_response(500, "internal", "unhandled exception"));
        });
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  const auto& c = impl_->service.config();
  int port = c.bind_port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(c.bind_host);
    if (port < 0) port = 0;
  } else if (!impl_->server.bind_to_port(c.bind_host, port)) {
    port = 0;
  }
  if (port == 0) {
    throw Error(ErrorCode::kIoError, "cannot bind " + c.bind_host + ":" +
                                         std::to_string(c.bind_port) +
                                         " (address in use or not available)");
  }
  impl_->bound = true;
  return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

int HttpServer::start() {
  const int port = bind();
  impl_->thread = std::thread([this] { listen(); });
  impl_->server.wait_until_ready();
  return port;
}

void HttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace tilescout::service
