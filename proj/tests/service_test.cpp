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

#include <gtest/gtest.h>

#include <fstream>
#include <future>
#include <map>
#include <set>

#include <httplib.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "tilescout/synth.hpp"

namespace tilescout::service {
namespace {

using testing_oracles::fraction_rule;
using testing_oracles::geojson_point_collection_error;

constexpr const char* kRainforest = "a satellite image of a tropical rainforest";

nlohmann::json body_of(const HttpResponse& r) { return nlohmann::json::parse(r.body); }

void expect_error(const HttpResponse& r, int status, std::string_view code) {
  EXPECT_EQ(r.status, status) << r.body;
  const auto j = body_of(r);
  ASSERT_TRUE(j.is_object());
  EXPECT_TRUE(j.contains("error") && j["error"].is_string()) << r.body;
  EXPECT_EQ(j.value("code", ""), code) << r.body;
}

std::string text_query(const std::string& model, const std::string& text, int k = 5) {
  return nlohmann::json{{"model_id", model}, {"modality", "text"}, {"payload", {{"text", text}}},
                        {"k", k}}
      .dump();
}

TEST(ServiceConfig, FromEnv) {
  const std::map<std::string, std::string> env = {
      {"CORPUS_MANIFEST", "/data/corpus.json"}, {"REGISTRY", "/data/models.json"},
      {"BIND", "0.0.0.0:9090"},                 {"ENCODER_MODE", "remote"},
      {"ENCODER_URL", "http://enc:8000/embed"}, {"CACHE_CAPACITY", "16"},
      {"RASTER_WIDTH", "720"},                  {"RASTER_HEIGHT", "360"}};
  const auto c = config_from_env({}, [&](const char* k) -> const char* {
    const auto it = env.find(k);
    return it == env.end() ? nullptr : it->second.c_str();
  });
  EXPECT_EQ(c.corpus_manifest, "/data/corpus.json");
  EXPECT_EQ(c.registry_path, "/data/models.json");
  EXPECT_EQ(c.bind_host, "0.0.0.0");
  EXPECT_EQ(c.bind_port, 9090);
  EXPECT_EQ(c.encoder_mode, EncoderMode::kRemote);
  EXPECT_EQ(c.encoder_url, "http://enc:8000/embed");
  EXPECT_EQ(c.cache_capacity, 16u);
  EXPECT_EQ(c.raster, (mapview::RasterSpec{720, 360}));
  EXPECT_NO_THROW(c.validate());
}

TEST(ServiceConfig, Defaults) {
  const auto c = config_from_env({}, [](const char*) -> const char* { return nullptr; });
  EXPECT_EQ(c.cache_capacity, 256u);
  EXPECT_EQ(c.cache_ttl, std::chrono::seconds(3600));
  EXPECT_EQ(c.encoder_mode, EncoderMode::kProxy);
  EXPECT_EQ(c.raster, (mapview::RasterSpec{1440, 720}));
  EXPECT_EQ(c.pipeline_options().resolver.location_mode,
            encoder::LocationMode::kNearestTileProxy);
}

TEST(ServiceConfig, Rejects) {
  const auto env = [](const char* key, const char* value) {
    return [=](const char* k) -> const char* { return std::string_view(k) == key ? value : nullptr; };
  };
  EXPECT_THROW(config_from_env({}, env("CACHE_CAPACITY", "lots")), Error);
  EXPECT_THROW(config_from_env({}, env("ENCODER_MODE", "gpu")), Error);
  EXPECT_THROW(config_from_env({}, env("BIND", "host:99999")), Error);
  ServiceConfig c;
  c.corpus_manifest = "x";
  c.encoder_mode = EncoderMode::kRemote;
  EXPECT_THROW(c.validate(), Error);
  c.encoder_mode = EncoderMode::kMock;
  c.cache_capacity = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(ServiceConfig, ParseBind) {
  EXPECT_EQ(parse_bind("127.0.0.1:8080"), (std::pair<std::string, int>{"127.0.0.1", 8080}));
  EXPECT_EQ(parse_bind("8081"), (std::pair<std::string, int>{"127.0.0.1", 8081}));
  EXPECT_THROW(parse_bind("localhost:"), Error);
  EXPECT_THROW(parse_bind(":80"), Error);
}

TEST(HttpStatus, Taxonomy) {
  EXPECT_EQ(http_status(ErrorCode::kUnsupportedModality), 400);
  EXPECT_EQ(http_status(ErrorCode::kUnknownModel), 400);
  EXPECT_EQ(http_status(ErrorCode::kInvalidArgument), 400);
  EXPECT_EQ(http_status(ErrorCode::kNotFound), 404);
  EXPECT_EQ(http_status(ErrorCode::kDimensionMismatch), 422);
  EXPECT_EQ(http_status(ErrorCode::kEncoderTimeout), 502);
  EXPECT_EQ(http_status(ErrorCode::kEncoderHttp), 502);
  EXPECT_EQ(http_status(ErrorCode::kEncoderFailure), 502);
  EXPECT_EQ(http_status(ErrorCode::kEncoderMalformed), 502);
  EXPECT_EQ(http_status(ErrorCode::kCorpusNotLoaded), 503);
}

std::shared_ptr<const Session> session(const std::string& id) {
  auto s = std::make_shared<Session>();
  s->query_id = id;
  return s;
}

TEST(SessionCache, EvictsLeastRecentlyUsed) {
  SessionCache cache(2, std::chrono::seconds(60));
  cache.put(session("a"));
  cache.put(session("b"));
  ASSERT_NE(cache.get("a"), nullptr);  // a is now most recent
  cache.put(session("c"));
  EXPECT_NE(cache.get("a"), nullptr);
  EXPECT_EQ(cache.get("b"), nullptr);
  EXPECT_NE(cache.get("c"), nullptr);
  EXPECT_EQ(cache.size(), 2u);
}

TEST(SessionCache, ExpiresAfterTtl) {
  auto now = SessionCache::Clock::time_point{};
  SessionCache cache(4, std::chrono::seconds(3600), [&] { return now; });
  cache.put(session("a"));
  now += std::chrono::seconds(3599);
  EXPECT_NE(cache.get("a"), nullptr);
  now += std::chrono::seconds(1);
  EXPECT_EQ(cache.get("a"), nullptr);
  EXPECT_EQ(cache.size(), 0u);
}

TEST(SessionCache, ConcurrentInsertEvictRead) {
  SessionCache cache(8, std::chrono::seconds(60));
  std::vector<std::thread> threads;
  std::atomic<int> bad{0};
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      for (int i = 0; i < 2000; ++i) {
        const auto id = std::to_string(t) + "/" + std::to_string(i);
        cache.put(session(id));
        const auto got = cache.get(std::to_string((t + 1) % 8) + "/" + std::to_string(i));
        if (got && got->query_id.empty()) ++bad;
      }
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(cache.size(), 8u);
}

TEST(QueryId, HexAndUnique) {
  std::set<std::string> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto id = new_query_id();
    ASSERT_EQ(id.size(), 32u);
    ASSERT_EQ(id.find_first_not_of("0123456789abcdef"), std::string::npos);
    seen.insert(id);
  }
  EXPECT_EQ(seen.size(), 1000u);
}

class ServiceTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new std::filesystem::path(testing_util::scratch_dir("service_corpus"));
    synth::SynthOptions o;
    o.cell_limit = 1000;
    o.seed = 5;
    manifest_ = new store::CorpusManifest(
        synth::synth_corpus(*dir_, grid::GridSpec{}, models::Registry::defaults(), o));
  }
  static void TearDownTestSuite() {
    std::filesystem::remove_all(*dir_);
    delete dir_;
    delete manifest_;
  }

  ServiceConfig config(EncoderMode mode = EncoderMode::kMock) const {
    ServiceConfig c;
    c.corpus_manifest = (*dir_ / store::kCorpusManifestName).string();
    c.encoder_mode = mode;
    c.raster = {360, 180};
    c.bind_port = 0;
    c.scan_threads = 1;
    return c;
  }

  std::unique_ptr<Service> loaded(ServiceConfig c) const {
    auto s = std::make_unique<Service>(std::move(c));
    s->load_corpus();
    return s;
  }

  static std::filesystem::path* dir_;
  static store::CorpusManifest* manifest_;
};

std::filesystem::path* ServiceTest::dir_ = nullptr;
store::CorpusManifest* ServiceTest::manifest_ = nullptr;

TEST_F(ServiceTest, ModelsListsRegistry) {
  Service s(config());
  const auto r = s.models();
  ASSERT_EQ(r.status, 200);
  const auto models = body_of(r)["models"];
  ASSERT_EQ(models.size(), 4u);
  bool dinov2 = false;
  for (const auto& m : models) {
    if (m["id"] == "dinov2") {
      dinov2 = true;
      EXPECT_EQ(m["dim"], 1024);
    }
  }
  EXPECT_TRUE(dinov2);
}

TEST_F(ServiceTest, CustomRegistryWithOneModel) {
  const auto path = testing_util::scratch_dir("service_registry") / "models.json";
  {
    std::ofstream out(path);
    nlohmann::json arr = nlohmann::json::array();
    arr.push_back(models::Registry::defaults().at("farslip"));
    out << arr.dump();
  }
  auto c = config();
  c.registry_path = path.string();
  const auto s = loaded(c);
  EXPECT_EQ(body_of(s->models())["models"].size(), 1u);
  const auto h = body_of(s->healthz());
  EXPECT_EQ(h["corpus"]["models"], nlohmann::json::array({"farslip"}));
  expect_error(s->query(text_query("siglip", "x")), 400, "unknown_model");
}

TEST_F(ServiceTest, HealthzBeforeAndAfterLoad) {
  Service s(config());
  auto h = s.healthz();
  EXPECT_EQ(h.status, 200);
  EXPECT_EQ(body_of(h)["status"], "loading");
  expect_error(s.query(text_query("farslip", kRainforest)), 503, "corpus_not_loaded");
  expect_error(s.tile("R0C0"), 503, "corpus_not_loaded");

  s.load_corpus_async();
  s.wait_loaded();
  h = s.healthz();
  EXPECT_EQ(h.status, 200);
  const auto j = body_of(h);
  EXPECT_EQ(j["status"], "ok");
  EXPECT_EQ(j["corpus"]["cells"], manifest_->total_records.at("dinov2"));
  uint64_t total = 0;
  for (const auto& [_, n] : manifest_->total_records) total += n;
  EXPECT_EQ(j["corpus"]["records"], total);
  EXPECT_EQ(j["corpus"]["models"].size(), 4u);
  EXPECT_GE(j["uptime_s"].get<double>(), 0.0);
}

TEST_F(ServiceTest, BadCorpusPathReportsError) {
  auto c = config();
  c.corpus_manifest = "/nonexistent/corpus.json";
  Service s(c);
  EXPECT_THROW(s.load_corpus(), Error);
  s.load_corpus_async();
  s.wait_loaded();
  const auto h = s.healthz();
  EXPECT_EQ(h.status, 503);
  EXPECT_EQ(body_of(h)["status"], "error");
}

TEST_F(ServiceTest, TextQueryOnFarslip) {
  const auto s = loaded(config());
  const auto r = s->query(text_query("farslip", kRainforest));
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = body_of(r);
  EXPECT_EQ(j["results"].size(), 5u);
  EXPECT_EQ(j["mask_size"], fraction_rule(1000, 0.025));
  EXPECT_EQ(j["corpus_size"], 1000);
  EXPECT_EQ(j["map_ref"], "/api/map/" + j["query_id"].get<std::string>() + ".png");
  for (size_t i = 0; i < 5; ++i) {
    const auto& row = j["results"][i];
    EXPECT_EQ(row["rank"], i + 1);
    const auto c = grid::cell_center(grid::GridSpec{}, grid::parse_cell_id(row["cell_id"].get<std::string>()));
    EXPECT_EQ(row["lat"].get<double>(), c.lat);
    EXPECT_EQ(row["lon"].get<double>(), c.lon);
    if (i > 0) EXPECT_LE(row["score"].get<float>(), j["results"][i - 1]["score"].get<float>());
  }
}

TEST_F(ServiceTest, RawSelfRetrieval) {
  const auto s = loaded(config());
  const auto corpus = store::Corpus::open(*dir_);
  const auto records = corpus.read_model("siglip");
  const auto& target = records[321];
  const auto body = nlohmann::json{{"model_id", "siglip"},
                                   {"modality", "raw"},
                                   {"payload", {{"vector", target.to_float32()}}}}
                        .dump();
  const auto r = s->query(body);
  ASSERT_EQ(r.status, 200) << r.body;
  const auto top = body_of(r)["results"][0];
  EXPECT_EQ(top["cell_id"], grid::cell_id_string(target.cell));
  EXPECT_NEAR(top["score"].get<double>(), 1.0, 1e-6);
}

TEST_F(ServiceTest, IdenticalRequestsGiveIdenticalResults) {
  const auto s = loaded(config());
  const auto a = body_of(s->query(text_query("siglip", kRainforest)));
  const auto b = body_of(s->query(text_query("siglip", kRainforest)));
  EXPECT_EQ(a["results"], b["results"]);
  EXPECT_NE(a["query_id"], b["query_id"]);
  EXPECT_EQ(s->map(a["query_id"]).body, s->map(b["query_id"]).body);
}

TEST_F(ServiceTest, ErrorTaxonomy) {
  const auto s = loaded(config());
  expect_error(s->query("{not json"), 400, "invalid_argument");
  expect_error(s->query(R"({"modality":"text","payload":{"text":"x"}})"), 400,
               "invalid_argument");
  expect_error(s->query(text_query("nosuch", "x")), 400, "unknown_model");
  expect_error(s->query(R"({"model_id":"farslip","modality":"smell","payload":{}})"), 400,
               "unsupported_modality");
  expect_error(
      s->query(R"({"model_id":"dinov2","modality":"location","payload":{"lat":-4,"lon":-63}})"),
      400, "unsupported_modality");
  expect_error(s->query(R"({"model_id":"farslip","modality":"text","payload":{}})"), 400,
               "invalid_argument");
  expect_error(s->query(text_query("farslip", "x", 0)), 400, "invalid_argument");
  expect_error(
      s->query(R"({"model_id":"farslip","modality":"image_cell","payload":{"cell_id":"R1C999999"}})"),
      404, "not_found");
  expect_error(
      s->query(R"({"model_id":"farslip","modality":"image_cell","payload":{"cell_id":"bogus"}})"),
      400, "invalid_argument");
  expect_error(s->query(R"({"model_id":"satclip","modality":"raw","payload":{"vector":[1,2,3]}})"),
               422, "dimension_mismatch");
}

TEST_F(ServiceTest, RemoteEncoderFailureIs502) {
  auto c = config(EncoderMode::kRemote);
  c.encoder_url = "http://127.0.0.1:1/embed";  // nothing listens on port 1
  c.encoder_timeout_ms = 2000;
  const auto s = loaded(c);
  expect_error(s->query(text_query("farslip", kRainforest)), 502, "encoder_failure");
}

TEST_F(ServiceTest, MapArtifact) {
  const auto s = loaded(config());
  const auto id = body_of(s->query(text_query("farslip", kRainforest)))["query_id"].get<std::string>();
  const auto a = s->map(id);
  ASSERT_EQ(a.status, 200);
  EXPECT_EQ(a.content_type, "image/png");
  ASSERT_GT(a.body.size(), 8u);
  EXPECT_EQ(a.body.substr(0, 8), std::string("\x89PNG\r\n\x1a\n", 8));
  EXPECT_EQ(s->map(id).body, a.body);
  expect_error(s->map("0123"), 404, "not_found");
}

TEST_F(ServiceTest, EvictedIdIs404) {
  auto c = config();
  c.cache_capacity = 1;
  const auto s = loaded(c);
  const auto first = body_of(s->query(text_query("farslip", "a")))["query_id"].get<std::string>();
  const auto second = body_of(s->query(text_query("farslip", "b")))["query_id"].get<std::string>();
  expect_error(s->map(first), 404, "not_found");
  expect_error(s->geojson(first), 404, "not_found");
  EXPECT_EQ(s->map(second).status, 200);
}

TEST_F(ServiceTest, GeojsonArtifact) {
  const auto s = loaded(config());
  const auto q = body_of(s->query(text_query("siglip", kRainforest)));
  const auto r = s->geojson(q["query_id"]);
  ASSERT_EQ(r.status, 200);
  EXPECT_EQ(r.content_type, "application/geo+json");
  const auto j = nlohmann::json::parse(r.body);
  EXPECT_EQ(geojson_point_collection_error(j), "");
  ASSERT_EQ(j["features"].size(), 5u);
  for (size_t i = 0; i < 5; ++i) {
    const auto& p = j["features"][i]["properties"];
    EXPECT_EQ(p["cell_id"], q["results"][i]["cell_id"]);
    EXPECT_EQ(p["rank"], q["results"][i]["rank"]);
    EXPECT_EQ(p["score"], q["results"][i]["score"]);
    EXPECT_EQ(p["model_id"], "siglip");
  }
  expect_error(s->geojson("ffff"), 404, "not_found");
}

TEST_F(ServiceTest, TileMetadata) {
  const auto s = loaded(config());
  const auto records = store::Corpus::open(*dir_).read_model("farslip");
  const auto& rec = records[10];
  const auto id = grid::cell_id_string(rec.cell);
  const auto r = s->tile(id);
  ASSERT_EQ(r.status, 200) << r.body;
  const auto j = body_of(r);
  const auto c = grid::cell_center(grid::GridSpec{}, rec.cell);
  EXPECT_EQ(j["cell_id"], id);
  EXPECT_EQ(j["lat"].get<double>(), c.lat);
  EXPECT_EQ(j["lon"].get<double>(), c.lon);
  EXPECT_EQ(j["models_present"].size(), 4u);
  EXPECT_EQ(j["source_product"], rec.source_product);

  expect_error(s->tile("R1C999999"), 404, "not_found");
  expect_error(s->tile("row1col2"), 400, "invalid_argument");
  const auto zero = s->tile("R0C0");
  EXPECT_TRUE(zero.status == 200 || zero.status == 404);
  if (zero.status == 200) EXPECT_EQ(body_of(zero)["cell_id"], "R0C0");
}

TEST_F(ServiceTest, ProxyLocationRanksProxyCellFirst) {
  const auto s = loaded(config(EncoderMode::kProxy));
  const auto r = s->query(
      R"({"model_id":"satclip","modality":"location","payload":{"lat":-4,"lon":-63}})");
  ASSERT_EQ(r.status, 200) << r.body;
  const auto corpus = pipeline::LoadedCorpus::load(*dir_, models::Registry::defaults());
  const auto* idx = corpus->index("satclip");
  const auto proxy = idx->cell(encoder::nearest_tile(*idx, grid::GridSpec{}, {-4, -63}));
  EXPECT_EQ(body_of(r)["results"][0]["cell_id"], grid::cell_id_string(proxy));
}

class HttpTest : public ServiceTest {
 protected:
  void SetUp() override {
    service_ = loaded(config());
    server_ = std::make_unique<HttpServer>(*service_);
    port_ = server_->start();
  }
  void TearDown() override {
    server_->stop();
    server_.reset();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(std::chrono::seconds(60));
    return c;
  }

  std::unique_ptr<Service> service_;
  std::unique_ptr<HttpServer> server_;
  int port_ = 0;
};

TEST_F(HttpTest, Routes) {
  auto c = client();
  auto h = c.Get("/healthz");
  ASSERT_TRUE(h);
  EXPECT_EQ(h->status, 200);
  EXPECT_EQ(nlohmann::json::parse(h->body)["status"], "ok");
  EXPECT_EQ(h->get_header_value("Access-Control-Allow-Origin"), "*");

  auto m = c.Get("/api/models");
  ASSERT_TRUE(m);
  EXPECT_EQ(nlohmann::json::parse(m->body)["models"].size(), 4u);

  auto q = c.Post("/api/query", text_query("farslip", kRainforest), "application/json");
  ASSERT_TRUE(q);
  ASSERT_EQ(q->status, 200) << q->body;
  const auto j = nlohmann::json::parse(q->body);
  auto png = c.Get(j["map_ref"].get<std::string>());
  ASSERT_TRUE(png);
  EXPECT_EQ(png->status, 200);
  EXPECT_EQ(png->get_header_value("Content-Type"), "image/png");
  auto geo = c.Get(j["geojson_ref"].get<std::string>());
  ASSERT_TRUE(geo);
  EXPECT_EQ(nlohmann::json::parse(geo->body)["features"].size(), 5u);
  auto tile = c.Get("/api/tile/" + j["results"][0]["cell_id"].get<std::string>());
  ASSERT_TRUE(tile);
  EXPECT_EQ(tile->status, 200);

  auto missing = c.Get("/api/nothing");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_EQ(nlohmann::json::parse(missing->body)["code"], "not_found");

  auto preflight = c.Options("/api/query");
  ASSERT_TRUE(preflight);
  EXPECT_EQ(preflight->status, 204);
  EXPECT_NE(preflight->get_header_value("Access-Control-Allow-Methods").find("POST"),
            std::string::npos);
}

TEST_F(HttpTest, ThirtyTwoConcurrentQueriesAgree) {
  const auto body = text_query("siglip", kRainforest);
  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 32; ++i) {
    futures.push_back(std::async(std::launch::async, [&] {
      auto c = client();
      auto r = c.Post("/api/query", body, "application/json");
      if (!r) return "failed: " + httplib::to_string(r.error());
      if (r->status != 200) return "failed: " + r->body;
      return nlohmann::json::parse(r->body)["results"].dump();
    }));
  }
  std::set<std::string> distinct;
  for (auto& f : futures) distinct.insert(f.get());
  ASSERT_EQ(distinct.size(), 1u) << *distinct.begin() << " / " << *distinct.rbegin();
  EXPECT_NE(distinct.begin()->rfind("failed", 0), 0u) << *distinct.begin();
}

TEST_F(HttpTest, BindConflictIsAnError) {
  auto c = config();
  c.bind_port = port_;
  Service other(c);
  HttpServer second(other);
  EXPECT_THROW(second.bind(), Error);
}

}  // namespace
}  // namespace tilescout::service
