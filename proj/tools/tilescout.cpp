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

// tilescout command line: synth, verify, query, serve, bench, locate.
// Exit codes: 0 success, 1 data or validation error, 2 usage error.

#include <algorithm>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tilescout/error.hpp"
#include "tilescout/pipeline.hpp"
#include "tilescout/service.hpp"
#include "tilescout/synth.hpp"

namespace ts = tilescout;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<double> parse_numbers(const std::string& text, size_t expected, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      size_t used = 0;
      out.push_back(std::stod(part, &used));
      if (part.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw UsageError(std::string(what) + ": cannot parse '" + part + "'");
    }
  }
  if (out.size() != expected) {
    throw UsageError(std::string(what) + ": expected " + std::to_string(expected) +
                     " comma-separated numbers");
  }
  return out;
}

ts::models::Registry load_registry(const std::string& path) {
  return path.empty() ? ts::models::Registry::defaults() : ts::models::Registry::from_file(path);
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ts::Error(ts::ErrorCode::kIoError, "cannot write " + path);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ts::Error(ts::ErrorCode::kIoError, "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// A JSON array of numbers, or whitespace separated numbers.
std::vector<float> read_vector_file(const std::string& path) {
  const auto text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '[') {
    try {
      return nlohmann::json::parse(text).get<std::vector<float>>();
    } catch (const nlohmann::json::exception& e) {
      throw ts::Error(ts::ErrorCode::kParseError, path + ": " + e.what());
    }
  }
  std::vector<float> out;
  std::istringstream in(text);
  double v = 0;
  while (in >> v) out.push_back(static_cast<float>(v));
  if (!in.eof()) throw ts::Error(ts::ErrorCode::kParseError, path + ": not a list of numbers");
  return out;
}

double percentile(std::vector<double> samples, double p) {
  if (samples.empty()) return 0.0;
  std::sort(samples.begin(), samples.end());
  const auto rank = static_cast<size_t>(std::ceil(p / 100.0 * samples.size()));
  return samples[std::clamp<size_t>(rank, 1, samples.size()) - 1];
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  uint64_t cells = 10000;
  uint64_t seed = 42;
  bool smooth = false;
  double noise = 0.01;
  std::string out;
  std::string format = "eesh1";
  std::string region;
  std::vector<std::string> models;
  std::string registry;
  int stride = 3;
  uint64_t shard_size = 4096;
  uint64_t row_group_size = 1024;
  bool json = false;
};

int run_synth(const SynthArgs& a) {
  const auto registry = load_registry(a.registry);
  ts::grid::GridSpec spec;
  spec.subsample_stride = a.stride;
  spec.validate();
  ts::synth::SynthOptions o;
  o.seed = a.seed;
  o.cell_limit = a.cells;
  o.smooth = a.smooth;
  o.smooth_noise = a.noise;
  o.model_ids = a.models;
  if (!a.region.empty()) {
    const auto v = parse_numbers(a.region, 4, "--region");
    o.region = ts::store::BBox{v[0], v[1], v[2], v[3]};
  }
  ts::store::CorpusWriteOptions w;
  w.format = ts::store::parse_shard_format(a.format);
  w.shard_size = a.shard_size;
  w.row_group_size = a.row_group_size;
  const auto manifest = ts::synth::synth_corpus(a.out, spec, registry, o, w);
  if (a.json) {
    std::cout << nlohmann::json(manifest).dump(2) << "\n";
  } else {
    std::cout << "wrote " << manifest.shards.size() << " shards to " << a.out << "\n";
    for (const auto& [model, n] : manifest.total_records) {
      std::cout << "  " << model << ": " << n << " records\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------- verify

int run_verify(const std::string& corpus, const std::string& registry_path, bool json) {
  const auto registry = load_registry(registry_path);
  const auto report = ts::store::verify_corpus(corpus, &registry);
  if (json) {
    nlohmann::json issues = nlohmann::json::array();
    for (const auto& i : report.issues) {
      issues.push_back({{"shard_id", i.shard_id}, {"message", i.message}});
    }
    std::cout << nlohmann::json{{"ok", report.ok()},
                                {"shards_checked", report.shards_checked},
                                {"records_checked", report.records_checked},
                                {"issues", issues}}
                     .dump(2)
              << "\n";
  } else {
    std::cout << (report.ok() ? "OK" : "FAILED") << ": " << report.shards_checked
              << " shards, " << report.records_checked << " records\n";
    for (const auto& i : report.issues) {
      std::cout << "  " << (i.shard_id.empty() ? "<corpus>" : i.shard_id) << ": " << i.message
                << "\n";
    }
  }
  return report.ok() ? 0 : 1;
}

// ---------------------------------------------------------------- query

struct QueryArgs {
  std::string corpus;
  std::string model;
  std::string text;
  std::string cell;
  std::string location;
  std::string raw;
  std::string image;
  std::string content_type = "image/png";
  uint64_t k = 5;
  double fraction = 0.025;
  std::string map;
  std::string geojson;
  bool json = false;
  std::string encoder_url;
  std::string location_mode = "proxy";
  std::string registry;
  uint64_t mock_seed = ts::encoder::kDefaultMockSeed;
  uint32_t width = 1440;
  uint32_t height = 720;
  std::string aggregator = "max";
  std::string background = "transparent";
  unsigned threads = 0;
};

ts::pipeline::QueryRequest build_request(const QueryArgs& a) {
  const int given = !a.text.empty() + !a.cell.empty() + !a.location.empty() + !a.raw.empty() +
                    !a.image.empty();
  if (given != 1) {
    throw UsageError("give exactly one of --text, --cell, --location, --raw, --image");
  }
  ts::pipeline::QueryRequest r;
  r.spec.model_id = a.model;
  r.k = a.k;
  r.fraction = a.fraction;
  using M = ts::encoder::QueryModality;
  if (!a.text.empty()) {
    r.spec.modality = M::kText;
    r.spec.text = a.text;
  } else if (!a.cell.empty()) {
    r.spec.modality = M::kImageCell;
    r.spec.cell = ts::grid::parse_cell_id(a.cell);
  } else if (!a.location.empty()) {
    r.spec.modality = M::kLocation;
    const auto v = parse_numbers(a.location, 2, "--location");
    r.spec.point = {v[0], v[1]};
  } else if (!a.raw.empty()) {
    r.spec.modality = M::kRaw;
    r.spec.raw = read_vector_file(a.raw);
  } else {
    r.spec.modality = M::kImageUpload;
    const auto bytes = read_file(a.image);
    r.spec.image.assign(bytes.begin(), bytes.end());
    r.spec.content_type = a.content_type;
  }
  try {
    r.validate();
  } catch (const ts::Error& e) {
    throw UsageError(e.what());
  }
  return r;
}

int run_query(const QueryArgs& a) {
  const auto request = build_request(a);
  const auto registry = load_registry(a.registry);
  ts::pipeline::PipelineOptions o;
  o.resolver.mock = ts::encoder::MockEncoderConfig::with_seed(a.mock_seed);
  o.resolver.location_mode = ts::encoder::parse_location_mode(a.location_mode);
  if (!a.encoder_url.empty()) o.resolver.encoder_url = a.encoder_url;
  o.raster = {a.width, a.height};
  o.aggregator = ts::mapview::parse_aggregator(a.aggregator);
  o.background = ts::mapview::parse_background(a.background);
  o.scan.threads = a.threads;
  o.render_map = !a.map.empty();

  const auto corpus = ts::pipeline::LoadedCorpus::load(a.corpus, registry, {a.model});
  const auto result = ts::pipeline::run_query(*corpus, registry, request, o);
  if (!a.map.empty()) {
    write_file(a.map, {reinterpret_cast<const char*>(result.map_png.data()),
                       result.map_png.size()});
  }
  if (!a.geojson.empty()) write_file(a.geojson, result.geojson);

  const auto rows = ts::pipeline::results_json(result.results, corpus->grid_spec());
  if (a.json) {
    std::cout << nlohmann::json{{"model_id", result.model_id},
                                {"modality", std::string(ts::encoder::to_string(
                                                 request.spec.modality))},
                                {"k", request.k},
                                {"fraction", request.fraction},
                                {"corpus_size", result.corpus_size},
                                {"mask_size", result.mask.selected.size()},
                                {"results", rows},
                                {"timing_ms", result.timing.total_ms}}
                     .dump(2)
              << "\n";
    return 0;
  }
  std::printf("%4s  %-14s %10s %11s %10s\n", "rank", "cell_id", "lat", "lon", "score");
  for (const auto& r : rows) {
    std::printf("%4u  %-14s %10.4f %11.4f %10.6f\n", r["rank"].get<unsigned>(),
                r["cell_id"].get<std::string>().c_str(), r["lat"].get<double>(),
                r["lon"].get<double>(), r["score"].get<double>());
  }
  std::printf("mask: %zu of %llu tiles (top %.4g)\n", result.mask.selected.size(),
              static_cast<unsigned long long>(result.corpus_size), request.fraction);
  if (!a.map.empty()) std::printf("map: %s\n", a.map.c_str());
  if (!a.geojson.empty()) std::printf("geojson: %s\n", a.geojson.c_str());
  return 0;
}

// ---------------------------------------------------------------- serve

ts::service::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int run_serve(ts::service::ServiceConfig c) {
  c.validate();
  ts::store::Corpus::open(c.corpus_manifest);  // fail fast on a bad path
  ts::service::Service service(c);
  ts::service::HttpServer server(service);
  const int port = server.bind();
  service.load_corpus_async();
  std::cerr << "tilescout: serving on http://" << c.bind_host << ":" << port << "\n";
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.listen();
  g_server = nullptr;
  service.wait_loaded();
  return 0;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string corpus;
  uint64_t synthetic = 0;
  std::string model = "siglip";
  uint64_t queries = 100;
  uint64_t k = 5;
  double fraction = 0.025;
  std::vector<unsigned> threads = {1, 0};
  uint64_t seed = 42;
  std::string registry;
};

int run_bench(const BenchArgs& a) {
  if (a.corpus.empty() == (a.synthetic == 0)) {
    throw UsageError("give exactly one of --corpus or --synthetic");
  }
  if (a.queries < 1) throw UsageError("--queries must be at least 1");
  const auto registry = load_registry(a.registry);
  const auto& model = registry.at(a.model);

  const auto load_start = std::chrono::steady_clock::now();
  std::optional<ts::search::ModelIndex> index;
  if (a.synthetic > 0) {
    ts::synth::SynthOptions o;
    o.seed = a.seed;
    o.cell_limit = a.synthetic;
    o.model_ids = {model.id};
    auto records = ts::synth::synth_records(ts::grid::GridSpec{}, registry, o);
    index = ts::search::ModelIndex::from_records(records.at(model.id));
  } else {
    index = ts::search::ModelIndex::from_corpus(ts::store::Corpus::open(a.corpus), model.id);
  }
  const double load_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - load_start)
                             .count();

  std::vector<ts::search::QueryVector> queries;
  for (uint64_t i = 0; i < a.queries; ++i) {
    queries.push_back(ts::search::make_query(
        model, ts::encoder::mock_text_encoder(a.seed, model.dim, "bench/" + std::to_string(i))));
  }

  nlohmann::json runs = nlohmann::json::array();
  std::vector<std::vector<ts::search::ScoredTile>> reference;
  bool identical = true;
  std::vector<double> p50s;
  for (unsigned threads : a.threads) {
    ts::search::ScanOptions scan;
    scan.threads = threads;
    std::vector<double> samples;
    std::vector<std::vector<ts::search::ScoredTile>> results;
    for (const auto& q : queries) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto scores = ts::search::score_all(*index, q, scan);
      auto top = ts::search::select_top(scores, index->cells(), a.k);
      ts::search::select_top(scores, index->cells(),
                             ts::search::fraction_count(scores.size(), a.fraction));
      samples.push_back(std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count());
      results.push_back(std::move(top));
    }
    if (reference.empty()) {
      reference = results;
    } else if (results != reference) {
      identical = false;
    }
    double total = 0;
    for (double s : samples) total += s;
    const unsigned effective =
        threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
    p50s.push_back(percentile(samples, 50));
    runs.push_back({{"threads", threads},
                    {"effective_threads", effective},
                    {"p50_ms", percentile(samples, 50)},
                    {"p95_ms", percentile(samples, 95)},
                    {"mean_ms", total / samples.size()},
                    {"throughput_qps", samples.size() / (total / 1000.0)},
                    {"samples_ms", samples}});
  }
  nlohmann::json report = {{"schema", "tilescout.bench/1"},
                           {"model_id", model.id},
                           {"dim", model.dim},
                           {"dtype", std::string(ts::models::to_string(model.dtype))},
                           {"records", index->size()},
                           {"queries", a.queries},
                           {"k", a.k},
                           {"fraction", a.fraction},
                           {"load_ms", load_ms},
                           {"hardware_concurrency", std::thread::hardware_concurrency()},
                           {"runs", runs},
                           {"results_identical", identical}};
  if (p50s.size() >= 2 && p50s.back() > 0) report["speedup_p50"] = p50s.front() / p50s.back();
  std::cout << report.dump(2) << "\n";
  return identical ? 0 : 1;
}

// ---------------------------------------------------------------- locate

int run_locate(const std::string& where, const std::string& corpus_dir, bool json) {
  const auto v = parse_numbers(where, 2, "--location");
  const ts::grid::GeoPoint p{v[0], v[1]};
  ts::grid::GridSpec spec;
  std::optional<ts::store::Corpus> corpus;
  if (!corpus_dir.empty()) {
    corpus = ts::store::Corpus::open(corpus_dir);
    spec = corpus->manifest().grid_spec;
  }
  const auto cell = ts::grid::cell_of(spec, p);
  const auto c = ts::grid::cell_center(spec, cell);
  nlohmann::json j = {{"lat", p.lat},
                      {"lon", p.lon},
                      {"cell_id", ts::grid::cell_id_string(cell)},
                      {"center_lat", c.lat},
                      {"center_lon", c.lon}};
  if (corpus) {
    const auto registry = ts::models::Registry::defaults();
    const auto loaded = ts::pipeline::LoadedCorpus::load(corpus_dir, registry);
    const bool present = loaded->tile(cell) != nullptr;
    j["in_corpus"] = present;
    for (const auto& id : loaded->model_ids()) {
      const auto* idx = loaded->index(id);
      const auto nearest = idx->cell(ts::encoder::nearest_tile(*idx, spec, p));
      j["nearest"][id] = ts::grid::cell_id_string(nearest);
    }
  }
  if (json) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << j["cell_id"].get<std::string>() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tilescout: embedding search over a global tile grid"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a seeded synthetic corpus");
  s->add_option("--cells", synth.cells, "Maximum number of cells")->capture_default_str();
  s->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  s->add_flag("--smooth", synth.smooth, "Spatially smooth vectors");
  s->add_option("--noise", synth.noise, "Smooth-mode noise weight")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--format", synth.format, "eesh1 or parquet")
      ->check(CLI::IsMember({"eesh1", "parquet"}))
      ->capture_default_str();
  s->add_option("--region", synth.region, "lat_min,lat_max,lon_min,lon_max");
  s->add_option("--models", synth.models, "Models to generate (default all)")->delimiter(',');
  s->add_option("--registry", synth.registry, "Model registry JSON");
  s->add_option("--stride", synth.stride, "Grid subsample stride")->capture_default_str();
  s->add_option("--shard-size", synth.shard_size, "Records per shard")->capture_default_str();
  s->add_option("--row-group-size", synth.row_group_size, "Records per row group")
      ->capture_default_str();
  s->add_flag("--json", synth.json, "Print the corpus manifest");

  std::string verify_corpus;
  std::string verify_registry;
  bool verify_json = false;
  auto* v = app.add_subcommand("verify", "Check shard checksums and manifests");
  v->add_option("--corpus", verify_corpus, "Corpus directory")->required();
  v->add_option("--registry", verify_registry, "Model registry JSON");
  v->add_flag("--json", verify_json, "Machine-readable report");

  QueryArgs query;
  auto* q = app.add_subcommand("query", "Run one query");
  q->add_option("--corpus", query.corpus, "Corpus directory")->required();
  q->add_option("--model", query.model, "Model id")->required();
  q->add_option("--text", query.text, "Text prompt");
  q->add_option("--cell", query.cell, "Query by corpus cell, e.g. R-45C1220");
  q->add_option("--location", query.location, "lat,lon");
  q->add_option("--raw", query.raw, "File with a raw vector");
  q->add_option("--image", query.image, "Image file (needs --encoder-url)");
  q->add_option("--content-type", query.content_type, "Image content type");
  q->add_option("--k", query.k, "Results to list")->capture_default_str();
  q->add_option("--fraction", query.fraction, "Mask fraction")->capture_default_str();
  q->add_option("--map", query.map, "Write the similarity map PNG here");
  q->add_option("--geojson", query.geojson, "Write the top-k GeoJSON here");
  q->add_flag("--json", query.json, "JSON output");
  q->add_option("--encoder-url", query.encoder_url, "Remote embedding endpoint");
  q->add_option("--location-mode", query.location_mode, "mock, remote or proxy")
      ->check(CLI::IsMember({"mock", "remote", "proxy", "nearest_tile_proxy"}))
      ->capture_default_str();
  q->add_option("--registry", query.registry, "Model registry JSON");
  q->add_option("--mock-seed", query.mock_seed, "Mock encoder seed")->capture_default_str();
  q->add_option("--width", query.width, "Map width")->capture_default_str();
  q->add_option("--height", query.height, "Map height")->capture_default_str();
  q->add_option("--aggregator", query.aggregator, "max or mean")
      ->check(CLI::IsMember({"max", "mean"}))
      ->capture_default_str();
  q->add_option("--background", query.background, "transparent or graticule")
      ->check(CLI::IsMember({"transparent", "graticule"}))
      ->capture_default_str();
  q->add_option("--threads", query.threads, "Scan threads (0 = all cores)")
      ->capture_default_str();

  std::string serve_corpus;
  std::string serve_bind;
  std::string serve_registry;
  std::string serve_mode;
  std::string serve_url;
  size_t serve_capacity = 0;
  uint32_t serve_width = 0;
  uint32_t serve_height = 0;
  auto* sv = app.add_subcommand("serve", "Start the HTTP API");
  sv->add_option("--corpus", serve_corpus, "Corpus directory or corpus.json (CORPUS_MANIFEST)");
  sv->add_option("--bind", serve_bind, "host:port (BIND)");
  sv->add_option("--registry", serve_registry, "Model registry JSON (REGISTRY)");
  sv->add_option("--encoder-mode", serve_mode, "mock, remote or proxy (ENCODER_MODE)")
      ->check(CLI::IsMember({"mock", "remote", "proxy"}));
  sv->add_option("--encoder-url", serve_url, "Remote embedding endpoint (ENCODER_URL)");
  sv->add_option("--cache-capacity", serve_capacity, "Session cache size (CACHE_CAPACITY)");
  sv->add_option("--raster-width", serve_width, "Map width (RASTER_WIDTH)");
  sv->add_option("--raster-height", serve_height, "Map height (RASTER_HEIGHT)");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "Measure scan latency");
  b->add_option("--corpus", bench.corpus, "Corpus directory");
  b->add_option("--synthetic", bench.synthetic, "Benchmark an in-memory random corpus of N");
  b->add_option("--model", bench.model, "Model id")->capture_default_str();
  b->add_option("--queries", bench.queries, "Number of queries")->capture_default_str();
  b->add_option("--k", bench.k, "Results per query")->capture_default_str();
  b->add_option("--fraction", bench.fraction, "Mask fraction")->capture_default_str();
  b->add_option("--threads", bench.threads, "Thread counts to compare (0 = all cores)")
      ->delimiter(',');
  b->add_option("--seed", bench.seed, "Seed for queries and synthetic vectors")
      ->capture_default_str();
  b->add_option("--registry", bench.registry, "Model registry JSON");

  std::string locate_where;
  std::string locate_corpus;
  bool locate_json = false;
  auto* l = app.add_subcommand("locate", "Grid cell of a coordinate");
  l->add_option("--location", locate_where, "lat,lon")->required();
  l->add_option("--corpus", locate_corpus, "Also report the nearest corpus cells");
  l->add_flag("--json", locate_json, "JSON output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*s) return run_synth(synth);
    if (*v) return run_verify(verify_corpus, verify_registry, verify_json);
    if (*q) return run_query(query);
    if (*b) return run_bench(bench);
    if (*l) return run_locate(locate_where, locate_corpus, locate_json);
    if (*sv) {
      auto c = ts::service::config_from_env();
      if (!serve_corpus.empty()) c.corpus_manifest = serve_corpus;
      if (!serve_bind.empty()) std::tie(c.bind_host, c.bind_port) = ts::service::parse_bind(serve_bind);
      if (!serve_registry.empty()) c.registry_path = serve_registry;
      if (!serve_mode.empty()) c.encoder_mode = ts::service::parse_encoder_mode(serve_mode);
      if (!serve_url.empty()) c.encoder_url = serve_url;
      if (serve_capacity > 0) c.cache_capacity = serve_capacity;
      if (serve_width > 0) c.raster.width = serve_width;
      if (serve_height > 0) c.raster.height = serve_height;
      return run_serve(c);
    }
  } catch (const UsageError& e) {
    std::cerr << "tilescout: " << e.what() << "\n";
    return 2;
  } catch (const ts::Error& e) {
    std::cerr << "tilescout: " << ts::error_code_token(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "tilescout: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
