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

// Python bindings. Structured results cross the boundary as JSON text and
// are decoded by the pure-Python wrapper in tilescout/__init__.py.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tilescout/error.hpp"
#include "tilescout/half.hpp"
#include "tilescout/pipeline.hpp"
#include "tilescout/synth.hpp"

namespace py = pybind11;
namespace ts = tilescout;

namespace {

py::array_t<float> to_array(const std::vector<float>& v) {
  py::array_t<float> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

class PyCorpus {
 public:
  PyCorpus(const std::string& path, const std::vector<std::string>& models)
      : registry_(ts::models::Registry::defaults()),
        corpus_(ts::pipeline::LoadedCorpus::load(path, registry_, models)) {}

  std::string info() const {
    return nlohmann::json{{"cells", corpus_->cell_count()},
                          {"records", corpus_->record_count()},
                          {"models", corpus_->model_ids()}}
        .dump();
  }

  /// Returns (response JSON, map PNG bytes).
  std::pair<std::string, py::bytes> query(const std::string& request_json,
                                          const std::string& location_mode, bool render,
                                          uint32_t width, uint32_t height) const {
    const auto request = ts::pipeline::QueryRequest::from_json(nlohmann::json::parse(request_json));
    ts::pipeline::PipelineOptions o;
    o.resolver.location_mode = ts::encoder::parse_location_mode(location_mode);
    o.render_map = render;
    o.raster = {width, height};
    ts::pipeline::QueryResult r;
    {
      py::gil_scoped_release release;
      r = ts::pipeline::run_query(*corpus_, registry_, request, o);
    }
    const nlohmann::json j = {
        {"model_id", r.model_id},
        {"results", ts::pipeline::results_json(r.results, corpus_->grid_spec())},
        {"mask_size", r.mask.selected.size()},
        {"corpus_size", r.corpus_size},
        {"geojson", r.geojson}};
    return {j.dump(), py::bytes(reinterpret_cast<const char*>(r.map_png.data()), r.map_png.size())};
  }

 private:
  ts::models::Registry registry_;
  std::shared_ptr<const ts::pipeline::LoadedCorpus> corpus_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "tilescout native core";

  static py::exception<ts::Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ts::Error& e) {
      const std::string msg = std::string(ts::error_code_token(e.code())) + ": " + e.what();
      py::set_error(error, msg.c_str());
    }
  });

  m.def("models_json", [] { return ts::models::Registry::defaults().to_json().dump(); });

  m.def("cell_of", [](double lat, double lon) {
    return ts::grid::cell_id_string(ts::grid::cell_of(ts::grid::GridSpec{}, {lat, lon}));
  });
  m.def("cell_center", [](const std::string& cell_id) {
    const auto c = ts::grid::cell_center(ts::grid::GridSpec{}, ts::grid::parse_cell_id(cell_id));
    return std::make_pair(c.lat, c.lon);
  });
  m.def("rows_total", [] { return ts::grid::rows_total(ts::grid::GridSpec{}); });

  m.def("fnv1a64", [](py::bytes data) {
    const std::string s = data;
    return ts::encoder::fnv1a64(
        {reinterpret_cast<const uint8_t*>(s.data()), s.size()});
  });
  m.def("mock_text_encoder",
        [](uint64_t seed, uint32_t dim, const std::string& prompt) {
          return to_array(ts::encoder::mock_text_encoder(seed, dim, prompt));
        },
        py::arg("seed"), py::arg("dim"), py::arg("prompt"));
  m.def("mock_location_encoder",
        [](double lat, double lon, uint32_t dim, uint64_t seed, size_t anchors) {
          return to_array(ts::encoder::mock_location_encoder(
              ts::encoder::MockEncoderConfig::with_seed(seed, anchors), {lat, lon}, dim));
        },
        py::arg("lat"), py::arg("lon"), py::arg("dim"),
        py::arg("seed") = ts::encoder::kDefaultMockSeed, py::arg("anchors") = 1024);
  m.attr("DEFAULT_MOCK_SEED") = ts::encoder::kDefaultMockSeed;

  m.def("float_to_half", [](float x) { return ts::search::f32_to_f16(x); });
  m.def("half_to_float", [](uint16_t h) { return ts::search::f16_to_f32(h); });

  m.def("synth_corpus",
        [](const std::filesystem::path& out, uint64_t cells, uint64_t seed, bool smooth,
           const std::string& format, const std::vector<std::string>& models,
           uint64_t row_group_size) {
          ts::synth::SynthOptions o;
          o.cell_limit = cells;
          o.seed = seed;
          o.smooth = smooth;
          o.model_ids = models;
          ts::store::CorpusWriteOptions w;
          w.format = ts::store::parse_shard_format(format);
          w.row_group_size = row_group_size;
          py::gil_scoped_release release;
          return nlohmann::json(ts::synth::synth_corpus(out, ts::grid::GridSpec{},
                                                        ts::models::Registry::defaults(), o, w))
              .dump();
        },
        py::arg("out"), py::arg("cells"), py::arg("seed") = 42, py::arg("smooth") = false,
        py::arg("format") = "eesh1", py::arg("models") = std::vector<std::string>{},
        py::arg("row_group_size") = 1024);

  m.def("verify_corpus", [](const std::filesystem::path& path) {
    const auto registry = ts::models::Registry::defaults();
    const auto report = ts::store::verify_corpus(path, &registry);
    nlohmann::json issues = nlohmann::json::array();
    for (const auto& i : report.issues) {
      issues.push_back({{"shard_id", i.shard_id}, {"message", i.message}});
    }
    return nlohmann::json{{"ok", report.ok()},
                          {"shards_checked", report.shards_checked},
                          {"records_checked", report.records_checked},
                          {"issues", issues}}
        .dump();
  });

  py::class_<PyCorpus>(m, "Corpus")
      .def(py::init<const std::string&, const std::vector<std::string>&>(), py::arg("path"),
           py::arg("models") = std::vector<std::string>{})
      .def("info_json", &PyCorpus::info)
      .def("query_json", &PyCorpus::query, py::arg("request"), py::arg("location_mode") = "mock",
           py::arg("render") = false, py::arg("width") = 1440, py::arg("height") = 720);
}
