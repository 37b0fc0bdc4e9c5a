#include "erpdeck/nn/model_io.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "erpdeck/nn/architectures.hpp"
#include "erpdeck/signal_io.hpp"

namespace erpdeck::nn {

using nlohmann::json;

void save_model(const ModelGraph& g, const std::string& architecture, size_t channels,
                size_t samples, const std::string& prefix) {
  require(is_architecture(architecture), Errc::unknown_architecture, architecture);
  json manifest;
  manifest["format_version"] = 1;
  manifest["kind"] = "model";
  manifest["architecture"] = architecture;
  manifest["input"] = {{"channels", channels}, {"samples", samples}};

  std::vector<double> blob;
  json layers = json::array();
  uint64_t trainable = 0;
  for (size_t i = 0; i < g.node_count(); ++i) {
    const Layer& layer = g.layer(i);
    json lj;
    lj["name"] = layer.name();
    lj["kind"] = layer.kind();
    json pj = json::array();
    for (const Param& p : layer.params()) {
      pj.push_back({{"name", p.name},
                    {"shape", p.value.shape()},
                    {"count", p.value.size()},
                    {"trainable", p.trainable}});
      blob.insert(blob.end(), p.value.raw().begin(), p.value.raw().end());
      if (p.trainable) trainable += p.value.size();
    }
    lj["params"] = std::move(pj);
    layers.push_back(std::move(lj));
  }
  manifest["layers"] = std::move(layers);
  manifest["trainable_params"] = trainable;
  manifest["total_values"] = blob.size();

  std::ofstream out(prefix + ".model.json");
  require(out.good(), Errc::io_error, "cannot open " + prefix + ".model.json for writing");
  out << manifest.dump(2) << '\n';
  require(out.good(), Errc::io_error, "write failed for " + prefix + ".model.json");
  dsp::write_f32_blob(prefix + ".weights.f32", blob);
}

LoadedModel load_model(const std::string& prefix) {
  std::ifstream in(prefix + ".model.json");
  require(in.good(), Errc::io_error, "cannot open " + prefix + ".model.json");
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    fail(Errc::corrupt_model, prefix + ".model.json: " + std::string(e.what()));
  }

  LoadedModel m;
  try {
    require(manifest.at("kind") == "model", Errc::corrupt_model, prefix + ": kind is not 'model'");
    m.architecture = manifest.at("architecture").get<std::string>();
    m.channels = manifest.at("input").at("channels").get<size_t>();
    m.samples = manifest.at("input").at("samples").get<size_t>();
  } catch (const json::exception& e) {
    fail(Errc::corrupt_model, prefix + ".model.json: " + std::string(e.what()));
  }
  m.graph = build_architecture(m.architecture, m.channels, m.samples);

  const std::vector<double> blob = dsp::read_f32_blob(prefix + ".weights.f32");
  const uint64_t expected = manifest.value("total_values", uint64_t{0});
  require(blob.size() == expected, Errc::corrupt_model,
          prefix + ": weight blob length does not match manifest");

  size_t off = 0;
  for (size_t i = 0; i < m.graph.node_count(); ++i) {
    for (Param& p : m.graph.layer(i).params()) {
      require(off + p.value.size() <= blob.size(), Errc::corrupt_model,
              prefix + ": weight blob truncated");
      for (size_t k = 0; k < p.value.size(); ++k) {
        const double v = blob[off + k];
        require(std::isfinite(v), Errc::corrupt_model, prefix + ": non-finite weight");
        p.value[k] = v;
      }
      off += p.value.size();
    }
  }
  require(off == blob.size(), Errc::corrupt_model, prefix + ": weight blob has trailing data");
  return m;
}

}  // namespace erpdeck::nn
