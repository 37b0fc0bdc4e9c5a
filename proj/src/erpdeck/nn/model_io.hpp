#pragma once

#include <string>

#include "erpdeck/nn/graph.hpp"

namespace erpdeck::nn {

// Model container: `<prefix>.model.json` manifest (architecture, input dims,
// ordered layer/parameter records) + `<prefix>.weights.f32` little-endian
// 32-bit blob in manifest order. Weights are stored at 32-bit precision;
// loading widens them back, so a loaded graph scores bit-identically across
// save/load cycles.
void save_model(const ModelGraph& g, const std::string& architecture, size_t channels,
                size_t samples, const std::string& prefix);

struct LoadedModel {
  ModelGraph graph;
  std::string architecture;
  size_t channels = 0;
  size_t samples = 0;
};

LoadedModel load_model(const std::string& prefix);

}  // namespace erpdeck::nn
