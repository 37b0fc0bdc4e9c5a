#pragma once

#include <string>
#include <vector>

#include "erpdeck/nn/graph.hpp"

namespace erpdeck::nn {

// The five single-output decoders. Input layout is (1, channels, samples)
// for the 2-D nets and (channels, 1, samples) for the 1-D one; build_* and
// the shared input_shape_for helper agree on this.
ModelGraph build_sepconv1d(size_t channels = 15, size_t samples = 205);
ModelGraph build_eegnet(size_t channels = 15, size_t samples = 205);
ModelGraph build_eegtcnet(size_t channels = 15, size_t samples = 205);
ModelGraph build_eeginception(size_t channels = 15, size_t samples = 205);
ModelGraph build_deepconvnet(size_t channels = 15, size_t samples = 205);

const std::vector<std::string>& architecture_names();
bool is_architecture(const std::string& name);
ModelGraph build_architecture(const std::string& name, size_t channels = 15,
                              size_t samples = 205);

// How a (trials, channels, samples) epoch maps onto the graph input.
Shape input_shape_for(const std::string& name, size_t channels, size_t samples);

}  // namespace erpdeck::nn
