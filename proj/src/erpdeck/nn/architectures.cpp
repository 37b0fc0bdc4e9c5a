#include "erpdeck/nn/architectures.hpp"

#include <memory>

#include "erpdeck/nn/layers.hpp"

namespace erpdeck::nn {

namespace {

int act(ModelGraph& g, const std::string& name, Act a, int in) {
  return g.add(std::make_unique<Activation>(name, a), {in});
}

int head(ModelGraph& g, size_t in_features, double max_norm, int in) {
  const int flat = g.add(std::make_unique<Flatten>("flatten"), {in});
  const int dense = g.add(std::make_unique<Dense>("dense", in_features, 1, true, max_norm), {flat});
  return act(g, "sigmoid", Act::sigmoid, dense);
}

}  // namespace

ModelGraph build_sepconv1d(size_t channels, size_t samples) {
  // Single separable temporal convolution (stride 8, tanh) into the sigmoid
  // head. The 1-D signal rides on the W axis with electrodes as channels.
  ModelGraph g;
  g.set_input_shape({channels, 1, samples});
  const int pad = g.add(std::make_unique<ZeroPad2d>("pad", PadSpec{0, 0, 4, 4}), {-1});
  const int conv = g.add(std::make_unique<SeparableConv2d>("sepconv", channels, 4, 1, 16,
                                                           PadMode::valid, true, 1, 8),
                         {pad});
  const int t = act(g, "tanh", Act::tanh_, conv);
  const size_t out_w = (samples + 8 - 16) / 8 + 1;
  head(g, 4 * out_w, 0.0, t);
  return g;
}

ModelGraph build_eegnet(size_t channels, size_t samples) {
  // 8 temporal filters (half the sampling rate long), depthwise spatial
  // filters with depth 2 and unit max-norm, then a separable block.
  ModelGraph g;
  g.set_input_shape({1, channels, samples});
  int n = g.add(std::make_unique<Conv2d>("conv_temporal", 1, 8, 1, 32, PadMode::same, false), {-1});
  n = g.add(std::make_unique<BatchNorm2d>("bn_temporal", 8), {n});
  n = g.add(std::make_unique<DepthwiseConv2d>("conv_spatial", 8, 2, channels, 1, false, 1.0), {n});
  n = g.add(std::make_unique<BatchNorm2d>("bn_spatial", 16), {n});
  n = act(g, "elu_1", Act::elu, n);
  n = g.add(std::make_unique<AvgPool2d>("pool_1", 1, 4), {n});
  n = g.add(std::make_unique<Dropout>("drop_1", 0.5), {n});
  n = g.add(std::make_unique<SeparableConv2d>("conv_separable", 16, 16, 1, 16, PadMode::same,
                                              false),
            {n});
  n = g.add(std::make_unique<BatchNorm2d>("bn_separable", 16), {n});
  n = act(g, "elu_2", Act::elu, n);
  n = g.add(std::make_unique<AvgPool2d>("pool_2", 1, 8), {n});
  n = g.add(std::make_unique<Dropout>("drop_2", 0.5), {n});
  const size_t feat = 16 * (samples / 4 / 8);
  head(g, feat, 0.25, n);
  return g;
}

namespace {

// Dilated causal residual block: symmetric zero pad + valid conv + right
// chomp gives the causal geometry; a 1x1 projection aligns channels on the
// skip path when needed.
int tcn_block(ModelGraph& g, const std::string& prefix, int in, size_t in_ch, size_t filters,
              size_t kernel, size_t dilation, double dropout) {
  const size_t pad = (kernel - 1) * dilation;
  int n = g.add(std::make_unique<ZeroPad2d>(prefix + "_pad1", PadSpec{0, 0, pad, pad}), {in});
  n = g.add(std::make_unique<Conv2d>(prefix + "_conv1", in_ch, filters, 1, kernel, PadMode::valid,
                                     true, 0.0, 1, 1, 1, dilation),
            {n});
  n = g.add(std::make_unique<Crop1d>(prefix + "_chomp1", 0, pad), {n});
  n = g.add(std::make_unique<BatchNorm2d>(prefix + "_bn1", filters), {n});
  n = act(g, prefix + "_elu1", Act::elu, n);
  n = g.add(std::make_unique<Dropout>(prefix + "_drop1", dropout), {n});

  n = g.add(std::make_unique<ZeroPad2d>(prefix + "_pad2", PadSpec{0, 0, pad, pad}), {n});
  n = g.add(std::make_unique<Conv2d>(prefix + "_conv2", filters, filters, 1, kernel,
                                     PadMode::valid, true, 0.0, 1, 1, 1, dilation),
            {n});
  n = g.add(std::make_unique<Crop1d>(prefix + "_chomp2", 0, pad), {n});
  n = g.add(std::make_unique<BatchNorm2d>(prefix + "_bn2", filters), {n});
  n = act(g, prefix + "_elu2", Act::elu, n);
  n = g.add(std::make_unique<Dropout>(prefix + "_drop2", dropout), {n});

  int skip = in;
  if (in_ch != filters) {
    skip = g.add(std::make_unique<Conv2d>(prefix + "_downsample", in_ch, filters, 1, 1,
                                          PadMode::valid, true),
                 {in});
  }
  n = g.add(std::make_unique<Add>(prefix + "_add"), {n, skip});
  return act(g, prefix + "_elu_out", Act::elu, n);
}

}  // namespace

ModelGraph build_eegtcnet(size_t channels, size_t samples) {
  // EEGNet front end (both pools 1x8) feeding two dilated causal residual
  // blocks; the last time step drives the sigmoid head.
  ModelGraph g;
  g.set_input_shape({1, channels, samples});
  int n = g.add(std::make_unique<Conv2d>("conv_temporal", 1, 8, 1, 32, PadMode::same, false), {-1});
  n = g.add(std::make_unique<BatchNorm2d>("bn_temporal", 8), {n});
  n = g.add(std::make_unique<DepthwiseConv2d>("conv_spatial", 8, 2, channels, 1, false, 1.0), {n});
  n = g.add(std::make_unique<BatchNorm2d>("bn_spatial", 16), {n});
  n = act(g, "elu_1", Act::elu, n);
  n = g.add(std::make_unique<AvgPool2d>("pool_1", 1, 8), {n});
  n = g.add(std::make_unique<Dropout>("drop_1", 0.5), {n});
  n = g.add(std::make_unique<SeparableConv2d>("conv_separable", 16, 16, 1, 16, PadMode::same,
                                              false),
            {n});
  n = g.add(std::make_unique<BatchNorm2d>("bn_separable", 16), {n});
  n = act(g, "elu_2", Act::elu, n);
  n = g.add(std::make_unique<AvgPool2d>("pool_2", 1, 8), {n});
  n = g.add(std::make_unique<Dropout>("drop_2", 0.5), {n});

  n = tcn_block(g, "tcn1", n, 16, 12, 4, 1, 0.2);
  n = tcn_block(g, "tcn2", n, 12, 12, 4, 2, 0.2);

  const size_t t_steps = samples / 8 / 8;
  n = g.add(std::make_unique<Crop1d>("last_step", t_steps - 1, 0), {n});
  head(g, 12, 0.0, n);
  return g;
}

namespace {

int inception_conv_block(ModelGraph& g, const std::string& name, int in, size_t in_ch,
                         size_t filters, size_t kernel, bool bias) {
  int n = g.add(std::make_unique<Conv2d>(name + "_conv", in_ch, filters, 1, kernel, PadMode::same,
                                         bias),
                {in});
  n = g.add(std::make_unique<BatchNorm2d>(name + "_bn", filters), {n});
  n = act(g, name + "_elu", Act::elu, n);
  return g.add(std::make_unique<Dropout>(name + "_drop", 0.2), {n});
}

int inception_depthwise_block(ModelGraph& g, const std::string& name, int in, size_t in_ch,
                              size_t channels) {
  int n = g.add(std::make_unique<DepthwiseConv2d>(name + "_conv", in_ch, 2, channels, 1, false),
                {in});
  n = g.add(std::make_unique<BatchNorm2d>(name + "_bn", in_ch * 2), {n});
  n = act(g, name + "_elu", Act::elu, n);
  return g.add(std::make_unique<Dropout>(name + "_drop", 0.2), {n});
}

}  // namespace

ModelGraph build_eeginception(size_t channels, size_t samples) {
  // Two inception modules at three temporal scales plus an output module.
  // The output-module convolutions carry no bias.
  ModelGraph g;
  g.set_input_shape({1, channels, samples});

  const int c1 = inception_conv_block(g, "c1", -1, 1, 8, 64, true);
  const int d1 = inception_depthwise_block(g, "d1", c1, 8, channels);
  const int c2 = inception_conv_block(g, "c2", -1, 1, 8, 32, true);
  const int d2 = inception_depthwise_block(g, "d2", c2, 8, channels);
  const int c3 = inception_conv_block(g, "c3", -1, 1, 8, 16, true);
  const int d3 = inception_depthwise_block(g, "d3", c3, 8, channels);

  int n = g.add(std::make_unique<Concat>("concat_1"), {d1, d2, d3});
  n = g.add(std::make_unique<AvgPool2d>("pool_1", 1, 4), {n});

  const int c4 = inception_conv_block(g, "c4", n, 48, 8, 16, true);
  const int c5 = inception_conv_block(g, "c5", n, 48, 8, 8, true);
  const int c6 = inception_conv_block(g, "c6", n, 48, 8, 4, true);
  n = g.add(std::make_unique<Concat>("concat_2"), {c4, c5, c6});
  n = g.add(std::make_unique<AvgPool2d>("pool_2", 1, 2), {n});

  n = inception_conv_block(g, "c7", n, 24, 12, 8, false);
  n = g.add(std::make_unique<AvgPool2d>("pool_3", 1, 2), {n});
  n = inception_conv_block(g, "c8", n, 12, 6, 4, false);
  n = g.add(std::make_unique<AvgPool2d>("pool_4", 1, 2), {n});

  const size_t w = samples / 4 / 2 / 2 / 2;
  head(g, 6 * w, 0.0, n);
  return g;
}

ModelGraph build_deepconvnet(size_t channels, size_t samples) {
  // Four conv-pool blocks with rising filter counts; valid padding, bias-free
  // convolutions under a max-norm of 2, dense head under 0.5.
  ModelGraph g;
  g.set_input_shape({1, channels, samples});
  int n = g.add(std::make_unique<Conv2d>("conv_1", 1, 25, 1, 5, PadMode::valid, false, 2.0), {-1});
  n = g.add(std::make_unique<Conv2d>("conv_spatial", 25, 25, channels, 1, PadMode::valid, false,
                                     2.0),
            {n});
  n = g.add(std::make_unique<BatchNorm2d>("bn_1", 25), {n});
  n = act(g, "elu_1", Act::elu, n);
  n = g.add(std::make_unique<MaxPool2d>("pool_1", 1, 2), {n});
  n = g.add(std::make_unique<Dropout>("drop_1", 0.5), {n});

  size_t ch = 25;
  size_t width = samples - 4;
  width /= 2;
  for (int block = 2; block <= 4; ++block) {
    const std::string suffix = "_" + std::to_string(block);
    const size_t filters = ch * 2;
    n = g.add(std::make_unique<Conv2d>("conv" + suffix, ch, filters, 1, 5, PadMode::valid, false,
                                       2.0),
              {n});
    n = g.add(std::make_unique<BatchNorm2d>("bn" + suffix, filters), {n});
    n = act(g, "elu" + suffix, Act::elu, n);
    n = g.add(std::make_unique<MaxPool2d>("pool" + suffix, 1, 2), {n});
    n = g.add(std::make_unique<Dropout>("drop" + suffix, 0.5), {n});
    ch = filters;
    width = (width - 4) / 2;
  }
  head(g, ch * width, 0.5, n);
  return g;
}

const std::vector<std::string>& architecture_names() {
  static const std::vector<std::string> names = {"sepconv1d", "eegnet", "eegtcnet",
                                                 "eeginception", "deepconvnet"};
  return names;
}

bool is_architecture(const std::string& name) {
  for (const std::string& n : architecture_names()) {
    if (n == name) return true;
  }
  return false;
}

ModelGraph build_architecture(const std::string& name, size_t channels, size_t samples) {
  if (name == "sepconv1d") return build_sepconv1d(channels, samples);
  if (name == "eegnet") return build_eegnet(channels, samples);
  if (name == "eegtcnet") return build_eegtcnet(channels, samples);
  if (name == "eeginception") return build_eeginception(channels, samples);
  if (name == "deepconvnet") return build_deepconvnet(channels, samples);
  fail(Errc::unknown_architecture, name);
}

Shape input_shape_for(const std::string& name, size_t channels, size_t samples) {
  if (name == "sepconv1d") return {channels, 1, samples};
  if (is_architecture(name)) return {1, channels, samples};
  fail(Errc::unknown_architecture, name);
}

}  // namespace erpdeck::nn
