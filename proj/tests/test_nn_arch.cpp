#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "erpdeck/nn/architectures.hpp"
#include "erpdeck/nn/complexity.hpp"
#include "erpdeck/nn/layers.hpp"
#include "erpdeck/nn/model_io.hpp"
#include "erpdeck/rng.hpp"

using namespace erpdeck;
using namespace erpdeck::nn;

namespace {

void expect_shape(const ModelGraph& g, const std::string& layer, Shape want) {
  const Shape* got = g.shape_by_name(layer);
  REQUIRE_MESSAGE(got != nullptr, layer.c_str());
  CAPTURE(layer);
  CHECK(*got == want);
}

Tensor random_batch(const Shape& s, size_t n, uint64_t seed) {
  Rng rng(seed);
  Tensor x({n, s[0], s[1], s[2]});
  for (size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("sepconv1d: per-layer shapes and parameter count") {
  ModelGraph g = build_sepconv1d();
  expect_shape(g, "pad", {15, 1, 213});
  expect_shape(g, "sepconv", {4, 1, 25});
  expect_shape(g, "flatten", {100, 1, 1});
  expect_shape(g, "dense", {1, 1, 1});
  // Documented bias convention (single bias on the pointwise stage):
  // 240 depthwise + 60 pointwise + 4 bias + 101 dense.
  CHECK(g.param_count() == 405);
}

TEST_CASE("eegnet: per-layer shapes and 1,185 parameters") {
  ModelGraph g = build_eegnet();
  expect_shape(g, "conv_temporal", {8, 15, 205});
  expect_shape(g, "conv_spatial", {16, 1, 205});
  expect_shape(g, "bn_spatial", {16, 1, 205});
  expect_shape(g, "pool_1", {16, 1, 51});
  expect_shape(g, "conv_separable", {16, 1, 51});
  expect_shape(g, "pool_2", {16, 1, 6});
  expect_shape(g, "flatten", {96, 1, 1});
  expect_shape(g, "dense", {1, 1, 1});
  CHECK(g.param_count() == 1185);
}

TEST_CASE("eegtcnet: per-layer shapes and parameter count") {
  ModelGraph g = build_eegtcnet();
  expect_shape(g, "conv_temporal", {8, 15, 205});
  expect_shape(g, "conv_spatial", {16, 1, 205});
  expect_shape(g, "pool_1", {16, 1, 25});
  expect_shape(g, "conv_separable", {16, 1, 25});
  expect_shape(g, "pool_2", {16, 1, 3});
  expect_shape(g, "tcn1_add", {12, 1, 3});
  expect_shape(g, "tcn2_add", {12, 1, 3});
  expect_shape(g, "last_step", {12, 1, 1});
  expect_shape(g, "dense", {1, 1, 1});
  // Front end 1088, residual blocks 1620 + 1224 (biased convolutions and a
  // biased 1x1 downsample), head 13.
  CHECK(g.param_count() == 3945);
}

TEST_CASE("eeginception: per-layer shapes and 15,273 parameters") {
  ModelGraph g = build_eeginception();
  expect_shape(g, "c1_conv", {8, 15, 205});
  expect_shape(g, "d1_conv", {16, 1, 205});
  expect_shape(g, "c2_conv", {8, 15, 205});
  expect_shape(g, "d2_conv", {16, 1, 205});
  expect_shape(g, "c3_conv", {8, 15, 205});
  expect_shape(g, "d3_conv", {16, 1, 205});
  expect_shape(g, "concat_1", {48, 1, 205});
  expect_shape(g, "pool_1", {48, 1, 51});
  expect_shape(g, "c4_conv", {8, 1, 51});
  expect_shape(g, "c5_conv", {8, 1, 51});
  expect_shape(g, "c6_conv", {8, 1, 51});
  expect_shape(g, "concat_2", {24, 1, 51});
  expect_shape(g, "pool_2", {24, 1, 25});
  expect_shape(g, "c7_conv", {12, 1, 25});
  expect_shape(g, "pool_3", {12, 1, 12});
  expect_shape(g, "c8_conv", {6, 1, 12});
  expect_shape(g, "pool_4", {6, 1, 6});
  expect_shape(g, "flatten", {36, 1, 1});
  CHECK(g.param_count() == 15273);
}

TEST_CASE("deepconvnet: per-layer shapes and 143,301 parameters") {
  ModelGraph g = build_deepconvnet();
  expect_shape(g, "conv_1", {25, 15, 201});
  expect_shape(g, "conv_spatial", {25, 1, 201});
  expect_shape(g, "pool_1", {25, 1, 100});
  expect_shape(g, "conv_2", {50, 1, 96});
  expect_shape(g, "pool_2", {50, 1, 48});
  expect_shape(g, "conv_3", {100, 1, 44});
  expect_shape(g, "pool_3", {100, 1, 22});
  expect_shape(g, "conv_4", {200, 1, 18});
  expect_shape(g, "pool_4", {200, 1, 9});
  expect_shape(g, "flatten", {1800, 1, 1});
  CHECK(g.param_count() == 143301);
}

TEST_CASE("analytic MACs match the instrumented inner-loop count exactly") {
  for (const std::string& name : architecture_names()) {
    ModelGraph g = build_architecture(name);
    g.init_weights(1);
    const ComplexityReport r = complexity(g, 3);
    CAPTURE(name);
    CHECK(r.macs_analytic == r.macs_instrumented);
  }
}

TEST_CASE("sepconv1d analytic MACs equal 7.6K") {
  ModelGraph g = build_sepconv1d();
  // 15*25*16 depthwise + 4*25*15 pointwise + 100 dense.
  CHECK(g.analytic_macs() == 7600);
}

TEST_CASE("eegnet first conv contributes 8*15*205*32 MACs") {
  ModelGraph g = build_eegnet();
  // Difference against a graph stub is overkill; the layer formula is direct.
  Conv2d probe("probe", 1, 8, 1, 32, PadMode::same, false);
  CHECK(probe.analytic_macs({{1, 15, 205}}) == 787200ULL);
  CHECK(g.analytic_macs() > 787200ULL);
}

TEST_CASE("eegnet total MACs stay within 20% of the reported 978.3K") {
  ModelGraph g = build_eegnet();
  const double macs = static_cast<double>(g.analytic_macs());
  CHECK(macs > 0.8 * 978300.0);
  CHECK(macs < 1.2 * 978300.0);
}

TEST_CASE("unknown architecture name is rejected") {
  CHECK_THROWS_AS(build_architecture("vggnet"), Error);
}

TEST_CASE("forward produces scores in [0, 1]; zero weights give 0.5") {
  for (const std::string& name : architecture_names()) {
    ModelGraph g = build_architecture(name);
    g.init_weights(7);
    const Shape in = g.input_shape();
    const auto scores = g.forward(random_batch(in, 2, 3), false);
    CAPTURE(name);
    for (double s : scores) {
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
    for (size_t i = 0; i < g.node_count(); ++i) {
      for (Param& p : g.layer(i).params()) {
        if (p.name != "run_var") p.value.fill(0.0);
      }
    }
    const auto zeroed = g.forward(random_batch(in, 1, 4), false);
    CHECK(zeroed[0] == doctest::Approx(0.5));
  }
}

TEST_CASE("model files round-trip bit-exactly after the f32 snap") {
  ModelGraph g = build_eegnet();
  g.init_weights(42);
  const std::string prefix = "/tmp/erpdeck_test_model";
  save_model(g, "eegnet", 15, 205, prefix);

  LoadedModel m1 = load_model(prefix);
  CHECK(m1.architecture == "eegnet");
  save_model(m1.graph, "eegnet", 15, 205, prefix + "_2");
  LoadedModel m2 = load_model(prefix + "_2");

  const Tensor x = random_batch(g.input_shape(), 3, 9);
  const auto s1 = m1.graph.forward(x, false);
  const auto s2 = m2.graph.forward(x, false);
  for (size_t i = 0; i < s1.size(); ++i) CHECK(s1[i] == s2[i]);

  // Loaded weights are close to the trained doubles (f32 rounding only).
  const auto s0 = g.forward(x, false);
  for (size_t i = 0; i < s0.size(); ++i) CHECK(s1[i] == doctest::Approx(s0[i]).epsilon(1e-4));

  // Truncated blob is rejected.
  {
    std::ifstream in(prefix + ".weights.f32", std::ios::binary | std::ios::ate);
    const std::streamsize bytes = in.tellg();
    std::vector<char> buf(static_cast<size_t>(bytes) - 8);
    in.seekg(0);
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    std::ofstream out(prefix + ".weights.f32", std::ios::binary);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  CHECK_THROWS_AS(load_model(prefix), Error);

  std::remove((prefix + ".model.json").c_str());
  std::remove((prefix + ".weights.f32").c_str());
  std::remove((prefix + "_2.model.json").c_str());
  std::remove((prefix + "_2.weights.f32").c_str());
}
