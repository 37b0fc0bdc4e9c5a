#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "erpdeck/metrics.hpp"
#include "erpdeck/nn/architectures.hpp"
#include "erpdeck/nn/train.hpp"
#include "erpdeck/parallel.hpp"
#include "erpdeck/rng.hpp"

using namespace erpdeck;
using namespace erpdeck::nn;

namespace {

// Linearly separable toy data on the EEGNet input geometry: class 1 carries a
// bump on a fixed channel/time patch.
void toy_set(size_t n, Tensor* x, std::vector<int>* y, uint64_t seed, double snr = 3.0) {
  Rng rng(seed);
  *x = Tensor({n, 1, 15, 205});
  y->resize(n);
  for (size_t i = 0; i < n; ++i) {
    (*y)[i] = rng.uniform() < 0.5;
    double* p = x->data() + i * 15 * 205;
    for (size_t k = 0; k < 15 * 205; ++k) p[k] = rng.normal();
    if ((*y)[i]) {
      for (size_t c = 5; c < 8; ++c) {
        for (size_t t = 100; t < 140; ++t) p[c * 205 + t] += snr;
      }
    }
  }
}

std::vector<double> weight_snapshot(ModelGraph& g) {
  std::vector<double> w;
  for (Param* p : g.all_params()) {
    w.insert(w.end(), p->value.raw().begin(), p->value.raw().end());
  }
  return w;
}

}  // namespace

TEST_CASE("smoothed loss is nonincreasing on a separable toy set") {
  Tensor x;
  std::vector<int> y;
  toy_set(128, &x, &y, 11);
  ModelGraph g = build_eegnet();
  g.init_weights(5);
  TrainConfig cfg;
  cfg.epochs = 30;
  const TrainResult r = train(g, x, y, cfg, 3);

  // 5-epoch moving average must never increase beyond noise.
  auto smooth = [&](size_t i) {
    double s = 0.0;
    for (size_t k = i; k < i + 5; ++k) s += r.epoch_loss[k];
    return s / 5.0;
  };
  for (size_t i = 0; i + 10 < r.epoch_loss.size(); ++i) {
    CHECK(smooth(i + 5) <= smooth(i) + 1e-6);
  }
  CHECK(r.epoch_loss.back() < 0.6 * r.epoch_loss.front());
}

TEST_CASE("training reaches AUC > 0.99 on the toy set within 50 epochs") {
  Tensor x;
  std::vector<int> y;
  toy_set(256, &x, &y, 23);
  ModelGraph g = build_eegnet();
  g.init_weights(9);
  TrainConfig cfg;
  cfg.epochs = 50;
  train(g, x, y, cfg, 7);
  CHECK(metrics::auc(predict(g, x), y) > 0.99);
}

TEST_CASE("a zero-epoch budget leaves the weights untouched") {
  ModelGraph g = build_sepconv1d();
  g.init_weights(2);
  const auto before = weight_snapshot(g);
  Tensor x;
  std::vector<int> y;
  toy_set(32, &x, &y, 3);
  x.reshape({32, 15, 1, 205});
  TrainConfig cfg;
  cfg.epochs = 0;
  train(g, x, y, cfg, 1);
  CHECK(weight_snapshot(g) == before);
}

TEST_CASE("1:8 class imbalance is preserved and loss still decreases") {
  Rng rng(31);
  const size_t n = 144;
  Tensor x({n, 1, 15, 205});
  std::vector<int> y(n);
  for (size_t i = 0; i < n; ++i) {
    y[i] = i % 9 == 0;  // exactly one target per nine trials
    double* p = x.data() + i * 15 * 205;
    for (size_t k = 0; k < 15 * 205; ++k) p[k] = rng.normal();
    if (y[i]) {
      for (size_t t = 80; t < 120; ++t) p[6 * 205 + t] += 3.0;
    }
  }
  ModelGraph g = build_eegnet();
  g.init_weights(12);
  TrainConfig cfg;
  cfg.epochs = 20;
  const TrainResult r = train(g, x, y, cfg, 5);
  CHECK(r.epoch_loss.back() < r.epoch_loss.front());
}

TEST_CASE("training is deterministic under the seed and the thread count") {
  Tensor x;
  std::vector<int> y;
  toy_set(96, &x, &y, 41);
  TrainConfig cfg;
  cfg.epochs = 3;

  ModelGraph a = build_eegnet();
  a.init_weights(77);
  train(a, x, y, cfg, 13);
  const auto wa = weight_snapshot(a);

  ModelGraph b = build_eegnet();
  b.init_weights(77);
  train(b, x, y, cfg, 13);
  CHECK(weight_snapshot(b) == wa);

  // Same computation pinned to one thread must agree bit for bit.
  ThreadPool::set_global_threads(1);
  ModelGraph c = build_eegnet();
  c.init_weights(77);
  train(c, x, y, cfg, 13);
  ThreadPool::set_global_threads(0);
  CHECK(weight_snapshot(c) == wa);

  ModelGraph d = build_eegnet();
  d.init_weights(78);
  train(d, x, y, cfg, 13);
  CHECK(weight_snapshot(d) != wa);
}

TEST_CASE("training rejects shape mismatches") {
  ModelGraph g = build_eegnet();
  g.init_weights(1);
  Tensor x({4, 1, 15, 100});
  std::vector<int> y(4, 0);
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(g, x, y, cfg, 1), Error);
}
