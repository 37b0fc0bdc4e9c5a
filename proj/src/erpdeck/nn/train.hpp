#pragma once

#include <cstdint>
#include <vector>

#include "erpdeck/nn/graph.hpp"

namespace erpdeck::nn {

// Optimization settings shared by every network: AdamW at a fixed learning
// rate with decoupled weight decay, binary cross-entropy, no class
// rebalancing. epochs defaults to the online evaluation's 500; comparison
// runs use 250.
struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
  size_t batch = 64;
  size_t epochs = 500;

  void validate() const;
};

class AdamW {
 public:
  explicit AdamW(const TrainConfig& cfg) : cfg_(cfg) {}

  // w <- w - lr * mhat / (sqrt(vhat) + eps) - lr * weight_decay * w
  void step(const std::vector<Param*>& params);

 private:
  TrainConfig cfg_;
  uint64_t t_ = 0;
  std::vector<Tensor> m_, v_;
};

// Mean binary cross-entropy; scores are clamped away from {0, 1} before the
// logs so saturated outputs stay finite.
double bce_loss(const std::vector<double>& scores, const std::vector<int>& labels);
std::vector<double> bce_grad(const std::vector<double>& scores, const std::vector<int>& labels);

struct TrainResult {
  std::vector<double> epoch_loss;  // mean over batches
};

// Mini-batch training with a seeded shuffle; deterministic for a fixed
// (graph init, seed, config). x is (N, C, H, W), labels binary.
TrainResult train(ModelGraph& g, const Tensor& x, const std::vector<int>& labels,
                  const TrainConfig& cfg, uint64_t seed);

// Eval-mode scores (dropout off, running batchnorm statistics).
std::vector<double> predict(ModelGraph& g, const Tensor& x);

}  // namespace erpdeck::nn
