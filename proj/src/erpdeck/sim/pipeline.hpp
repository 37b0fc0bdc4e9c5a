#pragma once

#include <memory>
#include <string>
#include <vector>

#include "erpdeck/nn/train.hpp"
#include "erpdeck/signal.hpp"

namespace erpdeck::sim {

// Hyperparameters an operator can override per pipeline; defaults follow the
// documented configurations.
struct PipelineParams {
  nn::TrainConfig train;          // epochs default 500 (online evaluation)
  size_t xdawn_filters = 4;
  int decimation = 12;
  double en_alpha = 1e-3;
  double en_l1_ratio = 0.5;
  double svm_c = 1.0;
  double swlda_p_enter = 0.10;
  double swlda_p_remove = 0.15;
  size_t swlda_max_terms = 60;
};

// A trainable scorer mapping one epoch to a real-valued targetness score.
// fit/score consume epochs that already went through the shared online
// preprocessing (5-12 Hz zero-phase filter, 100-500 ms window, baseline
// corrected); each pipeline owns any further feature normalization.
class Pipeline {
 public:
  virtual ~Pipeline() = default;

  virtual const std::string& id() const = 0;
  // Probability-like scores threshold at 0.5 for the binary counts;
  // decision-valued scores threshold at 0.
  virtual bool probabilistic() const = 0;
  virtual bool fitted() const = 0;

  virtual void fit(const dsp::EpochTensor& train, uint64_t seed) = 0;
  virtual std::vector<double> score(const dsp::EpochTensor& trials) = 0;

  double threshold() const { return probabilistic() ? 0.5 : 0.0; }

  // Scorer container: `<prefix>.scorer.json` + `<prefix>.scorer.f32`;
  // neural pipelines additionally write the model container.
  virtual void save(const std::string& prefix) const = 0;

  // Complexity columns for reports: trainable parameter count and analytic
  // per-inference MACs (0 for the classical scorers).
  virtual uint64_t param_count() const = 0;
  virtual uint64_t analytic_macs() const = 0;
};

const std::vector<std::string>& pipeline_ids();          // all ten
const std::vector<std::string>& classical_pipeline_ids();
bool is_pipeline(const std::string& id);

std::unique_ptr<Pipeline> make_pipeline(const std::string& id, PipelineParams params = {});
std::unique_ptr<Pipeline> load_pipeline(const std::string& prefix);

}  // namespace erpdeck::sim
