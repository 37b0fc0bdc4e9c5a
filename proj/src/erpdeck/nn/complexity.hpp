#pragma once

#include <cstdint>
#include <string>

#include "erpdeck/nn/graph.hpp"

namespace erpdeck::nn {

struct ComplexityReport {
  uint64_t param_count = 0;
  uint64_t macs_analytic = 0;      // conv/dense formula sum, per inference
  uint64_t macs_instrumented = 0;  // counted in the inner loops, batch of 1
  double infer_ms_mean = 0.0;      // single-trial eval forward, 10 runs
  double infer_ms_median = 0.0;
};

// Runs a single-trial forward with the MAC counter wired in and times 10
// single-trial inferences in eval mode.
ComplexityReport complexity(ModelGraph& g, int timing_runs = 10);

}  // namespace erpdeck::nn
