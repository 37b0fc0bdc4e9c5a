#include "erpdeck/nn/complexity.hpp"

#include <algorithm>
#include <chrono>
#include <vector>

#include "erpdeck/rng.hpp"

namespace erpdeck::nn {

ComplexityReport complexity(ModelGraph& g, int timing_runs) {
  ComplexityReport r;
  r.param_count = g.param_count();
  r.macs_analytic = g.analytic_macs();

  const Shape& in = g.input_shape();
  Tensor x({1, in[0], in[1], in[2]});
  Rng rng(12345);
  for (size_t i = 0; i < x.size(); ++i) x[i] = rng.normal();

  MacCounter counter;
  (void)g.forward(x, false, &counter);
  r.macs_instrumented = counter.macs;

  std::vector<double> timings;
  (void)g.forward(x, false);  // warm-up
  for (int i = 0; i < timing_runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)g.forward(x, false);
    const auto t1 = std::chrono::steady_clock::now();
    timings.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(timings.begin(), timings.end());
  double sum = 0.0;
  for (double t : timings) sum += t;
  r.infer_ms_mean = sum / static_cast<double>(timings.size());
  const size_t mid = timings.size() / 2;
  r.infer_ms_median = timings.size() % 2 ? timings[mid] : 0.5 * (timings[mid - 1] + timings[mid]);
  return r;
}

}  // namespace erpdeck::nn
