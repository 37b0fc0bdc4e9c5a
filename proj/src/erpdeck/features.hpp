#pragma once

#include <vector>

#include "erpdeck/signal.hpp"
#include "erpdeck/tensor.hpp"

namespace erpdeck::dsp {

// Block-averaged downsampling with channel concatenation. Each output value
// is the mean of one non-overlapping block of `factor` samples; trailing
// samples that do not fill a block are dropped. Feature order is channel 0's
// blocks, then channel 1's, ...
Tensor moving_avg_decimate(const EpochTensor& e, int factor);

// Per-channel percentile clamps fitted on training epochs (values pooled over
// trials and samples). Percentiles use linear interpolation between order
// statistics: q-th percentile = x[(n-1)*q/100] interpolated.
struct WindsorLimits {
  std::vector<double> lo;  // per channel
  std::vector<double> hi;
};

WindsorLimits windsorize_fit(const EpochTensor& train, double lo_pct = 10.0, double hi_pct = 90.0);
EpochTensor windsorize_apply(const EpochTensor& e, const WindsorLimits& limits);

// Per-feature standardization. For epochs a feature is one (channel, sample)
// position; for 2-D matrices it is one column. Zero-variance features keep
// std 1 so application is a no-op shift.
struct ZscoreStats {
  std::vector<double> mean;
  std::vector<double> std;
};

ZscoreStats zscore_fit(const EpochTensor& train);
EpochTensor zscore_apply(const EpochTensor& e, const ZscoreStats& stats);

ZscoreStats zscore_fit_matrix(const Tensor& x);                      // (n, d)
Tensor zscore_apply_matrix(const Tensor& x, const ZscoreStats& s);

double percentile(std::vector<double> values, double pct);

}  // namespace erpdeck::dsp
