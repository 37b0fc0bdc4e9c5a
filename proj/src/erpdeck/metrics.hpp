#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "erpdeck/signal.hpp"

namespace erpdeck::metrics {

// Signed squared point-biserial correlation between two samples. Uses the
// population (divide-by-N) standard deviation of the pooled data, so that
// perfectly separated binary samples score exactly +-1. Zero pooled spread
// returns 0.
double signed_r2(const std::vector<double>& x1, const std::vector<double>& x2);

struct Counts {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Mean of sensitivity and specificity; both class denominators must be > 0.
double balanced_accuracy(const Counts& c);

// Mann-Whitney rank AUC with midrank ties. Equals the trapezoidal ROC
// integral; both classes must be present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// Wolpaw information transfer rate in bits/min for an N-way selection with
// accuracy p and selection time t_select_s. 0*log0 terms are taken as 0;
// p = 1/N gives exactly 0.
double itr_bits_per_min(int n_commands, double p, double t_select_s);

// One scored flash per command; index of the winning command (1-based), with
// the lowest command code winning ties.
struct ScoredTrial {
  double score = 0.0;
  int command = 0;
  bool is_target = false;
};

int decide_command(const std::vector<ScoredTrial>& block, int n_commands = 9);

// Fraction of blocks whose argmax command is the block's target.
double command_detection_rate(const std::vector<std::vector<ScoredTrial>>& blocks);

// Per-label channel x samples averages.
struct GrandAverage {
  Tensor target;      // (channels, samples)
  Tensor non_target;  // (channels, samples)
  size_t n_target = 0;
  size_t n_non_target = 0;
};

GrandAverage grand_average(const dsp::EpochTensor& e);

struct Peak {
  double amplitude_uv = 0.0;
  double latency_ms = 0.0;
  size_t sample = 0;
};

// Extremum of the requested polarity (+1 max, -1 min) within
// [t_lo_ms, t_hi_ms] relative to stimulus onset. Ties resolve to the
// earliest sample.
Peak peak_pick(const Tensor& wave, size_t channel, double t_lo_ms, double t_hi_ms, int polarity,
               double fs, double t0_ms);

// Full per-session report (Table-5 style columns).
struct MetricReport {
  double balanced_acc = 0.0;
  double auc = 0.0;
  double detection_rate = 0.0;
  double itr = 0.0;
  Counts counts;
};

// Threshold separating targetness scores into positives/negatives: 0.5 for
// probability-like scores, 0 for decision values.
MetricReport session_report(const std::vector<std::vector<ScoredTrial>>& blocks, double threshold,
                            double t_select_s, int n_commands);

}  // namespace erpdeck::metrics
