#pragma once

#include <string>
#include <vector>

#include "erpdeck/sim/session.hpp"

namespace erpdeck::sim {

struct ComparisonConfig {
  std::vector<std::string> pipelines;  // defaults to all ten
  int n_subjects = 6;
  int n_repeats = 30;
  int sessions_per_cell = 2;  // two copy-spelling phases share one calibration
  double snr = 1.0;
  synth::ProtocolConfig calibration = synth::ProtocolConfig::calibration();
  synth::ProtocolConfig online = synth::ProtocolConfig::online();
  PipelineParams params;
  bool apply_shift = true;
  uint64_t seed = 1;
  int jobs = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct ComparisonRow {
  std::string pipeline;
  int subject = 0;
  int session = 0;
  int repeat = 0;
  metrics::MetricReport report;
  double train_time_s = 0.0;
  double infer_ms = 0.0;
  uint64_t params = 0;
  uint64_t macs = 0;
  bool failed = false;
  std::string error;
};

struct PipelineAggregate {
  std::string pipeline;
  size_t n = 0;
  double auc_mean = 0.0, auc_std = 0.0;
  double cdr_mean = 0.0, cdr_std = 0.0;
  double itr_mean = 0.0, itr_std = 0.0;
  double ba_mean = 0.0, ba_std = 0.0;
};

struct PairTest {
  std::string a, b;
  double w_plus = 0.0;
  double p = 0.0;  // two-sided
};

struct MetricStats {
  std::string metric;
  double friedman_chi2 = 0.0;
  double friedman_p = 1.0;
  bool friedman_defined = false;
  std::vector<PairTest> wilcoxon;
};

struct ComparisonResult {
  std::vector<ComparisonRow> rows;  // deterministic order: pipeline-major
  std::vector<PipelineAggregate> aggregates;
  std::vector<MetricStats> stats;  // auc, cdr, itr
  size_t incomplete_cells = 0;
};

// Runs every (pipeline x subject x repeat) cell on its own derived seed:
// calibrate once, then decode sessions_per_cell online sessions. Cell
// failures are recorded in the rows, not fatal. Results are independent of
// scheduling.
ComparisonResult run_comparison(const ComparisonConfig& cfg);

// Report emission. CSV columns:
// subject,session,pipeline,repeat,ba,auc,cdr,itr,train_time_s,infer_ms,params,macs
std::string comparison_csv(const ComparisonResult& r);
// JSON summary: per-pipeline mean +- std for AUC/CDR/ITR plus the Friedman
// and Wilcoxon outputs; wall-clock fields live under "timing".
std::string comparison_summary_json(const ComparisonResult& r, bool include_timing = true);

// Statistical analysis of an already materialized metric table
// (rows from comparison_csv); used by the stats subcommand.
std::vector<MetricStats> analyze_rows(const std::vector<ComparisonRow>& rows);

}  // namespace erpdeck::sim
