#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "erpdeck/metrics.hpp"
#include "erpdeck/sim/pipeline.hpp"
#include "erpdeck/synth.hpp"

namespace erpdeck::sim {

// A generator profile standing in for one participant: component amplitudes,
// latencies and noise drawn around the grand-average values, plus the
// between-session degradation typical of dry electrodes.
struct SubjectProfile {
  std::vector<synth::ErpComponent> components;
  synth::NoiseSpec noise;           // seed is overwritten per session
  double attend_mean = 1.0;         // per-selection attention gain
  double attend_sd = 0.08;
  std::map<std::string, double> shift_scales = {{"all", 0.85}};
  double shift_latency_jitter_ms = 4.0;
};

// snr scales evoked amplitude against a fixed noise floor: ~1 is the
// "medium" operating point, >= 2.5 produces top-subject behaviour.
SubjectProfile make_subject(uint64_t master_seed, int subject_index, double snr);

// Shared analysis front end: 5-12 Hz order-2 zero-phase band, 100-500 ms
// epochs, -200..0 ms baseline.
struct OnlineWindow {
  double band_lo_hz = 5.0;
  double band_hi_hz = 12.0;
  int band_order = 2;
  double t0_ms = 100.0;
  double t1_ms = 500.0;
  double baseline_lo_ms = -200.0;
  double baseline_hi_ms = 0.0;
};

dsp::EpochTensor preprocess_session(const dsp::ContinuousRecording& rec,
                                    const OnlineWindow& window = {});

// The offline variant used for waveform analysis: 1-10 Hz, 0-800 ms epochs.
dsp::EpochTensor preprocess_offline(const dsp::ContinuousRecording& rec);

struct SessionPlan {
  synth::ProtocolConfig calibration = synth::ProtocolConfig::calibration();
  synth::ProtocolConfig online = synth::ProtocolConfig::online();
  SubjectProfile subject;
  std::string pipeline_id = "eegnet";
  PipelineParams params;
  uint64_t seed = 1;
  bool apply_shift = true;  // between-session degradation on the online data
};

struct BlockResult {
  int true_command = 0;
  int decoded_command = 0;
  std::vector<metrics::ScoredTrial> trials;  // scored flashes in block order
  double decode_latency_ms = 0.0;
};

struct SessionResult {
  std::vector<BlockResult> blocks;
  metrics::MetricReport report;
  double selection_time_s = 0.0;
  double session_duration_s = 0.0;  // blocks * selection time
  double train_time_s = 0.0;
  double infer_ms_per_trial = 0.0;
  uint64_t seed = 0;
};

// Calibrates the plan's pipeline on a synthetic calibration session and
// decodes one shifted online session block by block.
SessionResult run_session(const SessionPlan& plan);

// Decodes one online session with an already fitted pipeline (used by the
// comparison grid where the two copy-spelling phases share calibration).
SessionResult decode_online_session(Pipeline& pipeline, const SessionPlan& plan,
                                    uint64_t session_seed);

struct ShiftSweepPoint {
  double scale = 0.0;
  std::vector<double> detection_rates;  // one per seed
  double mean_rate = 0.0;
};

struct ShiftSweepResult {
  std::vector<ShiftSweepPoint> points;
  double spearman_rho = 0.0;
  double spearman_p_greater = 1.0;  // H1: detection rate rises with scale
};

// Detection-rate curve against the ERP amplitude scale, >= seeds_per_scale
// independent sessions per point.
ShiftSweepResult shift_sweep(const SessionPlan& plan, const std::vector<double>& scales,
                             int seeds_per_scale = 10);

}  // namespace erpdeck::sim
