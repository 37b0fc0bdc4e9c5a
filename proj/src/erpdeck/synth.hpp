#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "erpdeck/rng.hpp"
#include "erpdeck/signal.hpp"

namespace erpdeck::synth {

// Stimulation timing. Defaults describe the online phase of the speller:
// 40 ms flash + 70 ms ISI at 110 ms SOA, 9 commands per selection, a 500 ms
// cue and a 1 s post-flash gap that hosts both processing and the 500 ms
// feedback, for a 2.49 s selection.
struct ProtocolConfig {
  int n_commands = 9;
  double stim_ms = 40.0;
  double isi_ms = 70.0;
  double soa_ms = 110.0;
  double cue_ms = 500.0;
  double feedback_ms = 500.0;
  double processing_gap_ms = 1000.0;
  int repetitions = 1;          // flash sequences per selection (10 in calibration)
  int targets_per_session = 18; // 27 is also a valid session length
  int min_gap = 3;              // min index distance between same-command flashes
  double fs = 512.0;

  void validate() const;
  double selection_time_ms() const { return cue_ms + n_commands * soa_ms + processing_gap_ms; }

  static ProtocolConfig calibration() {
    ProtocolConfig c;
    c.repetitions = 10;
    return c;
  }
  static ProtocolConfig online() { return ProtocolConfig{}; }
};

// One ERP component rendered as a Gaussian bump, spatially spread over the
// montage. An empty weight map falls back to the default spread: 1.0 on the
// peak channel, 0.5 on its montage neighbours, 0.1 elsewhere.
struct ErpComponent {
  std::string name;
  std::string peak_channel;
  double amplitude_uv = 0.0;  // signed
  double latency_ms = 0.0;
  double width_ms = 0.0;      // Gaussian sigma
  std::map<std::string, double> weights;

  int polarity() const { return amplitude_uv >= 0.0 ? 1 : -1; }
};

// The five components observed on this montage (grand-average values).
std::vector<ErpComponent> default_erp_components();
ErpComponent component_by_name(const std::string& name);

struct NoiseSpec {
  double pink_uv = 4.0;   // RMS of the 1/f background
  double mains_uv = 1.0;  // 50 Hz sinusoid amplitude
  double white_uv = 1.0;  // RMS of the sensor noise
  uint64_t seed = 0;
  // Model of the amplifier chain: 50 Hz notch + 0.1-60 Hz order-4 bandpass,
  // applied causally. Disable for analytically exact template round-trips.
  bool acquisition_filters = true;
};

const std::vector<std::string>& default_montage();  // 15 channels
const std::map<std::string, std::vector<std::string>>& montage_neighbors();
// Named electrode groups used by session_shift scale maps; "all" matches
// every channel.
const std::map<std::string, std::vector<std::string>>& channel_groups();

// Random flash order: `repetitions` permutations of 1..n_commands back to
// back, with any two occurrences of the same command at least min_gap
// positions apart (also across permutation boundaries).
std::vector<int> flash_sequence(int n_commands, int repetitions, int min_gap, uint64_t seed);

struct Flash {
  int64_t sample = 0;
  int command = 0;
  bool is_target = false;
  int target_index = 0;  // which selection this flash belongs to
};

struct SessionSchedule {
  std::vector<Flash> flashes;
  std::vector<int> targets;  // attended command per selection
  int64_t total_samples = 0;
};

SessionSchedule build_schedule(const ProtocolConfig& cfg, uint64_t seed);

// A generated session keeps its additive parts so shifted variants can be
// re-rendered against the identical noise realization.
struct SynthesizedSession {
  ProtocolConfig cfg;
  std::vector<ErpComponent> components;
  NoiseSpec noise;
  std::vector<double> attend_gains;  // per selection (size 1 broadcasts)
  SessionSchedule schedule;
  Tensor template_part;  // (channels, samples), after acquisition filtering
  Tensor noise_part;
  dsp::ContinuousRecording recording;
};

// attend_gains scales every component on target flashes of each selection;
// non-target flashes never receive templates.
SynthesizedSession synth_session(const ProtocolConfig& cfg,
                                 const std::vector<ErpComponent>& components,
                                 const NoiseSpec& noise,
                                 std::vector<double> attend_gains = {1.0});

// Re-renders the template part with per-channel-group amplitude scales and a
// per-target-flash latency jitter drawn uniformly from [-jitter, +jitter].
// The noise part is reused bit for bit.
SynthesizedSession session_shift(const SynthesizedSession& base,
                                 const std::map<std::string, double>& group_scales,
                                 double latency_jitter_ms, uint64_t shift_seed = 1);

}  // namespace erpdeck::synth
