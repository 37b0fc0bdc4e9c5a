#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "erpdeck/error.hpp"
#include "erpdeck/tensor.hpp"

namespace erpdeck::dsp {

struct Event {
  int64_t sample = 0;   // index into the recording
  int command = 0;      // 1..9
  bool is_target = false;
};

// Multichannel EEG time series in microvolts, channel-major.
struct ContinuousRecording {
  double fs = 0.0;
  std::vector<std::string> channels;
  Tensor data;  // (channels, samples)
  std::vector<Event> events;

  size_t n_channels() const { return channels.size(); }
  size_t n_samples() const { return data.rank() == 2 ? data.dim(1) : 0; }

  void validate() const;
};

// Segmented epochs: (trials, channels, samples), plus per-trial metadata.
struct EpochTensor {
  Tensor data;  // (trials, channels, samples)
  std::vector<int> labels;         // 1 = target
  std::vector<int> command_codes;  // 1..9
  double fs = 0.0;
  double t0_ms = 0.0;  // epoch start relative to stimulus onset

  size_t n_trials() const { return data.rank() == 3 ? data.dim(0) : 0; }
  size_t n_channels() const { return data.rank() == 3 ? data.dim(1) : 0; }
  size_t n_samples() const { return data.rank() == 3 ? data.dim(2) : 0; }

  double* trial(size_t t) { return data.data() + t * n_channels() * n_samples(); }
  const double* trial(size_t t) const { return data.data() + t * n_channels() * n_samples(); }
};

// Epochs are segmented at sample resolution: count = round(duration_s * fs).
// At fs = 512 this gives 410 samples for 0-800 ms and 205 for 100-500 ms.
inline int64_t samples_for_ms(double duration_ms, double fs) {
  return static_cast<int64_t>(std::llround(duration_ms / 1000.0 * fs));
}

// Extracts one epoch per event. Baseline correction subtracts each channel's
// mean over [baseline_lo_ms, baseline_hi_ms) relative to the stimulus onset;
// pass has_baseline = false to skip it.
EpochTensor segment(const ContinuousRecording& rec, double t0_ms, double t1_ms,
                    bool has_baseline = true, double baseline_lo_ms = -200.0,
                    double baseline_hi_ms = 0.0);

}  // namespace erpdeck::dsp
