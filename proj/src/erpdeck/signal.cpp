#include "erpdeck/signal.hpp"

#include <cmath>

namespace erpdeck::dsp {

void ContinuousRecording::validate() const {
  require(fs > 0.0, Errc::invalid_input, "sampling rate must be positive");
  require(data.rank() == 2, Errc::shape_error, "recording data must be (channels, samples)");
  require(data.dim(0) == channels.size(), Errc::shape_error,
          "channel count does not match data rows");
  for (const Event& e : events) {
    require(e.sample >= 0 && e.sample < static_cast<int64_t>(n_samples()), Errc::invalid_input,
            "event sample outside recording");
    require(e.command >= 1, Errc::invalid_input, "event command must be >= 1");
  }
}

EpochTensor segment(const ContinuousRecording& rec, double t0_ms, double t1_ms, bool has_baseline,
                    double baseline_lo_ms, double baseline_hi_ms) {
  rec.validate();
  require(t1_ms > t0_ms, Errc::invalid_input, "epoch window must have positive duration");

  const int64_t chans = static_cast<int64_t>(rec.n_channels());
  const int64_t total = static_cast<int64_t>(rec.n_samples());
  const int64_t offset = samples_for_ms(t0_ms, rec.fs);
  const int64_t len = samples_for_ms(t1_ms - t0_ms, rec.fs);
  const int64_t b_offset = samples_for_ms(baseline_lo_ms, rec.fs);
  const int64_t b_len = samples_for_ms(baseline_hi_ms - baseline_lo_ms, rec.fs);
  require(!has_baseline || b_len > 0, Errc::invalid_input, "empty baseline window");

  EpochTensor out;
  out.fs = rec.fs;
  out.t0_ms = t0_ms;
  out.data = Tensor({rec.events.size(), static_cast<size_t>(chans), static_cast<size_t>(len)});
  out.labels.reserve(rec.events.size());
  out.command_codes.reserve(rec.events.size());

  double* dst = out.data.data();
  for (const Event& ev : rec.events) {
    const int64_t start = ev.sample + offset;
    require(start >= 0 && start + len <= total, Errc::epoch_out_of_bounds,
            "epoch window overruns recording");
    int64_t b_start = 0;
    if (has_baseline) {
      b_start = ev.sample + b_offset;
      require(b_start >= 0 && b_start + b_len <= total, Errc::epoch_out_of_bounds,
              "baseline window overruns recording");
    }
    for (int64_t c = 0; c < chans; ++c) {
      const double* src = rec.data.data() + c * total;
      double base = 0.0;
      if (has_baseline) {
        for (int64_t k = 0; k < b_len; ++k) base += src[b_start + k];
        base /= static_cast<double>(b_len);
      }
      for (int64_t k = 0; k < len; ++k) *dst++ = src[start + k] - base;
    }
    out.labels.push_back(ev.is_target ? 1 : 0);
    out.command_codes.push_back(ev.command);
  }
  return out;
}

}  // namespace erpdeck::dsp
