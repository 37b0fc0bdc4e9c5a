#pragma once

#include <vector>

#include "erpdeck/error.hpp"

namespace erpdeck::dsp {

// Direct-form IIR filter, a[0] == 1.
struct IirFilter {
  std::vector<double> b;
  std::vector<double> a;

  // All poles strictly inside the unit circle.
  bool stable() const;

  // Magnitude of H(e^{j 2 pi f / fs}).
  double magnitude(double f_hz, double fs) const;
};

// Butterworth bandpass via analog prototype + bilinear transform with
// frequency pre-warping. `order` is the prototype order (the paper's usage:
// order 4 for 0.1-60 Hz acquisition, order 2 for the analysis bands); the
// digital polynomial degree is 2*order.
IirFilter butter_bandpass(int order, double lo_hz, double hi_hz, double fs);

// Second-order notch with unity DC/Nyquist gain and a zero at f0.
IirFilter notch(double f0_hz, double q, double fs);

// Single-pass causal filtering (direct form II transposed), zero initial state.
std::vector<double> lfilter(const IirFilter& f, const std::vector<double>& x);

// Zero-phase forward-backward filtering with odd (reflect-and-negate) edge
// padding of length 3 * max(len(a), len(b)) and steady-state initial
// conditions. Output length equals input length.
std::vector<double> filtfilt(const IirFilter& f, const std::vector<double>& x);

}  // namespace erpdeck::dsp
