#include "erpdeck/features.hpp"

#include <algorithm>
#include <cmath>

namespace erpdeck::dsp {

Tensor moving_avg_decimate(const EpochTensor& e, int factor) {
  require(factor >= 1, Errc::invalid_factor, "factor must be >= 1");
  const size_t trials = e.n_trials(), chans = e.n_channels(), samples = e.n_samples();
  require(static_cast<size_t>(factor) <= samples, Errc::invalid_factor,
          "factor exceeds samples per epoch");
  const size_t blocks = samples / static_cast<size_t>(factor);
  Tensor out({trials, chans * blocks}, 0.0);
  for (size_t t = 0; t < trials; ++t) {
    const double* src = e.trial(t);
    double* dst = out.data() + t * chans * blocks;
    for (size_t c = 0; c < chans; ++c) {
      const double* ch = src + c * samples;
      for (size_t bl = 0; bl < blocks; ++bl) {
        double s = 0.0;
        for (int k = 0; k < factor; ++k) s += ch[bl * factor + k];
        dst[c * blocks + bl] = s / factor;
      }
    }
  }
  return out;
}

double percentile(std::vector<double> values, double pct) {
  require(!values.empty(), Errc::invalid_input, "percentile of empty data");
  std::sort(values.begin(), values.end());
  const double pos = (static_cast<double>(values.size()) - 1.0) * pct / 100.0;
  const size_t lo = static_cast<size_t>(std::floor(pos));
  const size_t hi = static_cast<size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] * (1.0 - frac) + values[hi] * frac;
}

WindsorLimits windsorize_fit(const EpochTensor& train, double lo_pct, double hi_pct) {
  const size_t trials = train.n_trials(), chans = train.n_channels(), samples = train.n_samples();
  require(trials > 0 && chans > 0 && samples > 0, Errc::invalid_input, "empty epoch tensor");
  WindsorLimits lim;
  lim.lo.resize(chans);
  lim.hi.resize(chans);
  std::vector<double> pool(trials * samples);
  for (size_t c = 0; c < chans; ++c) {
    for (size_t t = 0; t < trials; ++t) {
      const double* ch = train.trial(t) + c * samples;
      std::copy(ch, ch + samples, pool.begin() + t * samples);
    }
    lim.lo[c] = percentile(pool, lo_pct);
    lim.hi[c] = percentile(pool, hi_pct);
  }
  return lim;
}

EpochTensor windsorize_apply(const EpochTensor& e, const WindsorLimits& limits) {
  const size_t chans = e.n_channels(), samples = e.n_samples();
  require(limits.lo.size() == chans && limits.hi.size() == chans, Errc::invalid_input,
          "windsorize limits do not match channel count");
  EpochTensor out = e;
  for (size_t t = 0; t < e.n_trials(); ++t) {
    double* trial = out.trial(t);
    for (size_t c = 0; c < chans; ++c) {
      double* ch = trial + c * samples;
      for (size_t k = 0; k < samples; ++k) ch[k] = std::clamp(ch[k], limits.lo[c], limits.hi[c]);
    }
  }
  return out;
}

namespace {

ZscoreStats fit_columns(const double* data, size_t rows, size_t cols) {
  ZscoreStats s;
  s.mean.assign(cols, 0.0);
  s.std.assign(cols, 0.0);
  for (size_t r = 0; r < rows; ++r) {
    const double* row = data + r * cols;
    for (size_t c = 0; c < cols; ++c) s.mean[c] += row[c];
  }
  for (double& m : s.mean) m /= static_cast<double>(rows);
  for (size_t r = 0; r < rows; ++r) {
    const double* row = data + r * cols;
    for (size_t c = 0; c < cols; ++c) {
      const double d = row[c] - s.mean[c];
      s.std[c] += d * d;
    }
  }
  for (double& v : s.std) {
    v = std::sqrt(v / static_cast<double>(rows));
    if (v == 0.0) v = 1.0;  // constant feature: leave it centered at zero
  }
  return s;
}

void apply_columns(double* data, size_t rows, size_t cols, const ZscoreStats& s) {
  require(s.mean.size() == cols && s.std.size() == cols, Errc::invalid_input,
          "z-score stats do not match feature count");
  for (size_t r = 0; r < rows; ++r) {
    double* row = data + r * cols;
    for (size_t c = 0; c < cols; ++c) row[c] = (row[c] - s.mean[c]) / s.std[c];
  }
}

}  // namespace

ZscoreStats zscore_fit(const EpochTensor& train) {
  require(train.n_trials() > 0, Errc::invalid_input, "empty epoch tensor");
  return fit_columns(train.data.data(), train.n_trials(), train.n_channels() * train.n_samples());
}

EpochTensor zscore_apply(const EpochTensor& e, const ZscoreStats& stats) {
  EpochTensor out = e;
  apply_columns(out.data.data(), e.n_trials(), e.n_channels() * e.n_samples(), stats);
  return out;
}

ZscoreStats zscore_fit_matrix(const Tensor& x) {
  require(x.rank() == 2 && x.dim(0) > 0, Errc::invalid_input, "empty feature matrix");
  return fit_columns(x.data(), x.dim(0), x.dim(1));
}

Tensor zscore_apply_matrix(const Tensor& x, const ZscoreStats& s) {
  Tensor out = x;
  apply_columns(out.data(), x.dim(0), x.dim(1), s);
  return out;
}

}  // namespace erpdeck::dsp
