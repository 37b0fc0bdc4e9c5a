#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "erpdeck/filters.hpp"
#include "erpdeck/rng.hpp"

using namespace erpdeck;
using dsp::IirFilter;

namespace {
double to_db(double mag) { return 20.0 * std::log10(mag); }
}

TEST_CASE("acquisition band: order 4, 0.1-60 Hz at fs 512") {
  const IirFilter f = dsp::butter_bandpass(4, 0.1, 60.0, 512.0);
  CHECK(f.stable());
  const double center = std::sqrt(0.1 * 60.0);  // ~2.449 Hz
  CHECK(std::fabs(to_db(f.magnitude(center, 512.0))) < 1.0);
  CHECK(std::fabs(to_db(f.magnitude(0.1, 512.0)) + 3.0) < 0.5);
  CHECK(std::fabs(to_db(f.magnitude(60.0, 512.0)) + 3.0) < 0.5);
}

TEST_CASE("analysis band: order 2, 5-12 Hz at fs 512") {
  const IirFilter f = dsp::butter_bandpass(2, 5.0, 12.0, 512.0);
  CHECK(f.stable());
  CHECK(std::fabs(to_db(f.magnitude(std::sqrt(5.0 * 12.0), 512.0))) < 1.0);
  CHECK(std::fabs(to_db(f.magnitude(5.0, 512.0)) + 3.0) < 0.5);
  CHECK(std::fabs(to_db(f.magnitude(12.0, 512.0)) + 3.0) < 0.5);
}

TEST_CASE("offline band: order 2, 1-10 Hz at fs 512") {
  const IirFilter f = dsp::butter_bandpass(2, 1.0, 10.0, 512.0);
  CHECK(std::fabs(to_db(f.magnitude(1.0, 512.0)) + 3.0) < 0.5);
  CHECK(std::fabs(to_db(f.magnitude(10.0, 512.0)) + 3.0) < 0.5);
}

TEST_CASE("degenerate bands are rejected") {
  CHECK_THROWS_AS(dsp::butter_bandpass(4, 12.0, 5.0, 512.0), Error);
  CHECK_THROWS_AS(dsp::butter_bandpass(4, 5.0, 5.0, 512.0), Error);
  CHECK_THROWS_AS(dsp::butter_bandpass(4, 5.0, 300.0, 512.0), Error);
  CHECK_THROWS_AS(dsp::butter_bandpass(3, 5.0, 12.0, 512.0), Error);
}

TEST_CASE("50 Hz notch") {
  const IirFilter f = dsp::notch(50.0, 35.0, 512.0);
  CHECK(f.stable());
  CHECK(f.magnitude(50.0, 512.0) < 0.01);
  CHECK(to_db(f.magnitude(50.0, 512.0)) < -40.0);
  CHECK(f.magnitude(25.0, 512.0) > 0.9);
  CHECK(f.magnitude(0.0, 512.0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(dsp::notch(256.0, 35.0, 512.0), Error);
  CHECK_THROWS_AS(dsp::notch(300.0, 35.0, 512.0), Error);
}

TEST_CASE("filtfilt on zeros and short signals") {
  const IirFilter f = dsp::butter_bandpass(2, 5.0, 12.0, 512.0);
  std::vector<double> zero(256, 0.0);
  const auto y = dsp::filtfilt(f, zero);
  CHECK(y.size() == zero.size());
  for (double v : y) CHECK(v == doctest::Approx(0.0));
  std::vector<double> tiny(10, 1.0);
  CHECK_THROWS_AS(dsp::filtfilt(f, tiny), Error);
}

TEST_CASE("filtfilt keeps an in-band sinusoid with zero lag") {
  const IirFilter f = dsp::butter_bandpass(2, 5.0, 12.0, 512.0);
  const size_t n = 4096;
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * M_PI * 8.0 * i / 512.0);
  const auto y = dsp::filtfilt(f, x);

  // Compare amplitude and lag on the middle stretch via cross-correlation.
  double best = -1e300;
  int best_lag = 0;
  for (int lag = -8; lag <= 8; ++lag) {
    double c = 0.0;
    for (size_t i = 512; i + 512 < n; ++i) {
      c += y[i] * x[static_cast<size_t>(static_cast<int>(i) + lag)];
    }
    if (c > best) {
      best = c;
      best_lag = lag;
    }
  }
  CHECK(best_lag == 0);

  double amp = 0.0;
  for (size_t i = 512; i + 512 < n; ++i) amp = std::max(amp, std::fabs(y[i]));
  CHECK(amp == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("filtfilt attenuates an out-of-band sinusoid by > 90%") {
  const IirFilter f = dsp::butter_bandpass(2, 5.0, 12.0, 512.0);
  const size_t n = 4096;
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i) x[i] = std::sin(2.0 * M_PI * 50.0 * i / 512.0);
  const auto y = dsp::filtfilt(f, x);
  double amp = 0.0;
  for (size_t i = 512; i + 512 < n; ++i) amp = std::max(amp, std::fabs(y[i]));
  CHECK(amp < 0.1);
}

TEST_CASE("filtfilt commutes with time reversal") {
  Rng rng(3);
  const IirFilter f = dsp::butter_bandpass(2, 5.0, 12.0, 512.0);
  std::vector<double> x(1024);
  for (double& v : x) v = rng.normal();
  const auto fwd = dsp::filtfilt(f, x);
  std::vector<double> rev(x.rbegin(), x.rend());
  auto fr = dsp::filtfilt(f, rev);
  std::reverse(fr.begin(), fr.end());
  for (size_t i = 0; i < x.size(); ++i) CHECK(std::fabs(fwd[i] - fr[i]) < 1e-9);
}

TEST_CASE("stability check flags an unstable filter") {
  IirFilter f;
  f.b = {1.0};
  f.a = {1.0, -1.5};  // pole at 1.5
  CHECK_FALSE(f.stable());
}
