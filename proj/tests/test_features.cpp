#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "erpdeck/features.hpp"
#include "erpdeck/rng.hpp"
#include "erpdeck/signal_io.hpp"

using namespace erpdeck;
using dsp::ContinuousRecording;
using dsp::EpochTensor;

namespace {

ContinuousRecording make_recording(size_t chans, size_t samples, double fs) {
  ContinuousRecording rec;
  rec.fs = fs;
  for (size_t c = 0; c < chans; ++c) rec.channels.push_back("ch" + std::to_string(c));
  rec.data = Tensor({chans, samples}, 0.0);
  return rec;
}

EpochTensor make_epochs(size_t trials, size_t chans, size_t samples) {
  EpochTensor e;
  e.fs = 512.0;
  e.t0_ms = 0.0;
  e.data = Tensor({trials, chans, samples}, 0.0);
  e.labels.assign(trials, 0);
  e.command_codes.assign(trials, 1);
  return e;
}

}  // namespace

TEST_CASE("segment produces the documented epoch dimensions") {
  auto rec = make_recording(15, 512 * 40, 512.0);
  for (int i = 0; i < 20; ++i) {
    rec.events.push_back({512 + i * 512, i % 9 + 1, i % 9 == 0});
  }
  const auto offline = dsp::segment(rec, 0.0, 800.0);
  CHECK(offline.n_trials() == 20);
  CHECK(offline.n_channels() == 15);
  CHECK(offline.n_samples() == 410);

  const auto online = dsp::segment(rec, 100.0, 500.0);
  CHECK(online.n_samples() == 205);
  CHECK(online.t0_ms == doctest::Approx(100.0));
}

TEST_CASE("segment subtracts the pre-stimulus baseline") {
  auto rec = make_recording(2, 512 * 4, 512.0);
  // Channel 0 constant 5, channel 1 constant -2.
  for (size_t k = 0; k < rec.n_samples(); ++k) {
    rec.data.at(0, k) = 5.0;
    rec.data.at(1, k) = -2.0;
  }
  rec.events.push_back({512, 1, true});
  const auto e = dsp::segment(rec, 0.0, 800.0);
  for (size_t i = 0; i < e.data.size(); ++i) CHECK(e.data[i] == doctest::Approx(0.0));

  const auto raw = dsp::segment(rec, 0.0, 800.0, false);
  CHECK(raw.data[0] == doctest::Approx(5.0));
}

TEST_CASE("segment rejects windows that overrun the recording") {
  auto rec = make_recording(1, 600, 512.0);
  rec.events.push_back({500, 1, true});
  CHECK_THROWS_AS(dsp::segment(rec, 0.0, 800.0), Error);
  rec.events.back().sample = 50;
  CHECK_THROWS_AS(dsp::segment(rec, 0.0, 800.0), Error);  // baseline underruns
}

TEST_CASE("moving_avg_decimate feature layout and means") {
  auto e = make_epochs(3, 15, 205);
  Rng rng(2);
  for (size_t i = 0; i < e.data.size(); ++i) e.data[i] = rng.normal();
  const auto f = dsp::moving_avg_decimate(e, 12);
  CHECK(f.dim(0) == 3);
  CHECK(f.dim(1) == 15 * 17);  // floor(205/12) = 17 blocks per channel

  // Each feature is the mean of its block; channel-major concatenation.
  const size_t blocks = 17;
  for (size_t c = 0; c < 15; ++c) {
    for (size_t bl = 0; bl < blocks; ++bl) {
      double s = 0.0;
      for (int k = 0; k < 12; ++k) s += e.data[(c * 205) + bl * 12 + k];
      CHECK(f.at(0, c * blocks + bl) == doctest::Approx(s / 12.0));
    }
  }

  // Block means preserve the mean of the covered span.
  double block_mean = 0.0, direct_mean = 0.0;
  for (size_t bl = 0; bl < blocks; ++bl) block_mean += f.at(0, bl);
  block_mean /= static_cast<double>(blocks);
  for (size_t k = 0; k < blocks * 12; ++k) direct_mean += e.data[k];
  direct_mean /= static_cast<double>(blocks * 12);
  CHECK(block_mean == doctest::Approx(direct_mean).epsilon(1e-12));
}

TEST_CASE("moving_avg_decimate trivial cases and errors") {
  auto e = make_epochs(2, 3, 10);
  for (size_t i = 0; i < e.data.size(); ++i) e.data[i] = 4.25;
  const auto all = dsp::moving_avg_decimate(e, 1);
  CHECK(all.dim(1) == 30);
  for (size_t i = 0; i < all.size(); ++i) CHECK(all[i] == doctest::Approx(4.25));
  const auto c = dsp::moving_avg_decimate(e, 5);
  for (size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(4.25));
  CHECK_THROWS_AS(dsp::moving_avg_decimate(e, 11), Error);
  CHECK_THROWS_AS(dsp::moving_avg_decimate(e, 0), Error);
}

TEST_CASE("windsorize clamps to the fitted percentiles") {
  auto e = make_epochs(10, 1, 10);
  for (size_t i = 0; i < 100; ++i) e.data[i] = static_cast<double>(i);  // 0..99

  const auto lim = dsp::windsorize_fit(e, 10.0, 90.0);
  // Sort-based oracle with linear interpolation: position (n-1)*q.
  CHECK(lim.lo[0] == doctest::Approx(99.0 * 0.10));
  CHECK(lim.hi[0] == doctest::Approx(99.0 * 0.90));

  const auto w = dsp::windsorize_apply(e, lim);
  double lo = 1e300, hi = -1e300;
  for (size_t i = 0; i < 100; ++i) {
    lo = std::min(lo, w.data[i]);
    hi = std::max(hi, w.data[i]);
  }
  CHECK(lo == doctest::Approx(lim.lo[0]));
  CHECK(hi == doctest::Approx(lim.hi[0]));

  // A single extreme outlier lands exactly on the upper clamp.
  auto probe = make_epochs(1, 1, 10);
  probe.data[3] = 1e6;
  const auto pw = dsp::windsorize_apply(probe, lim);
  CHECK(pw.data[3] == doctest::Approx(lim.hi[0]));

  // Constant channels are untouched.
  auto flat = make_epochs(4, 1, 10);
  for (size_t i = 0; i < flat.data.size(); ++i) flat.data[i] = 7.0;
  const auto flat_lim = dsp::windsorize_fit(flat);
  const auto fw = dsp::windsorize_apply(flat, flat_lim);
  for (size_t i = 0; i < fw.data.size(); ++i) CHECK(fw.data[i] == doctest::Approx(7.0));
}

TEST_CASE("z-score normalizes per (channel, sample) feature") {
  Rng rng(10);
  auto train = make_epochs(50, 3, 7);
  for (size_t i = 0; i < train.data.size(); ++i) train.data[i] = 2.0 + 3.0 * rng.normal();

  const auto stats = dsp::zscore_fit(train);
  const auto z = dsp::zscore_apply(train, stats);
  const size_t d = 21;
  for (size_t f = 0; f < d; ++f) {
    double m = 0.0, v = 0.0;
    for (size_t t = 0; t < 50; ++t) m += z.data[t * d + f];
    m /= 50.0;
    for (size_t t = 0; t < 50; ++t) {
      const double c = z.data[t * d + f] - m;
      v += c * c;
    }
    CHECK(std::fabs(m) < 1e-9);
    CHECK(std::fabs(std::sqrt(v / 50.0) - 1.0) < 1e-9);
  }

  // Shifting test data by +sigma moves each normalized feature mean to 1.
  auto shifted = train;
  for (size_t f = 0; f < d; ++f) {
    for (size_t t = 0; t < 50; ++t) shifted.data[t * d + f] += stats.std[f];
  }
  const auto zs = dsp::zscore_apply(shifted, stats);
  for (size_t f = 0; f < d; ++f) {
    double m = 0.0;
    for (size_t t = 0; t < 50; ++t) m += zs.data[t * d + f];
    CHECK(m / 50.0 == doctest::Approx(1.0).epsilon(1e-9));
  }

  // Constant features produce zeros, not NaNs.
  auto flat = make_epochs(5, 1, 2);
  for (size_t i = 0; i < flat.data.size(); ++i) flat.data[i] = 3.3;
  const auto fz = dsp::zscore_apply(flat, dsp::zscore_fit(flat));
  for (size_t i = 0; i < fz.data.size(); ++i) CHECK(fz.data[i] == doctest::Approx(0.0));
}

TEST_CASE("recording and epoch files round-trip") {
  auto rec = make_recording(3, 1000, 512.0);
  Rng rng(8);
  for (size_t i = 0; i < rec.data.size(); ++i) {
    rec.data[i] = static_cast<double>(static_cast<float>(rng.normal()));
  }
  rec.events.push_back({100, 4, true});
  rec.events.push_back({300, 7, false});

  const std::string prefix = "/tmp/erpdeck_test_rec";
  dsp::save_recording(rec, prefix);
  const auto back = dsp::load_recording(prefix);
  CHECK(back.fs == rec.fs);
  CHECK(back.channels == rec.channels);
  REQUIRE(back.events.size() == 2);
  CHECK(back.events[0].sample == 100);
  CHECK(back.events[1].command == 7);
  for (size_t i = 0; i < rec.data.size(); ++i) CHECK(back.data[i] == rec.data[i]);

  auto e = make_epochs(4, 3, 16);
  e.labels = {1, 0, 0, 1};
  e.command_codes = {1, 2, 3, 4};
  for (size_t i = 0; i < e.data.size(); ++i) {
    e.data[i] = static_cast<double>(static_cast<float>(rng.normal()));
  }
  dsp::save_epochs(e, rec.channels, prefix + "_ep");
  std::vector<std::string> chans;
  const auto eb = dsp::load_epochs(prefix + "_ep", &chans);
  CHECK(chans == rec.channels);
  CHECK(eb.labels == e.labels);
  CHECK(eb.n_samples() == 16);
  for (size_t i = 0; i < e.data.size(); ++i) CHECK(eb.data[i] == e.data[i]);

  CHECK_THROWS_AS(dsp::load_recording("/tmp/erpdeck_missing_prefix"), Error);
  std::remove((prefix + ".meta.json").c_str());
  std::remove((prefix + ".f32").c_str());
  std::remove((prefix + "_ep.meta.json").c_str());
  std::remove((prefix + "_ep.f32").c_str());
}
