#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <map>

#include "erpdeck/fft.hpp"
#include "erpdeck/metrics.hpp"
#include "erpdeck/rng.hpp"
#include "erpdeck/signal.hpp"
#include "erpdeck/synth.hpp"

using namespace erpdeck;
using synth::ErpComponent;
using synth::NoiseSpec;
using synth::ProtocolConfig;

namespace {

size_t channel_index(const std::string& name) {
  const auto& m = synth::default_montage();
  for (size_t i = 0; i < m.size(); ++i) {
    if (m[i] == name) return i;
  }
  FAIL("unknown channel");
  return 0;
}

NoiseSpec quiet(uint64_t seed) {
  NoiseSpec n;
  n.pink_uv = n.mains_uv = n.white_uv = 0.0;
  n.seed = seed;
  n.acquisition_filters = false;
  return n;
}

}  // namespace

TEST_CASE("protocol timing invariants") {
  ProtocolConfig online = ProtocolConfig::online();
  online.validate();
  CHECK(online.stim_ms + online.isi_ms == doctest::Approx(online.soa_ms));
  CHECK(online.selection_time_ms() == doctest::Approx(2490.0));

  ProtocolConfig bad = online;
  bad.isi_ms = 60.0;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("flash sequences: counts, permutation blocks, determinism") {
  const auto seq = synth::flash_sequence(9, 10, 3, 42);
  CHECK(seq.size() == 90);
  std::map<int, int> counts;
  for (int c : seq) counts[c]++;
  for (int c = 1; c <= 9; ++c) CHECK(counts[c] == 10);
  for (size_t block = 0; block < 10; ++block) {
    std::vector<int> b(seq.begin() + block * 9, seq.begin() + (block + 1) * 9);
    std::sort(b.begin(), b.end());
    for (int c = 1; c <= 9; ++c) CHECK(b[static_cast<size_t>(c - 1)] == c);
  }

  const auto single = synth::flash_sequence(9, 1, 3, 7);
  CHECK(single.size() == 9);

  CHECK(synth::flash_sequence(9, 10, 3, 42) == seq);
  CHECK(synth::flash_sequence(9, 10, 3, 43) != seq);
  CHECK_THROWS_AS(synth::flash_sequence(9, 10, 9, 1), Error);
}

TEST_CASE("flash distance constraint holds across trial boundaries for 1000 seeds") {
  for (uint64_t seed = 0; seed < 1000; ++seed) {
    const auto seq = synth::flash_sequence(9, 10, 3, seed);
    for (size_t i = 0; i < seq.size(); ++i) {
      for (size_t j = i + 1; j < std::min(seq.size(), i + 3); ++j) {
        CHECK(seq[i] != seq[j]);
      }
    }
  }
}

TEST_CASE("calibration schedule: 9 flashes x 10 repetitions x 18 commands") {
  const auto sched = synth::build_schedule(ProtocolConfig::calibration(), 5);
  CHECK(sched.flashes.size() == 1620);
  size_t targets = 0;
  for (const auto& f : sched.flashes) targets += f.is_target;
  CHECK(targets == 180);  // one target flash per sequence repetition

  const auto online = synth::build_schedule(ProtocolConfig::online(), 5);
  CHECK(online.flashes.size() == 162);

  // Each command is attended equally often.
  std::map<int, int> att;
  for (int t : online.targets) att[t]++;
  for (int c = 1; c <= 9; ++c) CHECK(att[c] == 2);
}

TEST_CASE("single-component round trip recovers the planted peak") {
  ProtocolConfig cfg = ProtocolConfig::online();
  const ErpComponent p300 = synth::component_by_name("P300");
  const auto session = synth::synth_session(cfg, {p300}, quiet(11));

  CHECK(session.recording.events.size() == 162);
  const auto epochs = dsp::segment(session.recording, 0.0, 800.0);
  const auto ga = metrics::grand_average(epochs);
  const auto peak =
      metrics::peak_pick(ga.target, channel_index("POz"), 200.0, 400.0, 1, cfg.fs, 0.0);
  CHECK(peak.amplitude_uv == doctest::Approx(6.41).epsilon(0.05));
  CHECK(std::fabs(peak.latency_ms - 256.93) < 1000.0 / cfg.fs);

  // Neighbour weight 0.5, far-channel weight 0.1.
  const auto pz = metrics::peak_pick(ga.target, channel_index("Pz"), 200.0, 400.0, 1, cfg.fs, 0.0);
  CHECK(pz.amplitude_uv == doctest::Approx(6.41 * 0.5).epsilon(0.05));
  const auto fz = metrics::peak_pick(ga.target, channel_index("Fz"), 200.0, 400.0, 1, cfg.fs, 0.0);
  CHECK(fz.amplitude_uv == doctest::Approx(6.41 * 0.1).epsilon(0.05));
}

TEST_CASE("zero attend gain removes the evoked response entirely") {
  ProtocolConfig cfg = ProtocolConfig::online();
  const auto session =
      synth::synth_session(cfg, {synth::component_by_name("P300")}, quiet(3), {0.0});
  for (double v : session.template_part.raw()) CHECK(v == 0.0);
  const auto epochs = dsp::segment(session.recording, 0.0, 800.0, false);
  const auto ga = metrics::grand_average(epochs);
  for (size_t i = 0; i < ga.target.size(); ++i) {
    CHECK(ga.target[i] == doctest::Approx(ga.non_target[i]).epsilon(1e-12));
  }
}

TEST_CASE("synthesis is linear in the component set (exact at the parts level)") {
  ProtocolConfig cfg = ProtocolConfig::online();
  cfg.targets_per_session = 9;
  const ErpComponent a = synth::component_by_name("P300");
  const ErpComponent b = synth::component_by_name("N400");
  NoiseSpec noise = quiet(21);
  noise.pink_uv = 2.0;  // shared noise realization, same seed everywhere

  const auto both = synth::synth_session(cfg, {a, b}, noise);
  const auto only_a = synth::synth_session(cfg, {a}, noise);
  const auto only_b = synth::synth_session(cfg, {b}, noise);

  for (size_t i = 0; i < both.template_part.size(); ++i) {
    CHECK(both.template_part[i] == only_a.template_part[i] + only_b.template_part[i]);
    CHECK(both.noise_part[i] == only_a.noise_part[i]);
    CHECK(both.noise_part[i] == only_b.noise_part[i]);
  }
}

TEST_CASE("same seed reproduces the identical recording") {
  ProtocolConfig cfg = ProtocolConfig::online();
  cfg.targets_per_session = 9;
  NoiseSpec noise;
  noise.seed = 99;
  const auto s1 = synth::synth_session(cfg, synth::default_erp_components(), noise);
  const auto s2 = synth::synth_session(cfg, synth::default_erp_components(), noise);
  CHECK(s1.recording.data.raw() == s2.recording.data.raw());
}

TEST_CASE("session_shift: identity, amplitude scaling, latency jitter") {
  ProtocolConfig cfg = ProtocolConfig::online();
  const auto base =
      synth::synth_session(cfg, {synth::component_by_name("P300")}, quiet(17));

  const auto same = synth::session_shift(base, {{"all", 1.0}}, 0.0);
  CHECK(same.recording.data.raw() == base.recording.data.raw());

  const auto halved = synth::session_shift(base, {{"parieto_occipital", 0.5}}, 0.0);
  const auto epochs = dsp::segment(halved.recording, 0.0, 800.0);
  const auto ga = metrics::grand_average(epochs);
  const auto peak =
      metrics::peak_pick(ga.target, channel_index("POz"), 200.0, 400.0, 1, cfg.fs, 0.0);
  CHECK(peak.amplitude_uv == doctest::Approx(0.5 * 6.41).epsilon(0.10));
  // Channels outside the scaled group keep their amplitude.
  const auto cz = metrics::peak_pick(ga.target, channel_index("Cz"), 200.0, 400.0, 1, cfg.fs, 0.0);
  CHECK(cz.amplitude_uv == doctest::Approx(0.1 * 6.41).epsilon(0.10));

  const auto jittered = synth::session_shift(base, {{"all", 1.0}}, 20.0, 5);
  const auto jep = dsp::segment(jittered.recording, 0.0, 800.0);
  const auto jga = metrics::grand_average(jep);
  const auto jpeak =
      metrics::peak_pick(jga.target, channel_index("POz"), 150.0, 450.0, 1, cfg.fs, 0.0);
  CHECK(std::fabs(jpeak.latency_ms - 256.93) <= 20.0 + 1000.0 / cfg.fs);
  // Averaging jittered bumps broadens and lowers the peak.
  CHECK(jpeak.amplitude_uv < 6.41);
  CHECK(jpeak.amplitude_uv > 0.5 * 6.41);

  CHECK_THROWS_AS(synth::session_shift(base, {{"nonexistent_group", 1.0}}, 0.0), Error);
}

TEST_CASE("pink noise spectral slope is -1 +- 0.3 in 1-40 Hz") {
  ProtocolConfig cfg = ProtocolConfig::online();
  NoiseSpec noise;
  noise.pink_uv = 3.0;
  noise.mains_uv = 0.0;
  noise.white_uv = 0.0;
  noise.seed = 31;
  noise.acquisition_filters = false;
  const auto s = synth::synth_session(cfg, {}, noise);

  const size_t total = s.recording.n_samples();
  const size_t m = dsp::next_pow2(total);
  std::vector<std::complex<double>> spec(m, 0.0);
  for (size_t i = 0; i < total; ++i) spec[i] = s.recording.data[i];  // first channel
  dsp::fft(spec, false);

  // Log-log PSD regression between 1 and 40 Hz.
  std::vector<double> lx, ly;
  for (size_t k = 1; k < m / 2; ++k) {
    const double f = static_cast<double>(k) * cfg.fs / static_cast<double>(m);
    if (f < 1.0 || f > 40.0) continue;
    lx.push_back(std::log10(f));
    ly.push_back(std::log10(std::norm(spec[k]) + 1e-30));
  }
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(lx.size());
  my /= static_cast<double>(lx.size());
  double sxy = 0.0, sxx = 0.0;
  for (size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = sxy / sxx;
  CHECK(slope == doctest::Approx(-1.0).epsilon(0.3));
}

TEST_CASE("noise RMS matches the requested amplitudes") {
  ProtocolConfig cfg = ProtocolConfig::online();
  cfg.targets_per_session = 4;
  NoiseSpec noise;
  noise.pink_uv = 5.0;
  noise.mains_uv = 0.0;
  noise.white_uv = 0.0;
  noise.seed = 8;
  noise.acquisition_filters = false;
  const auto s = synth::synth_session(cfg, {}, noise);
  double power = 0.0;
  const size_t total = s.recording.n_samples();
  for (size_t k = 0; k < total; ++k) power += s.recording.data[k] * s.recording.data[k];
  CHECK(std::sqrt(power / static_cast<double>(total)) == doctest::Approx(5.0).epsilon(1e-9));
}
