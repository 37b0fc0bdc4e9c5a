#include "erpdeck/synth.hpp"

#include <algorithm>
#include <cmath>

#include "erpdeck/fft.hpp"
#include "erpdeck/filters.hpp"

namespace erpdeck::synth {

void ProtocolConfig::validate() const {
  require(n_commands >= 2, Errc::invalid_protocol, "need at least 2 commands");
  require(fs > 0.0, Errc::invalid_protocol, "fs must be positive");
  require(stim_ms > 0.0 && isi_ms >= 0.0, Errc::invalid_protocol, "bad stimulus timing");
  require(std::fabs(stim_ms + isi_ms - soa_ms) < 1e-9, Errc::invalid_protocol,
          "stim_ms + isi_ms must equal soa_ms");
  require(repetitions >= 1, Errc::invalid_protocol, "repetitions must be >= 1");
  require(targets_per_session >= 1, Errc::invalid_protocol, "targets_per_session must be >= 1");
  require(min_gap >= 1 && min_gap <= n_commands - 1, Errc::invalid_protocol,
          "min_gap must be in [1, n_commands-1]");
  require(feedback_ms <= processing_gap_ms, Errc::invalid_protocol,
          "feedback is presented inside the processing gap");
}

const std::vector<std::string>& default_montage() {
  static const std::vector<std::string> montage = {"PO7", "P3", "P7", "Fz",  "Cz",
                                                   "Pz",  "POz", "PO3", "O1", "Oz",
                                                   "O2",  "P4",  "P8",  "PO4", "PO8"};
  return montage;
}

const std::map<std::string, std::vector<std::string>>& montage_neighbors() {
  static const std::map<std::string, std::vector<std::string>> adj = {
      {"Fz", {"Cz"}},
      {"Cz", {"Fz", "Pz"}},
      {"Pz", {"Cz", "P3", "P4", "POz"}},
      {"P3", {"Pz", "P7", "PO3"}},
      {"P4", {"Pz", "P8", "PO4"}},
      {"P7", {"P3", "PO7"}},
      {"P8", {"P4", "PO8"}},
      {"POz", {"Pz", "PO3", "PO4", "Oz"}},
      {"PO3", {"POz", "P3", "PO7", "O1"}},
      {"PO4", {"POz", "P4", "PO8", "O2"}},
      {"PO7", {"P7", "PO3", "O1"}},
      {"PO8", {"P8", "PO4", "O2"}},
      {"O1", {"Oz", "PO3", "PO7"}},
      {"O2", {"Oz", "PO4", "PO8"}},
      {"Oz", {"O1", "O2", "POz"}},
  };
  return adj;
}

const std::map<std::string, std::vector<std::string>>& channel_groups() {
  static const std::map<std::string, std::vector<std::string>> groups = {
      {"all", default_montage()},
      {"frontal", {"Fz"}},
      {"central", {"Cz", "Pz"}},
      {"parietal", {"P3", "P4", "P7", "P8"}},
      {"parieto_occipital", {"POz", "PO3", "PO4", "PO7", "PO8"}},
      {"occipital", {"O1", "Oz", "O2"}},
  };
  return groups;
}

std::vector<ErpComponent> default_erp_components() {
  return {
      {"N100", "Pz", -1.18, 128.27, 14.0, {}},
      {"P100", "P8", 2.76, 157.51, 14.0, {}},
      {"VPP", "Fz", 3.96, 237.43, 18.0, {}},
      {"P300", "POz", 6.41, 256.93, 30.0, {}},
      {"N400", "Fz", -1.49, 551.27, 40.0, {}},
  };
}

ErpComponent component_by_name(const std::string& name) {
  for (ErpComponent& c : default_erp_components()) {
    if (c.name == name) return c;
  }
  fail(Errc::invalid_input, "unknown ERP component: " + name);
}

namespace {

std::vector<double> component_channel_weights(const ErpComponent& comp) {
  const auto& montage = default_montage();
  std::vector<double> w(montage.size(), 0.0);
  if (!comp.weights.empty()) {
    for (size_t c = 0; c < montage.size(); ++c) {
      auto it = comp.weights.find(montage[c]);
      w[c] = it == comp.weights.end() ? 0.0 : it->second;
      require(std::isfinite(w[c]), Errc::invalid_input, "non-finite channel weight");
    }
    return w;
  }
  const auto& adj = montage_neighbors();
  const auto nb_it = adj.find(comp.peak_channel);
  require(nb_it != adj.end(), Errc::invalid_input,
          "unknown peak channel: " + comp.peak_channel);
  for (size_t c = 0; c < montage.size(); ++c) {
    if (montage[c] == comp.peak_channel) {
      w[c] = 1.0;
    } else if (std::find(nb_it->second.begin(), nb_it->second.end(), montage[c]) !=
               nb_it->second.end()) {
      w[c] = 0.5;
    } else {
      w[c] = 0.1;
    }
  }
  return w;
}

bool gap_ok(const std::vector<int>& seq, size_t upto, int candidate, int min_gap) {
  const size_t start = upto >= static_cast<size_t>(min_gap - 1) ? upto - (min_gap - 1) : 0;
  for (size_t i = start; i < upto; ++i) {
    if (seq[i] == candidate) return false;
  }
  return true;
}

}  // namespace

std::vector<int> flash_sequence(int n_commands, int repetitions, int min_gap, uint64_t seed) {
  require(n_commands >= 2, Errc::invalid_input, "need at least 2 commands");
  require(repetitions >= 1, Errc::invalid_input, "repetitions must be >= 1");
  require(min_gap >= 1 && min_gap <= n_commands - 1, Errc::constraint_unsatisfiable,
          "min_gap must be in [1, n_commands-1]");

  Rng rng(derive_seed(seed, "flash"));
  std::vector<int> seq;
  // Per-block rejection sampling; a violating block is reshuffled, and the
  // retry budget bounds pathological (min_gap close to n-1) configurations.
  const int max_block_retries = 10000;
  for (int rep = 0; rep < repetitions; ++rep) {
    std::vector<int> block(n_commands);
    for (int i = 0; i < n_commands; ++i) block[i] = i + 1;
    bool placed = false;
    for (int attempt = 0; attempt < max_block_retries && !placed; ++attempt) {
      rng.shuffle(block);
      bool ok = true;
      std::vector<int> trial(seq);
      for (int c : block) {
        if (!gap_ok(trial, trial.size(), c, min_gap)) {
          ok = false;
          break;
        }
        trial.push_back(c);
      }
      if (ok) {
        seq = std::move(trial);
        placed = true;
      }
    }
    require(placed, Errc::constraint_unsatisfiable,
            "could not satisfy the flash distance constraint");
  }
  return seq;
}

SessionSchedule build_schedule(const ProtocolConfig& cfg, uint64_t seed) {
  cfg.validate();
  const double fs = cfg.fs;
  auto ms_to_samples = [&](double ms) {
    return static_cast<int64_t>(std::llround(ms / 1000.0 * fs));
  };

  // Attended commands: every command equally often (as far as the session
  // length allows), in random order.
  SessionSchedule sched;
  {
    Rng rng(derive_seed(seed, "targets"));
    std::vector<int> targets;
    for (int i = 0; i < cfg.targets_per_session; ++i) targets.push_back(i % cfg.n_commands + 1);
    rng.shuffle(targets);
    sched.targets = std::move(targets);
  }

  const int64_t lead = ms_to_samples(1000.0);  // settle time before the first cue
  int64_t t = lead;
  for (int sel = 0; sel < cfg.targets_per_session; ++sel) {
    const int target = sched.targets[sel];
    t += ms_to_samples(cfg.cue_ms);
    const std::vector<int> order = flash_sequence(cfg.n_commands, cfg.repetitions, cfg.min_gap,
                                                  derive_seed(seed, "order", {(uint64_t)sel}));
    for (size_t i = 0; i < order.size(); ++i) {
      Flash f;
      f.sample = t + ms_to_samples(static_cast<double>(i) * cfg.soa_ms);
      f.command = order[i];
      f.is_target = order[i] == target;
      f.target_index = sel;
      sched.flashes.push_back(f);
    }
    t += ms_to_samples(static_cast<double>(order.size()) * cfg.soa_ms);
    t += ms_to_samples(cfg.processing_gap_ms);
  }
  sched.total_samples = t + ms_to_samples(1000.0);
  return sched;
}

namespace {

// Template renderer. Component-major accumulation: each component is drawn
// into a scratch buffer that is added to the output once, which makes
// multi-component output the exact sample-wise sum of single-component runs.
Tensor render_templates(const SessionSchedule& sched, const ProtocolConfig& cfg,
                        const std::vector<ErpComponent>& components,
                        const std::vector<double>& attend_gains,
                        const std::vector<double>& channel_scale,
                        const std::vector<double>& latency_offset_ms) {
  const auto& montage = default_montage();
  const size_t chans = montage.size();
  const size_t total = static_cast<size_t>(sched.total_samples);
  Tensor out({chans, total}, 0.0);
  Tensor scratch({chans, total}, 0.0);

  for (const ErpComponent& comp : components) {
    require(comp.width_ms > 0.0, Errc::invalid_input, "component width must be positive");
    scratch.fill(0.0);
    const std::vector<double> w = component_channel_weights(comp);
    const double sigma_samples = comp.width_ms / 1000.0 * cfg.fs;
    const int64_t half_support = static_cast<int64_t>(std::ceil(5.0 * sigma_samples));

    for (size_t fi = 0; fi < sched.flashes.size(); ++fi) {
      const Flash& f = sched.flashes[fi];
      if (!f.is_target) continue;
      const double gain = attend_gains[f.target_index % attend_gains.size()];
      if (gain == 0.0) continue;
      const double lat_ms = comp.latency_ms + latency_offset_ms[fi];
      const double center = static_cast<double>(f.sample) + lat_ms / 1000.0 * cfg.fs;
      const int64_t k_lo = std::max<int64_t>(0, static_cast<int64_t>(center) - half_support);
      const int64_t k_hi =
          std::min<int64_t>(static_cast<int64_t>(total) - 1,
                            static_cast<int64_t>(center) + half_support);
      for (size_t c = 0; c < chans; ++c) {
        if (w[c] == 0.0) continue;
        const double amp = comp.amplitude_uv * w[c] * gain;
        double* row = scratch.data() + c * total;
        for (int64_t k = k_lo; k <= k_hi; ++k) {
          const double d = (static_cast<double>(k) - center) / sigma_samples;
          row[k] += amp * std::exp(-0.5 * d * d);
        }
      }
    }
    for (size_t c = 0; c < chans; ++c) {
      double* dst = out.data() + c * total;
      const double* src = scratch.data() + c * total;
      const double s = channel_scale[c];
      for (size_t k = 0; k < total; ++k) dst[k] += s * src[k];
    }
  }
  return out;
}

std::vector<double> pink_noise(size_t n, double fs, Rng& rng) {
  const size_t m = dsp::next_pow2(n);
  std::vector<std::complex<double>> spec(m);
  for (size_t i = 0; i < m; ++i) spec[i] = rng.normal();
  dsp::fft(spec, false);
  spec[0] = 0.0;  // no DC power
  for (size_t k = 1; k < m; ++k) {
    const size_t kf = std::min(k, m - k);
    const double f = static_cast<double>(kf) * fs / static_cast<double>(m);
    spec[k] /= std::sqrt(f);
  }
  dsp::fft(spec, true);
  std::vector<double> x(n);
  double power = 0.0;
  for (size_t i = 0; i < n; ++i) {
    x[i] = spec[i].real();
    power += x[i] * x[i];
  }
  const double rms = std::sqrt(power / static_cast<double>(n));
  if (rms > 0.0) {
    for (double& v : x) v /= rms;
  }
  return x;
}

Tensor render_noise(const SessionSchedule& sched, const ProtocolConfig& cfg,
                    const NoiseSpec& noise) {
  const size_t chans = default_montage().size();
  const size_t total = static_cast<size_t>(sched.total_samples);
  Tensor out({chans, total}, 0.0);
  for (size_t c = 0; c < chans; ++c) {
    double* row = out.data() + c * total;
    if (noise.pink_uv > 0.0) {
      Rng rng(derive_seed(noise.seed, "pink", {(uint64_t)c}));
      const std::vector<double> p = pink_noise(total, cfg.fs, rng);
      for (size_t k = 0; k < total; ++k) row[k] += noise.pink_uv * p[k];
    }
    if (noise.white_uv > 0.0) {
      Rng rng(derive_seed(noise.seed, "white", {(uint64_t)c}));
      for (size_t k = 0; k < total; ++k) row[k] += noise.white_uv * rng.normal();
    }
    if (noise.mains_uv > 0.0) {
      Rng rng(derive_seed(noise.seed, "mains", {(uint64_t)c}));
      const double phase = rng.uniform(0.0, 2.0 * M_PI);
      const double w = 2.0 * M_PI * 50.0 / cfg.fs;
      for (size_t k = 0; k < total; ++k) {
        row[k] += noise.mains_uv * std::sin(w * static_cast<double>(k) + phase);
      }
    }
  }
  return out;
}

// Amplifier chain model, applied causally channel by channel.
void apply_acquisition_filters(Tensor& part, double fs) {
  const dsp::IirFilter notch50 = dsp::notch(50.0, 35.0, fs);
  const dsp::IirFilter band = dsp::butter_bandpass(4, 0.1, 60.0, fs);
  const size_t chans = part.dim(0), total = part.dim(1);
  std::vector<double> buf(total);
  for (size_t c = 0; c < chans; ++c) {
    double* row = part.data() + c * total;
    std::copy(row, row + total, buf.begin());
    buf = dsp::lfilter(notch50, buf);
    buf = dsp::lfilter(band, buf);
    std::copy(buf.begin(), buf.end(), row);
  }
}

SynthesizedSession assemble(const ProtocolConfig& cfg, const std::vector<ErpComponent>& components,
                            const NoiseSpec& noise, std::vector<double> attend_gains,
                            SessionSchedule sched, const std::vector<double>& channel_scale,
                            const std::vector<double>& latency_offset_ms) {
  SynthesizedSession s;
  s.cfg = cfg;
  s.components = components;
  s.noise = noise;
  s.attend_gains = std::move(attend_gains);
  s.schedule = std::move(sched);

  s.template_part = render_templates(s.schedule, cfg, components, s.attend_gains, channel_scale,
                                     latency_offset_ms);
  s.noise_part = render_noise(s.schedule, cfg, noise);
  if (noise.acquisition_filters) {
    apply_acquisition_filters(s.template_part, cfg.fs);
    apply_acquisition_filters(s.noise_part, cfg.fs);
  }

  s.recording.fs = cfg.fs;
  s.recording.channels = default_montage();
  s.recording.data = s.template_part;
  {
    double* dst = s.recording.data.data();
    const double* src = s.noise_part.data();
    for (size_t i = 0; i < s.recording.data.size(); ++i) dst[i] += src[i];
  }
  for (const Flash& f : s.schedule.flashes) {
    s.recording.events.push_back({f.sample, f.command, f.is_target});
  }
  s.recording.validate();
  return s;
}

}  // namespace

SynthesizedSession synth_session(const ProtocolConfig& cfg,
                                 const std::vector<ErpComponent>& components,
                                 const NoiseSpec& noise, std::vector<double> attend_gains) {
  cfg.validate();
  require(!attend_gains.empty(), Errc::invalid_protocol, "attend_gains may not be empty");
  for (double g : attend_gains) {
    require(std::isfinite(g) && g >= 0.0, Errc::invalid_protocol, "attend gain must be >= 0");
  }
  SessionSchedule sched = build_schedule(cfg, noise.seed);
  const std::vector<double> ones(default_montage().size(), 1.0);
  const std::vector<double> zeros(sched.flashes.size(), 0.0);
  return assemble(cfg, components, noise, std::move(attend_gains), std::move(sched), ones, zeros);
}

SynthesizedSession session_shift(const SynthesizedSession& base,
                                 const std::map<std::string, double>& group_scales,
                                 double latency_jitter_ms, uint64_t shift_seed) {
  require(latency_jitter_ms >= 0.0, Errc::invalid_input, "latency jitter must be >= 0");
  const auto& montage = default_montage();
  const auto& groups = channel_groups();
  std::vector<double> channel_scale(montage.size(), 1.0);
  for (const auto& [group, scale] : group_scales) {
    require(scale >= 0.0, Errc::invalid_input, "amplitude scale must be >= 0");
    const auto it = groups.find(group);
    require(it != groups.end(), Errc::invalid_input, "unknown channel group: " + group);
    for (const std::string& ch : it->second) {
      const auto pos = std::find(montage.begin(), montage.end(), ch);
      channel_scale[static_cast<size_t>(pos - montage.begin())] *= scale;
    }
  }

  std::vector<double> latency_offset(base.schedule.flashes.size(), 0.0);
  if (latency_jitter_ms > 0.0) {
    Rng rng(derive_seed(shift_seed, "jitter"));
    for (size_t i = 0; i < latency_offset.size(); ++i) {
      if (base.schedule.flashes[i].is_target) {
        latency_offset[i] = rng.uniform(-latency_jitter_ms, latency_jitter_ms);
      }
    }
  }

  SynthesizedSession out;
  out.cfg = base.cfg;
  out.components = base.components;
  out.noise = base.noise;
  out.attend_gains = base.attend_gains;
  out.schedule = base.schedule;
  out.template_part = render_templates(out.schedule, out.cfg, out.components, out.attend_gains,
                                       channel_scale, latency_offset);
  if (out.noise.acquisition_filters) {
    apply_acquisition_filters(out.template_part, out.cfg.fs);
  }
  out.noise_part = base.noise_part;  // untouched, bit for bit
  out.recording.fs = out.cfg.fs;
  out.recording.channels = montage;
  out.recording.data = out.template_part;
  double* dst = out.recording.data.data();
  const double* src = out.noise_part.data();
  for (size_t i = 0; i < out.recording.data.size(); ++i) dst[i] += src[i];
  for (const Flash& f : out.schedule.flashes) {
    out.recording.events.push_back({f.sample, f.command, f.is_target});
  }
  return out;
}

}  // namespace erpdeck::synth
