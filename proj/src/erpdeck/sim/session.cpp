#include "erpdeck/sim/session.hpp"

#include <chrono>
#include <cmath>

#include "erpdeck/filters.hpp"
#include "erpdeck/stats.hpp"

namespace erpdeck::sim {

namespace {
using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}
}  // namespace

SubjectProfile make_subject(uint64_t master_seed, int subject_index, double snr) {
  require(snr > 0.0, Errc::invalid_input, "snr must be positive");
  Rng rng(derive_seed(master_seed, "subject", {static_cast<uint64_t>(subject_index)}));

  SubjectProfile s;
  s.components = synth::default_erp_components();
  const double global_gain = snr * rng.uniform(0.85, 1.15);
  for (synth::ErpComponent& c : s.components) {
    c.amplitude_uv *= global_gain * rng.uniform(0.9, 1.1);
    c.latency_ms += rng.normal(0.0, 4.0);
    c.width_ms *= rng.uniform(0.9, 1.1);
  }
  s.noise.pink_uv = 4.0 * rng.uniform(0.9, 1.1);
  s.noise.mains_uv = 1.0 * rng.uniform(0.5, 1.5);
  s.noise.white_uv = 1.5 * rng.uniform(0.9, 1.1);
  s.attend_mean = rng.uniform(0.95, 1.05);
  s.attend_sd = 0.08;
  // Dry-electrode style drop from calibration to the online sessions,
  // strongest over parieto-occipital sites.
  s.shift_scales = {{"all", rng.uniform(0.82, 0.95)},
                    {"parieto_occipital", rng.uniform(0.85, 1.0)}};
  s.shift_latency_jitter_ms = rng.uniform(2.0, 6.0);
  return s;
}

dsp::EpochTensor preprocess_session(const dsp::ContinuousRecording& rec,
                                    const OnlineWindow& w) {
  const dsp::IirFilter band = dsp::butter_bandpass(w.band_order, w.band_lo_hz, w.band_hi_hz,
                                                   rec.fs);
  dsp::ContinuousRecording filtered = rec;
  const size_t total = rec.n_samples();
  std::vector<double> buf(total);
  for (size_t c = 0; c < rec.n_channels(); ++c) {
    const double* src = rec.data.data() + c * total;
    std::copy(src, src + total, buf.begin());
    const std::vector<double> out = dsp::filtfilt(band, buf);
    std::copy(out.begin(), out.end(), filtered.data.data() + c * total);
  }
  return dsp::segment(filtered, w.t0_ms, w.t1_ms, true, w.baseline_lo_ms, w.baseline_hi_ms);
}

dsp::EpochTensor preprocess_offline(const dsp::ContinuousRecording& rec) {
  OnlineWindow w;
  w.band_lo_hz = 1.0;
  w.band_hi_hz = 10.0;
  w.t0_ms = 0.0;
  w.t1_ms = 800.0;
  return preprocess_session(rec, w);
}

namespace {

std::vector<double> attend_gains(const SubjectProfile& subject, int n_selections, uint64_t seed) {
  Rng rng(derive_seed(seed, "attend"));
  std::vector<double> gains(static_cast<size_t>(n_selections));
  for (double& g : gains) g = std::max(0.0, rng.normal(subject.attend_mean, subject.attend_sd));
  return gains;
}

}  // namespace

SessionResult decode_online_session(Pipeline& pipeline, const SessionPlan& plan,
                                    uint64_t session_seed) {
  require(pipeline.fitted(), Errc::not_fitted, "pipeline must be calibrated first");

  synth::NoiseSpec noise = plan.subject.noise;
  noise.seed = session_seed;
  synth::SynthesizedSession session = synth::synth_session(
      plan.online, plan.subject.components, noise,
      attend_gains(plan.subject, plan.online.targets_per_session, session_seed));
  if (plan.apply_shift) {
    session = synth::session_shift(session, plan.subject.shift_scales,
                                   plan.subject.shift_latency_jitter_ms,
                                   derive_seed(session_seed, "shift"));
  }

  const dsp::EpochTensor epochs = preprocess_session(session.recording);
  const size_t per_block = static_cast<size_t>(plan.online.n_commands);
  require(epochs.n_trials() == per_block * session.schedule.targets.size(),
          Errc::incomplete_block, "online session trials do not tile into blocks");

  SessionResult result;
  result.seed = session_seed;
  result.selection_time_s = plan.online.selection_time_ms() / 1000.0;

  double infer_ms_total = 0.0;
  for (size_t b = 0; b < session.schedule.targets.size(); ++b) {
    // One decision per block, after its ninth flash.
    dsp::EpochTensor block;
    block.fs = epochs.fs;
    block.t0_ms = epochs.t0_ms;
    block.data = Tensor({per_block, epochs.n_channels(), epochs.n_samples()});
    const size_t stride = epochs.n_channels() * epochs.n_samples();
    std::copy(epochs.data.data() + b * per_block * stride,
              epochs.data.data() + (b + 1) * per_block * stride, block.data.data());
    block.labels.assign(epochs.labels.begin() + b * per_block,
                        epochs.labels.begin() + (b + 1) * per_block);
    block.command_codes.assign(epochs.command_codes.begin() + b * per_block,
                               epochs.command_codes.begin() + (b + 1) * per_block);

    const auto t0 = Clock::now();
    const std::vector<double> scores = pipeline.score(block);
    BlockResult br;
    br.true_command = session.schedule.targets[b];
    for (size_t i = 0; i < per_block; ++i) {
      br.trials.push_back({scores[i], block.command_codes[i], block.labels[i] != 0});
    }
    br.decoded_command = metrics::decide_command(br.trials, plan.online.n_commands);
    br.decode_latency_ms = ms_between(t0, Clock::now());
    infer_ms_total += br.decode_latency_ms;
    result.blocks.push_back(std::move(br));
  }

  std::vector<std::vector<metrics::ScoredTrial>> blocks;
  for (const BlockResult& br : result.blocks) blocks.push_back(br.trials);
  result.report = metrics::session_report(blocks, pipeline.threshold(), result.selection_time_s,
                                          plan.online.n_commands);
  result.session_duration_s = result.selection_time_s * static_cast<double>(result.blocks.size());
  result.infer_ms_per_trial =
      infer_ms_total / static_cast<double>(result.blocks.size() * per_block);
  return result;
}

SessionResult run_session(const SessionPlan& plan) {
  plan.calibration.validate();
  plan.online.validate();
  require(plan.online.repetitions == 1, Errc::invalid_protocol,
          "online decoding is single-trial: repetitions must be 1");
  require(is_pipeline(plan.pipeline_id), Errc::validation_error,
          "unknown pipeline: " + plan.pipeline_id);

  synth::NoiseSpec calib_noise = plan.subject.noise;
  calib_noise.seed = derive_seed(plan.seed, "calibration");
  const synth::SynthesizedSession calib = synth::synth_session(
      plan.calibration, plan.subject.components, calib_noise,
      attend_gains(plan.subject, plan.calibration.targets_per_session, calib_noise.seed));
  const dsp::EpochTensor train = preprocess_session(calib.recording);

  auto pipeline = make_pipeline(plan.pipeline_id, plan.params);
  const auto t0 = Clock::now();
  pipeline->fit(train, derive_seed(plan.seed, "fit"));
  const double train_time_s = ms_between(t0, Clock::now()) / 1000.0;

  SessionResult result =
      decode_online_session(*pipeline, plan, derive_seed(plan.seed, "online", {0}));
  result.train_time_s = train_time_s;
  result.seed = plan.seed;
  return result;
}

ShiftSweepResult shift_sweep(const SessionPlan& plan, const std::vector<double>& scales,
                             int seeds_per_scale) {
  require(!scales.empty(), Errc::invalid_input, "no scales given");
  require(seeds_per_scale >= 1, Errc::invalid_input, "seeds_per_scale must be >= 1");
  for (double s : scales) {
    require(s >= 0.0 && s <= 1.0, Errc::invalid_input, "scales must lie in [0, 1]");
  }

  ShiftSweepResult result;
  std::vector<double> xs, ys;
  for (double scale : scales) {
    ShiftSweepPoint point;
    point.scale = scale;
    for (int s = 0; s < seeds_per_scale; ++s) {
      SessionPlan p = plan;
      p.seed = derive_seed(plan.seed, "sweep",
                           {static_cast<uint64_t>(std::llround(scale * 1e6)),
                            static_cast<uint64_t>(s)});
      p.subject.shift_scales = {{"all", scale}};
      p.subject.shift_latency_jitter_ms = 0.0;
      const SessionResult r = run_session(p);
      point.detection_rates.push_back(r.report.detection_rate);
      xs.push_back(scale);
      ys.push_back(r.report.detection_rate);
    }
    point.mean_rate = stats::mean(point.detection_rates);
    result.points.push_back(std::move(point));
  }
  const stats::SpearmanResult sp = stats::spearman(xs, ys);
  result.spearman_rho = sp.rho;
  result.spearman_p_greater = sp.p_greater;
  return result;
}

}  // namespace erpdeck::sim
