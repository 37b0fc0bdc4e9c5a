#include "erpdeck/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace erpdeck::metrics {

double signed_r2(const std::vector<double>& x1, const std::vector<double>& x2) {
  require(!x1.empty() && !x2.empty(), Errc::invalid_input, "signed_r2 needs both classes");
  const double n1 = static_cast<double>(x1.size());
  const double n2 = static_cast<double>(x2.size());
  const double m1 = std::accumulate(x1.begin(), x1.end(), 0.0) / n1;
  const double m2 = std::accumulate(x2.begin(), x2.end(), 0.0) / n2;
  double sq = 0.0;
  const double total_mean = (m1 * n1 + m2 * n2) / (n1 + n2);
  for (double v : x1) sq += (v - total_mean) * (v - total_mean);
  for (double v : x2) sq += (v - total_mean) * (v - total_mean);
  const double sd = std::sqrt(sq / (n1 + n2));
  if (sd == 0.0) return 0.0;
  const double r = std::sqrt(n1 * n2) / (n1 + n2) * (m1 - m2) / sd;
  const double sign = (m1 > m2) ? 1.0 : (m1 < m2 ? -1.0 : 0.0);
  return sign * r * r;
}

double balanced_accuracy(const Counts& c) {
  require(c.tp + c.fn > 0, Errc::undefined_metric, "no positive-class trials");
  require(c.tn + c.fp > 0, Errc::undefined_metric, "no negative-class trials");
  const double sens = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double spec = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return 0.5 * (sens + spec);
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size(), Errc::shape_error, "scores/labels length mismatch");
  const size_t n = scores.size();
  size_t n_pos = 0;
  for (int l : labels) n_pos += (l != 0);
  const size_t n_neg = n - n_pos;
  require(n_pos > 0 && n_neg > 0, Errc::undefined_metric, "AUC needs both classes");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Midranks over tied groups, then the Mann-Whitney statistic.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]] != 0) rank_sum_pos += midrank;
    }
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(n_pos) * (n_pos + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double itr_bits_per_min(int n_commands, double p, double t_select_s) {
  require(n_commands >= 2, Errc::invalid_input, "ITR needs at least 2 commands");
  require(p >= 0.0 && p <= 1.0, Errc::invalid_input, "accuracy must be in [0, 1]");
  require(t_select_s > 0.0, Errc::invalid_input, "selection time must be positive");
  const double n = static_cast<double>(n_commands);
  double bits = std::log2(n);
  if (p > 0.0) bits += p * std::log2(p);
  if (p < 1.0) bits += (1.0 - p) * std::log2((1.0 - p) / (n - 1.0));
  return bits * 60.0 / t_select_s;
}

int decide_command(const std::vector<ScoredTrial>& block, int n_commands) {
  require(block.size() == static_cast<size_t>(n_commands), Errc::incomplete_block,
          "block must hold one trial per command");
  // One score per command, commands 1..n exactly once.
  std::vector<int> seen;
  for (const ScoredTrial& t : block) seen.push_back(t.command);
  std::sort(seen.begin(), seen.end());
  for (size_t i = 0; i < seen.size(); ++i) {
    require(seen[i] == static_cast<int>(i) + 1, Errc::incomplete_block,
            "block must contain each command exactly once");
  }
  int best_cmd = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (const ScoredTrial& t : block) {
    if (t.score > best_score || (t.score == best_score && t.command < best_cmd)) {
      best_score = t.score;
      best_cmd = t.command;
    }
  }
  return best_cmd;
}

double command_detection_rate(const std::vector<std::vector<ScoredTrial>>& blocks) {
  require(!blocks.empty(), Errc::incomplete_block, "no blocks");
  size_t correct = 0;
  for (const auto& block : blocks) {
    int truth = 0;
    for (const ScoredTrial& t : block) {
      if (t.is_target) {
        require(truth == 0, Errc::incomplete_block, "block has more than one target");
        truth = t.command;
      }
    }
    require(truth != 0, Errc::incomplete_block, "block has no target");
    if (decide_command(block, static_cast<int>(block.size())) == truth) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(blocks.size());
}

GrandAverage grand_average(const dsp::EpochTensor& e) {
  const size_t chans = e.n_channels(), samples = e.n_samples();
  require(e.n_trials() > 0, Errc::invalid_input, "empty epoch tensor");
  GrandAverage g;
  g.target = Tensor({chans, samples}, 0.0);
  g.non_target = Tensor({chans, samples}, 0.0);
  for (size_t t = 0; t < e.n_trials(); ++t) {
    Tensor& acc = e.labels[t] ? g.target : g.non_target;
    (e.labels[t] ? g.n_target : g.n_non_target)++;
    const double* src = e.trial(t);
    double* dst = acc.data();
    for (size_t k = 0; k < chans * samples; ++k) dst[k] += src[k];
  }
  if (g.n_target > 0)
    for (double& v : g.target.raw()) v /= static_cast<double>(g.n_target);
  if (g.n_non_target > 0)
    for (double& v : g.non_target.raw()) v /= static_cast<double>(g.n_non_target);
  return g;
}

Peak peak_pick(const Tensor& wave, size_t channel, double t_lo_ms, double t_hi_ms, int polarity,
               double fs, double t0_ms) {
  require(wave.rank() == 2 && channel < wave.dim(0), Errc::invalid_input, "bad waveform/channel");
  require(polarity == 1 || polarity == -1, Errc::invalid_input, "polarity must be +-1");
  const size_t samples = wave.dim(1);
  const double ms_per_sample = 1000.0 / fs;
  // Sample k sits at t0_ms + k * ms_per_sample.
  int64_t k_lo = static_cast<int64_t>(std::ceil((t_lo_ms - t0_ms) / ms_per_sample - 1e-9));
  int64_t k_hi = static_cast<int64_t>(std::floor((t_hi_ms - t0_ms) / ms_per_sample + 1e-9));
  k_lo = std::max<int64_t>(k_lo, 0);
  k_hi = std::min<int64_t>(k_hi, static_cast<int64_t>(samples) - 1);
  require(k_lo <= k_hi, Errc::invalid_input, "window selects no samples");

  const double* row = wave.data() + channel * samples;
  Peak p;
  p.sample = static_cast<size_t>(k_lo);
  p.amplitude_uv = row[k_lo];
  for (int64_t k = k_lo + 1; k <= k_hi; ++k) {
    const bool better = polarity > 0 ? row[k] > p.amplitude_uv : row[k] < p.amplitude_uv;
    if (better) {
      p.amplitude_uv = row[k];
      p.sample = static_cast<size_t>(k);
    }
  }
  p.latency_ms = t0_ms + static_cast<double>(p.sample) * ms_per_sample;
  return p;
}

MetricReport session_report(const std::vector<std::vector<ScoredTrial>>& blocks, double threshold,
                            double t_select_s, int n_commands) {
  MetricReport r;
  std::vector<double> scores;
  std::vector<int> labels;
  for (const auto& block : blocks) {
    for (const ScoredTrial& t : block) {
      scores.push_back(t.score);
      labels.push_back(t.is_target ? 1 : 0);
      const bool predicted_pos = t.score > threshold;
      if (t.is_target) {
        (predicted_pos ? r.counts.tp : r.counts.fn)++;
      } else {
        (predicted_pos ? r.counts.fp : r.counts.tn)++;
      }
    }
  }
  r.balanced_acc = balanced_accuracy(r.counts);
  r.auc = auc(scores, labels);
  r.detection_rate = command_detection_rate(blocks);
  r.itr = itr_bits_per_min(n_commands, r.detection_rate, t_select_s);
  return r;
}

}  // namespace erpdeck::metrics
