#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "erpdeck/metrics.hpp"
#include "erpdeck/rng.hpp"

using namespace erpdeck;
using metrics::ScoredTrial;

namespace {

// Pearson correlation oracle for signed_r2: correlate values with binary
// class labels using population standard deviations.
double pearson_with_labels(const std::vector<double>& x1, const std::vector<double>& x2) {
  std::vector<double> v, y;
  for (double a : x1) {
    v.push_back(a);
    y.push_back(1.0);
  }
  for (double a : x2) {
    v.push_back(a);
    y.push_back(0.0);
  }
  const double n = static_cast<double>(v.size());
  double mv = 0.0, my = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    mv += v[i];
    my += y[i];
  }
  mv /= n;
  my /= n;
  double svy = 0.0, svv = 0.0, syy = 0.0;
  for (size_t i = 0; i < v.size(); ++i) {
    svy += (v[i] - mv) * (y[i] - my);
    svv += (v[i] - mv) * (v[i] - mv);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (svv == 0.0 || syy == 0.0) return 0.0;
  return svy / std::sqrt(svv * syy);
}

// Trapezoidal ROC integration oracle for AUC.
double roc_trapezoid(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<double> thresholds = scores;
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  double n_pos = 0.0, n_neg = 0.0;
  for (int l : labels) (l ? n_pos : n_neg) += 1.0;
  std::vector<std::pair<double, double>> pts;  // (fpr, tpr)
  pts.emplace_back(0.0, 0.0);
  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
    double tp = 0.0, fp = 0.0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= *it) (labels[i] ? tp : fp) += 1.0;
    }
    pts.emplace_back(fp / n_neg, tp / n_pos);
  }
  double area = 0.0;
  for (size_t i = 1; i < pts.size(); ++i) {
    area += (pts[i].first - pts[i - 1].first) * (pts[i].second + pts[i - 1].second) / 2.0;
  }
  return area;
}

}  // namespace

TEST_CASE("signed_r2 separates, vanishes and flips sign") {
  CHECK(metrics::signed_r2({1.0, 1.0}, {0.0, 0.0}) == doctest::Approx(1.0));
  CHECK(metrics::signed_r2({2.0, 4.0}, {3.0, 3.0}) == doctest::Approx(0.0));
  const double fwd = metrics::signed_r2({1.0, 2.0, 1.5}, {0.2, 0.4, 0.1});
  const double rev = metrics::signed_r2({0.2, 0.4, 0.1}, {1.0, 2.0, 1.5});
  CHECK(fwd == doctest::Approx(-rev));
  CHECK(metrics::signed_r2({5.0, 5.0}, {5.0, 5.0}) == doctest::Approx(0.0));
}

TEST_CASE("signed_r2 magnitude equals squared Pearson correlation with labels") {
  Rng rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> x1(4 + rng.below(20)), x2(4 + rng.below(20));
    for (double& v : x1) v = rng.normal() + 0.5;
    for (double& v : x2) v = rng.normal();
    const double r = pearson_with_labels(x1, x2);
    CHECK(std::fabs(std::fabs(metrics::signed_r2(x1, x2)) - r * r) < 1e-12);
  }
}

TEST_CASE("balanced accuracy formula") {
  CHECK(metrics::balanced_accuracy({10, 0, 90, 0}) == doctest::Approx(1.0));
  CHECK(metrics::balanced_accuracy({0, 90, 0, 10}) == doctest::Approx(0.0));
  CHECK(metrics::balanced_accuracy({7, 2, 70, 2}) == doctest::Approx(0.8750).epsilon(1e-12));
  CHECK_THROWS_AS(metrics::balanced_accuracy({0, 5, 5, 0}), Error);
}

TEST_CASE("AUC: separation, ties, chance and trapezoid equality") {
  CHECK(metrics::auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  CHECK(metrics::auc({0.5, 0.5, 0.5, 0.5}, {1, 0, 1, 0}) == doctest::Approx(0.5));

  Rng rng(5);
  for (int trial = 0; trial < 15; ++trial) {
    const size_t n = 30 + rng.below(40);
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    bool has_pos = false, has_neg = false;
    for (size_t i = 0; i < n; ++i) {
      scores[i] = std::round(rng.uniform() * 10.0) / 10.0;  // force ties
      labels[i] = rng.uniform() < 0.3 ? 1 : 0;
      (labels[i] ? has_pos : has_neg) = true;
    }
    if (!has_pos || !has_neg) continue;
    CHECK(metrics::auc(scores, labels) ==
          doctest::Approx(roc_trapezoid(scores, labels)).epsilon(1e-12));
  }

  std::vector<double> scores(1000);
  std::vector<int> labels(1000);
  for (size_t i = 0; i < 1000; ++i) {
    scores[i] = rng.uniform();
    labels[i] = i % 2 == 0;
  }
  CHECK(std::fabs(metrics::auc(scores, labels) - 0.5) < 0.05);
  CHECK_THROWS_AS(metrics::auc({0.1, 0.2}, {1, 1}), Error);
}

TEST_CASE("AUC is invariant under strictly monotone transforms") {
  Rng rng(77);
  std::vector<double> scores(200);
  std::vector<int> labels(200);
  for (size_t i = 0; i < 200; ++i) {
    scores[i] = rng.normal();
    labels[i] = rng.uniform() < 0.4;
  }
  std::vector<double> warped(scores);
  for (double& s : warped) s = std::exp(2.0 * s) - 3.0;
  CHECK(metrics::auc(scores, labels) == doctest::Approx(metrics::auc(warped, labels)));
}

TEST_CASE("ITR formula values") {
  const double v = metrics::itr_bits_per_min(9, 0.9722, 2.49);
  CHECK(std::fabs(v - 70.65) < 1.5);  // reported value; formula gives ~69.96
  CHECK(v == doctest::Approx(69.96).epsilon(1e-3));
  CHECK(metrics::itr_bits_per_min(9, 1.0 / 9.0, 2.49) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(metrics::itr_bits_per_min(9, 1.0, 2.49) ==
        doctest::Approx(std::log2(9.0) * 60.0 / 2.49).epsilon(1e-12));
  // Nondecreasing in p on [1/N, 1].
  double prev = 0.0;
  for (int i = 0; i <= 50; ++i) {
    const double p = 1.0 / 9.0 + (1.0 - 1.0 / 9.0) * i / 50.0;
    const double cur = metrics::itr_bits_per_min(9, p, 2.49);
    CHECK(cur >= prev - 1e-12);
    prev = cur;
  }
}

namespace {
std::vector<ScoredTrial> make_block(const std::vector<double>& scores, int target) {
  std::vector<ScoredTrial> block;
  for (size_t i = 0; i < scores.size(); ++i) {
    block.push_back({scores[i], static_cast<int>(i) + 1, static_cast<int>(i) + 1 == target});
  }
  return block;
}
}  // namespace

TEST_CASE("decide_command takes the argmax with low-code tie-break") {
  auto block = make_block({0.1, 0.9, 0.2, 0.1, 0.0, 0.3, 0.2, 0.1, 0.05}, 2);
  CHECK(metrics::decide_command(block) == 2);

  // Strictly increasing transform leaves the decision unchanged.
  auto warped = block;
  for (auto& t : warped) t.score = std::tanh(3.0 * t.score) + 7.0;
  CHECK(metrics::decide_command(warped) == 2);

  auto tied = make_block({0.5, 0.5, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1}, 1);
  CHECK(metrics::decide_command(tied) == 1);

  auto incomplete = block;
  incomplete.pop_back();
  CHECK_THROWS_AS(metrics::decide_command(incomplete), Error);
}

TEST_CASE("decide_command is permutation-equivariant") {
  Rng rng(13);
  std::vector<double> scores(9);
  for (double& s : scores) s = rng.uniform();
  auto block = make_block(scores, 4);
  const int pick = metrics::decide_command(block);

  // Relabel commands by a permutation; the decision follows the relabeling.
  std::vector<int> perm = {3, 1, 4, 9, 2, 8, 5, 7, 6};
  auto renamed = block;
  for (auto& t : renamed) t.command = perm[static_cast<size_t>(t.command - 1)];
  CHECK(metrics::decide_command(renamed) == perm[static_cast<size_t>(pick - 1)]);
}

TEST_CASE("random scores decide at chance level") {
  Rng rng(101);
  size_t correct = 0;
  const size_t n_blocks = 20000;
  for (size_t b = 0; b < n_blocks; ++b) {
    std::vector<double> scores(9);
    for (double& s : scores) s = rng.uniform();
    const int target = static_cast<int>(rng.below(9)) + 1;
    if (metrics::decide_command(make_block(scores, target)) == target) ++correct;
  }
  const double rate = static_cast<double>(correct) / static_cast<double>(n_blocks);
  CHECK(std::fabs(rate - 1.0 / 9.0) < 3.0 * std::sqrt((1.0 / 9.0) * (8.0 / 9.0) / n_blocks));
}

TEST_CASE("peak_pick on a flat waveform returns the window start") {
  Tensor wave({2, 100}, 0.0);
  const auto p = metrics::peak_pick(wave, 0, 100.0, 200.0, 1, 512.0, 0.0);
  CHECK(p.amplitude_uv == doctest::Approx(0.0));
  // First sample at or after 100 ms.
  CHECK(p.latency_ms >= 100.0);
  CHECK(p.latency_ms < 100.0 + 1000.0 / 512.0);
}

TEST_CASE("grand_average splits by label") {
  dsp::EpochTensor e;
  e.fs = 512.0;
  e.t0_ms = 0.0;
  e.data = Tensor({4, 1, 3}, 0.0);
  e.labels = {1, 0, 1, 0};
  e.command_codes = {1, 2, 3, 4};
  for (size_t t = 0; t < 4; ++t)
    for (size_t k = 0; k < 3; ++k) e.data[t * 3 + k] = static_cast<double>(t);
  const auto g = metrics::grand_average(e);
  CHECK(g.n_target == 2);
  CHECK(g.target.at(0, 0) == doctest::Approx(1.0));      // mean of trials 0 and 2
  CHECK(g.non_target.at(0, 0) == doctest::Approx(2.0));  // mean of trials 1 and 3
}
