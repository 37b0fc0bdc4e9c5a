#include "erpdeck/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "erpdeck/error.hpp"
#include "erpdeck/special.hpp"

namespace erpdeck::stats {

std::vector<double> midranks(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double mid = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

FriedmanResult friedman(const Tensor& matrix) {
  require(matrix.rank() == 2, Errc::invalid_input, "friedman needs a (subjects x methods) matrix");
  const size_t n = matrix.dim(0);
  const size_t k = matrix.dim(1);
  require(n >= 2 && k >= 2, Errc::undefined_metric, "friedman needs >= 2 subjects and methods");

  std::vector<double> rank_sum(k, 0.0);
  std::vector<double> row(k);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < k; ++j) row[j] = matrix.at(i, j);
    const std::vector<double> r = midranks(row);
    for (size_t j = 0; j < k; ++j) rank_sum[j] += r[j];
  }

  FriedmanResult res;
  res.mean_ranks.resize(k);
  double sum_sq = 0.0;
  for (size_t j = 0; j < k; ++j) {
    res.mean_ranks[j] = rank_sum[j] / static_cast<double>(n);
    sum_sq += res.mean_ranks[j] * res.mean_ranks[j];
  }
  const double nd = static_cast<double>(n), kd = static_cast<double>(k);
  res.chi2 = 12.0 * nd / (kd * (kd + 1.0)) * sum_sq - 3.0 * nd * (kd + 1.0);
  if (res.chi2 < 0.0) res.chi2 = 0.0;  // all-tied rows round slightly below zero
  res.p = chi2_sf(res.chi2, kd - 1.0);
  return res;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), Errc::invalid_input, "paired samples must have equal length");
  std::vector<double> abs_d;
  std::vector<int> sign;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d == 0.0) continue;  // zero differences are dropped
    abs_d.push_back(std::fabs(d));
    sign.push_back(d > 0.0 ? 1 : -1);
  }
  const size_t n = abs_d.size();
  require(n >= 1, Errc::undefined_metric, "all differences are zero");

  const std::vector<double> ranks = midranks(abs_d);
  WilcoxonResult res;
  res.n = n;
  for (size_t i = 0; i < n; ++i) {
    if (sign[i] > 0) res.w_plus += ranks[i];
  }

  if (n <= 20) {
    // Exact null distribution of W+ over all 2^n sign assignments, built by
    // convolving one rank at a time. Doubling the midranks makes every
    // exponent an exact integer.
    res.exact = true;
    std::vector<long> r2(n);
    long total = 0;
    for (size_t i = 0; i < n; ++i) {
      r2[i] = std::lround(2.0 * ranks[i]);
      total += r2[i];
    }
    std::vector<double> dist(static_cast<size_t>(total) + 1, 0.0);
    dist[0] = 1.0;
    long upper = 0;
    for (size_t i = 0; i < n; ++i) {
      upper += r2[i];
      for (long w = upper; w >= r2[i]; --w) {
        dist[static_cast<size_t>(w)] += dist[static_cast<size_t>(w - r2[i])];
      }
    }
    const double denom = std::pow(2.0, static_cast<double>(n));
    const long w2 = std::lround(2.0 * res.w_plus);
    double p_le = 0.0, p_ge = 0.0;
    for (long w = 0; w <= total; ++w) {
      if (w <= w2) p_le += dist[static_cast<size_t>(w)];
      if (w >= w2) p_ge += dist[static_cast<size_t>(w)];
    }
    p_le /= denom;
    p_ge /= denom;
    res.p_greater = p_ge;
    res.p_two_sided = std::min(1.0, 2.0 * std::min(p_le, p_ge));
  } else {
    // Normal approximation with continuity correction and tie correction.
    const double nd = static_cast<double>(n);
    const double mu = nd * (nd + 1.0) / 4.0;
    double tie_term = 0.0;
    {
      std::vector<double> sorted = abs_d;
      std::sort(sorted.begin(), sorted.end());
      size_t i = 0;
      while (i < sorted.size()) {
        size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
      }
    }
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    const double sd = std::sqrt(var);
    res.p_greater = normal_sf((res.w_plus - mu - 0.5) / sd);
    const double z = (std::fabs(res.w_plus - mu) - 0.5) / sd;
    res.p_two_sided = std::min(1.0, 2.0 * normal_sf(z));
  }
  return res;
}

SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 4, Errc::invalid_input,
          "spearman needs >= 4 paired samples");
  const std::vector<double> rx = midranks(x);
  const std::vector<double> ry = midranks(y);
  const double mx = mean(rx), my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, Errc::undefined_metric, "constant ranks");
  SpearmanResult res;
  res.rho = sxy / std::sqrt(sxx * syy);
  const double nd = static_cast<double>(rx.size());
  const double denom = std::max(1.0 - res.rho * res.rho, 1e-15);
  const double t = res.rho * std::sqrt((nd - 2.0) / denom);
  res.p_greater = student_t_sf(t, nd - 2.0);
  res.p_two_sided = std::min(1.0, 2.0 * student_t_sf(std::fabs(t), nd - 2.0));
  return res;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (static_cast<double>(v.size()) - 1.0));
}

}  // namespace erpdeck::stats
