#pragma once

#include <vector>

#include "erpdeck/tensor.hpp"

namespace erpdeck::stats {

// Midranks of v: ranks 1..n with tied values sharing the average rank.
std::vector<double> midranks(const std::vector<double>& v);

struct FriedmanResult {
  double chi2 = 0.0;
  double p = 0.0;
  std::vector<double> mean_ranks;  // per method
};

// Friedman test on a (subjects x methods) matrix using midranks:
// chi2 = 12 n / (k (k+1)) * sum_j Rbar_j^2 - 3 n (k+1), p from the
// chi-square(k-1) upper tail. Requires >= 2 methods and >= 2 subjects.
// An all-tied matrix legitimately yields chi2 = 0, p = 1.
FriedmanResult friedman(const Tensor& matrix);

struct WilcoxonResult {
  double w_plus = 0.0;          // sum of positive midranks (zeros dropped)
  size_t n = 0;                 // pairs remaining after dropping zeros
  double p_two_sided = 1.0;
  double p_greater = 1.0;       // one-sided, H1: a > b
  bool exact = false;
};

// Paired Wilcoxon signed-rank test. Zero differences are dropped; for
// n <= 20 the null distribution of W+ is enumerated exactly over all 2^n
// sign assignments (via half-rank convolution), otherwise a normal
// approximation with continuity and tie corrections is used.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b);

struct SpearmanResult {
  double rho = 0.0;
  double p_two_sided = 1.0;
  double p_greater = 1.0;
};

// Spearman rank correlation with a t-distribution p-value (n >= 4).
SpearmanResult spearman(const std::vector<double>& x, const std::vector<double>& y);

double mean(const std::vector<double>& v);
double sample_std(const std::vector<double>& v);  // divide by n-1; 0 for n < 2

}  // namespace erpdeck::stats
