#pragma once

#include <vector>

#include "erpdeck/tensor.hpp"

namespace erpdeck::classical {

struct LinearScorer {
  std::vector<double> w;
  double b = 0.0;
  bool converged = true;  // BLDA sets false when evidence iteration hits the cap

  double score(const double* x) const {
    double s = b;
    for (size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
    return s;
  }
  std::vector<double> score_all(const Tensor& x) const;
};

// Regularized LDA with Ledoit-Wolf analytic shrinkage of the pooled
// within-class covariance. The boundary offset puts the decision midpoint
// between the projected class means. gamma_override in [0, 1] forces the
// shrinkage intensity (tests); pass a negative value for the analytic one.
LinearScorer fit_shrinkage_lda(const Tensor& x, const std::vector<int>& labels,
                               double gamma_override = -1.0, double* gamma_out = nullptr);

// Stepwise LDA: forward-add on the smallest partial-F p-value, backward
// removal of entries whose p rises above p_remove, ordinary least squares on
// the survivors. Unselected weights are exactly zero. Throws EmptyModel when
// nothing passes entry (callers may fall back to shrinkage LDA).
LinearScorer fit_swlda(const Tensor& x, const std::vector<int>& labels, double p_enter = 0.10,
                       double p_remove = 0.15, size_t max_terms = 60);

// Bayesian LDA: evidence maximization of (alpha, beta) for linear regression
// onto +-1 targets, with an implicit all-ones bias column. Convergence at
// relative hyperparameter change < 1e-6 or 500 iterations (then
// converged = false on the returned scorer).
struct BldaTrace {
  std::vector<double> alpha;
  std::vector<double> beta;
};
LinearScorer fit_blda(const Tensor& x, const std::vector<int>& labels,
                      BldaTrace* trace = nullptr);

// Elastic net regression onto +-1 targets by cyclic coordinate descent with
// an unpenalized intercept; sklearn's objective convention:
//   (1/2n)||y - b - Xw||^2 + alpha * (l1 * ||w||_1 + (1-l1)/2 * ||w||^2).
LinearScorer fit_elastic_net(const Tensor& x, const std::vector<int>& labels, double alpha = 1e-3,
                             double l1_ratio = 0.5, double tol = 1e-6, size_t max_iter = 10000);

// L2-regularized linear hinge loss by deterministic full-batch subgradient
// descent with a fixed epoch budget.
LinearScorer fit_linear_svm(const Tensor& x, const std::vector<int>& labels, double c = 1.0,
                            size_t epochs = 500);

}  // namespace erpdeck::classical
