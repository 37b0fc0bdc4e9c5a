#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "erpdeck/classical/linear.hpp"
#include "erpdeck/linalg.hpp"
#include "erpdeck/metrics.hpp"
#include "erpdeck/rng.hpp"

using namespace erpdeck;
using namespace erpdeck::classical;

namespace {

// Two Gaussian blobs, class 1 shifted by `sep` along every axis.
void blobs(size_t n, size_t d, double sep, uint64_t seed, Tensor* x, std::vector<int>* y) {
  Rng rng(seed);
  *x = Tensor({n, d});
  y->resize(n);
  for (size_t i = 0; i < n; ++i) {
    (*y)[i] = rng.uniform() < 0.5;
    for (size_t j = 0; j < d; ++j) x->at(i, j) = rng.normal() + ((*y)[i] ? sep : 0.0);
  }
}

}  // namespace

TEST_CASE("shrinkage LDA separates Gaussian blobs") {
  Tensor x;
  std::vector<int> y;
  blobs(400, 4, 2.5, 3, &x, &y);
  const LinearScorer s = fit_shrinkage_lda(x, y);
  CHECK(metrics::auc(s.score_all(x), y) > 0.99);
}

TEST_CASE("shrinkage LDA with gamma forced to 1 points along the mean difference") {
  Tensor x;
  std::vector<int> y;
  blobs(600, 5, 1.0, 7, &x, &y);
  const LinearScorer s = fit_shrinkage_lda(x, y, 1.0);
  // With the identity-scaled covariance, w is proportional to mu1 - mu0.
  std::vector<double> mu0(5, 0.0), mu1(5, 0.0);
  size_t n0 = 0, n1 = 0;
  for (size_t i = 0; i < 600; ++i) {
    for (size_t j = 0; j < 5; ++j) (y[i] ? mu1 : mu0)[j] += x.at(i, j);
    (y[i] ? n1 : n0)++;
  }
  double cos_num = 0.0, wn = 0.0, dn = 0.0;
  for (size_t j = 0; j < 5; ++j) {
    const double diff = mu1[j] / n1 - mu0[j] / n0;
    cos_num += s.w[j] * diff;
    wn += s.w[j] * s.w[j];
    dn += diff * diff;
  }
  CHECK(cos_num / std::sqrt(wn * dn) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("shrinkage LDA with gamma 0 equals an independent plain-LDA solve") {
  Tensor x;
  std::vector<int> y;
  blobs(2000, 4, 1.5, 11, &x, &y);
  const size_t n = 2000, d = 4;
  const LinearScorer plain = fit_shrinkage_lda(x, y, 0.0);

  // Oracle: pooled within-class covariance and the direct solve.
  std::vector<double> mu0(d, 0.0), mu1(d, 0.0);
  size_t n0 = 0, n1 = 0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) (y[i] ? mu1 : mu0)[j] += x.at(i, j);
    (y[i] ? n1 : n0)++;
  }
  for (size_t j = 0; j < d; ++j) {
    mu0[j] /= n0;
    mu1[j] /= n1;
  }
  linalg::SymmetricMatrix s(d);
  for (size_t a = 0; a < d; ++a) {
    for (size_t b = a; b < d; ++b) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const std::vector<double>& mu = y[i] ? mu1 : mu0;
        acc += (x.at(i, a) - mu[a]) * (x.at(i, b) - mu[b]);
      }
      s.set(a, b, acc / n);
    }
  }
  std::vector<double> diff(d);
  for (size_t j = 0; j < d; ++j) diff[j] = mu1[j] - mu0[j];
  const std::vector<double> w_oracle = linalg::spd_solve(s, diff);
  for (size_t j = 0; j < d; ++j) CHECK(plain.w[j] == doctest::Approx(w_oracle[j]).epsilon(1e-8));

  // Anisotropic data keeps the analytic shrinkage mild.
  Rng rng(31);
  Tensor xa({800, 5});
  std::vector<int> ya(800);
  for (size_t i = 0; i < 800; ++i) {
    ya[i] = rng.uniform() < 0.5;
    for (size_t j = 0; j < 5; ++j) {
      xa.at(i, j) = rng.normal() * (1.0 + 2.0 * static_cast<double>(j)) + (ya[i] ? 1.0 : 0.0);
    }
  }
  double gamma = -1.0;
  (void)fit_shrinkage_lda(xa, ya, -1.0, &gamma);
  CHECK(gamma > 0.0);
  CHECK(gamma < 0.5);
}

TEST_CASE("shrinkage LDA stays finite when n < d") {
  Tensor x;
  std::vector<int> y;
  blobs(30, 60, 1.0, 5, &x, &y);
  const LinearScorer s = fit_shrinkage_lda(x, y);
  for (double v : s.w) CHECK(std::isfinite(v));
  CHECK(std::isfinite(s.b));
}

TEST_CASE("shrinkage LDA rejects single-class data") {
  Tensor x({10, 3}, 1.0);
  std::vector<int> y(10, 1);
  CHECK_THROWS_AS(fit_shrinkage_lda(x, y), Error);
}

TEST_CASE("SWLDA recovers the informative features") {
  // Signal lives in exactly features 2, 5, 11 of 20; effects are sized so
  // each stays partially significant after the others enter.
  size_t hits = 0;
  const int runs = 100;
  for (int run = 0; run < runs; ++run) {
    Rng rng(1000 + run);
    const size_t n = 400, d = 20;
    Tensor x({n, d});
    std::vector<int> y(n);
    for (size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform() < 0.5;
      for (size_t j = 0; j < d; ++j) x.at(i, j) = rng.normal();
      if (y[i]) {
        x.at(i, 2) += 1.2;
        x.at(i, 5) += 1.0;
        x.at(i, 11) += 1.4;
      }
    }
    const LinearScorer s = fit_swlda(x, y);
    const bool got = s.w[2] != 0.0 && s.w[5] != 0.0 && s.w[11] != 0.0;
    hits += got;
  }
  CHECK(hits >= 95);
}

TEST_CASE("SWLDA zeroes unselected weights and tolerates duplicates") {
  Rng rng(77);
  const size_t n = 200, d = 8;
  Tensor x({n, d});
  std::vector<int> y(n);
  for (size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < 0.5;
    for (size_t j = 0; j + 1 < d; ++j) x.at(i, j) = rng.normal();
    if (y[i]) x.at(i, 0) += 2.0;
    x.at(i, d - 1) = x.at(i, 0);  // exact duplicate of the informative column
  }
  const LinearScorer s = fit_swlda(x, y);
  size_t n_active = 0;
  for (double v : s.w) n_active += (v != 0.0);
  CHECK(n_active <= 3);
  // At most one of the duplicated pair carries weight.
  CHECK((s.w[0] == 0.0 || s.w[d - 1] == 0.0));
}

TEST_CASE("SWLDA signals EmptyModel on pure noise most of the time") {
  size_t empty = 0;
  const int runs = 40;
  for (int run = 0; run < runs; ++run) {
    Rng rng(500 + run);
    const size_t n = 60, d = 3;
    Tensor x({n, d});
    std::vector<int> y(n);
    for (size_t i = 0; i < n; ++i) {
      y[i] = rng.uniform() < 0.5;
      for (size_t j = 0; j < d; ++j) x.at(i, j) = rng.normal();
    }
    try {
      (void)fit_swlda(x, y);
    } catch (const Error& e) {
      CHECK(e.code() == Errc::empty_model);
      ++empty;
    }
  }
  CHECK(empty > runs / 2);
}

TEST_CASE("BLDA separates blobs and traces a growing beta on clean targets") {
  Tensor x;
  std::vector<int> y;
  blobs(300, 6, 2.0, 13, &x, &y);
  const LinearScorer s = fit_blda(x, y);
  CHECK(metrics::auc(s.score_all(x), y) > 0.99);

  // Noiseless linear labels: beta (precision) must rise monotonically.
  Rng rng(4);
  const size_t n = 120, d = 3;
  Tensor xl({n, d});
  std::vector<int> yl(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) xl.at(i, j) = rng.normal();
    yl[i] = xl.at(i, 0) + 0.5 * xl.at(i, 1) > 0.0;
  }
  // Make the targets themselves a noiseless linear function.
  BldaTrace trace;
  Tensor xlin({n, 1});
  std::vector<int> ylin(n);
  for (size_t i = 0; i < n; ++i) {
    xlin.at(i, 0) = static_cast<double>(i) / n - 0.5;
    ylin[i] = xlin.at(i, 0) > 0.0;
  }
  (void)fit_blda(xlin, ylin, &trace);
  for (size_t k = 1; k < trace.beta.size(); ++k) CHECK(trace.beta[k] >= trace.beta[k - 1] * 0.999);
}

TEST_CASE("BLDA prior dominance: huge alpha shrinks w toward zero") {
  // Reproduce the evidence solve with alpha frozen huge: w = beta (beta X'X + alpha I)^-1 X'y.
  Rng rng(8);
  const size_t n = 50, d = 4;
  Tensor x({n, d});
  std::vector<int> y(n);
  for (size_t i = 0; i < n; ++i) {
    y[i] = rng.uniform() < 0.5;
    for (size_t j = 0; j < d; ++j) x.at(i, j) = rng.normal() + (y[i] ? 1.0 : 0.0);
  }
  linalg::SymmetricMatrix gram(d);
  std::vector<double> xty(d, 0.0);
  for (size_t a = 0; a < d; ++a) {
    for (size_t b = a; b < d; ++b) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) acc += x.at(i, a) * x.at(i, b);
      gram.set(a, b, acc);
    }
    for (size_t i = 0; i < n; ++i) xty[a] += x.at(i, a) * (y[i] ? 1.0 : -1.0);
  }
  const double alpha = 1e12, beta = 1.0;
  linalg::SymmetricMatrix ridge(d);
  for (size_t a = 0; a < d; ++a) {
    for (size_t b = a; b < d; ++b) ridge.set(a, b, beta * gram.at(a, b) + (a == b ? alpha : 0.0));
  }
  std::vector<double> rhs(d);
  for (size_t j = 0; j < d; ++j) rhs[j] = beta * xty[j];
  const std::vector<double> w = linalg::spd_solve(ridge, rhs);
  for (double v : w) CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("elastic net limits") {
  Tensor x;
  std::vector<int> y;
  blobs(200, 5, 2.0, 17, &x, &y);

  // alpha = 0 reduces to ordinary least squares.
  const LinearScorer en0 = fit_elastic_net(x, y, 0.0, 0.5, 1e-10, 50000);
  // OLS oracle with intercept via the normal equations.
  const size_t n = 200, d = 5;
  linalg::SymmetricMatrix gram(d + 1);
  std::vector<double> rhs(d + 1, 0.0);
  for (size_t a = 0; a <= d; ++a) {
    for (size_t b = a; b <= d; ++b) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) {
        acc += (a < d ? x.at(i, a) : 1.0) * (b < d ? x.at(i, b) : 1.0);
      }
      gram.set(a, b, acc);
    }
    for (size_t i = 0; i < n; ++i) rhs[a] += (a < d ? x.at(i, a) : 1.0) * (y[i] ? 1.0 : -1.0);
  }
  const std::vector<double> ols = linalg::spd_solve(gram, rhs);
  for (size_t j = 0; j < d; ++j) CHECK(en0.w[j] == doctest::Approx(ols[j]).epsilon(1e-5));
  CHECK(en0.b == doctest::Approx(ols[d]).epsilon(1e-5));

  // Pure lasso with a huge alpha zeroes every weight.
  const LinearScorer shrunk = fit_elastic_net(x, y, 1e3, 1.0);
  for (double v : shrunk.w) CHECK(v == 0.0);

  const LinearScorer en = fit_elastic_net(x, y);
  CHECK(metrics::auc(en.score_all(x), y) > 0.99);
}

TEST_CASE("linear SVM separates blobs") {
  Tensor x;
  std::vector<int> y;
  blobs(300, 5, 2.0, 19, &x, &y);
  const LinearScorer s = fit_linear_svm(x, y);
  CHECK(metrics::auc(s.score_all(x), y) > 0.99);
}

TEST_CASE("monotone score transforms never change the downstream argmax") {
  Rng rng(21);
  Tensor x;
  std::vector<int> y;
  blobs(100, 4, 1.0, 23, &x, &y);
  const LinearScorer s = fit_shrinkage_lda(x, y);
  const std::vector<double> scores = s.score_all(x);
  // Rank order of trials is what decide_command consumes; check that an
  // affine-plus-exp warp keeps the ordering.
  for (size_t block = 0; block + 9 <= 90; block += 9) {
    size_t best = block;
    size_t best_warp = block;
    for (size_t i = block; i < block + 9; ++i) {
      if (scores[i] > scores[best]) best = i;
      if (std::exp(0.3 * scores[i]) + 2.0 > std::exp(0.3 * scores[best_warp]) + 2.0) {
        best_warp = i;
      }
    }
    CHECK(best == best_warp);
  }
}
