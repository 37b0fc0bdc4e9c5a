#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "erpdeck/classical/linear.hpp"
#include "erpdeck/classical/riemann.hpp"
#include "erpdeck/metrics.hpp"
#include "erpdeck/rng.hpp"

using namespace erpdeck;
using namespace erpdeck::classical;
using linalg::SymmetricMatrix;

namespace {

// Epochs with a rank-1 evoked response planted on target trials.
dsp::EpochTensor planted_epochs(size_t trials, size_t chans, size_t samples, double amp,
                                uint64_t seed, std::vector<double>* direction = nullptr) {
  Rng rng(seed);
  std::vector<double> a(chans);
  double n2 = 0.0;
  Rng drng(99);
  for (double& v : a) {
    v = drng.normal();
    n2 += v * v;
  }
  for (double& v : a) v /= std::sqrt(n2);
  if (direction) *direction = a;

  dsp::EpochTensor e;
  e.fs = 512.0;
  e.t0_ms = 0.0;
  e.data = Tensor({trials, chans, samples});
  e.labels.resize(trials);
  e.command_codes.assign(trials, 1);
  for (size_t t = 0; t < trials; ++t) {
    e.labels[t] = t % 9 == 0;
    double* trial = e.trial(t);
    for (size_t c = 0; c < chans; ++c) {
      for (size_t k = 0; k < samples; ++k) trial[c * samples + k] = rng.normal();
    }
    if (e.labels[t]) {
      for (size_t c = 0; c < chans; ++c) {
        for (size_t k = 0; k < samples; ++k) {
          const double bump = amp * std::exp(-0.5 * std::pow((double(k) - samples / 2.0) / 8.0, 2));
          trial[c * samples + k] += a[c] * bump;
        }
      }
    }
  }
  return e;
}

SymmetricMatrix random_spd(size_t m, uint64_t seed) {
  Rng rng(seed);
  Tensor g({m, m});
  for (size_t i = 0; i < m * m; ++i) g[i] = rng.normal();
  SymmetricMatrix s(m);
  for (size_t a = 0; a < m; ++a) {
    for (size_t b = a; b < m; ++b) {
      double acc = 0.0;
      for (size_t k = 0; k < m; ++k) acc += g.at(a, k) * g.at(b, k);
      s.set(a, b, acc + (a == b ? double(m) : 0.0));
    }
  }
  return s;
}

double frob_dist(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.raw().size(); ++i) {
    s += (a.raw()[i] - b.raw()[i]) * (a.raw()[i] - b.raw()[i]);
  }
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("xdawn aligns its first filter with a planted rank-1 response") {
  std::vector<double> direction;
  const auto e = planted_epochs(450, 8, 64, 6.0, 3, &direction);
  const XdawnModel m = fit_xdawn(e, 4);

  // The first filter must recover the planted spatial direction up to the
  // noise-metric scaling; with white noise that is the direction itself.
  double dot = 0.0, wn = 0.0;
  for (size_t c = 0; c < 8; ++c) {
    dot += m.filters.at(0, c) * direction[c];
    wn += m.filters.at(0, c) * m.filters.at(0, c);
  }
  CHECK(std::fabs(dot) / std::sqrt(wn) > 0.95);

  // Filtered prototype concentrates energy in the response window.
  const size_t samples = 64;
  double win = 0.0, total = 0.0;
  for (size_t k = 0; k < samples; ++k) {
    const double v = m.prototype.at(0, k);
    total += v * v;
    if (k >= 24 && k < 40) win += v * v;
  }
  CHECK(win / total > 16.0 / 64.0);  // strictly better than a flat split
}

TEST_CASE("xdawn with n_filters = channels gives an invertible square matrix") {
  const auto e = planted_epochs(180, 6, 32, 4.0, 7);
  const XdawnModel m = fit_xdawn(e, 6);
  CHECK(m.filters.dim(0) == 6);
  CHECK(m.filters.dim(1) == 6);
  // Full-rank: determinant via LU solve of each basis vector stays finite.
  Tensor a = m.filters;
  std::vector<double> rhs(6, 0.0);
  rhs[0] = 1.0;
  CHECK_NOTHROW(linalg::lu_solve(a, rhs));
}

TEST_CASE("xdawn requires both classes") {
  auto e = planted_epochs(90, 4, 16, 3.0, 9);
  for (auto& l : e.labels) l = 0;
  CHECK_THROWS_AS(fit_xdawn(e, 2), Error);
}

TEST_CASE("tangent vector at the reference point is zero (riemann metric)") {
  const SymmetricMatrix g = random_spd(6, 5);
  const auto v = tangent_vector(g, TangentMetric::riemann, g);
  CHECK(v.size() == tangent_dim(6));
  for (double x : v) CHECK(std::fabs(x) < 1e-7);
}

TEST_CASE("tangent distances approximate AIRM geodesics near the reference") {
  const size_t m = 5;
  const SymmetricMatrix g = random_spd(m, 11);
  // Two small symmetric perturbations in the tangent space at G.
  auto perturb = [&](uint64_t seed, double scale) {
    Rng rng(seed);
    SymmetricMatrix h(m);
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = a; b < m; ++b) h.set(a, b, scale * rng.normal());
    }
    // A = G^1/2 exp(H) G^1/2
    const SymmetricMatrix gs = linalg::spd_sqrt(g);
    const SymmetricMatrix e = linalg::spd_expm(h);
    Tensor tmp({m, m}, 0.0);
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = 0; b < m; ++b) {
        double acc = 0.0;
        for (size_t k = 0; k < m; ++k) acc += gs.at(a, k) * e.at(k, b);
        tmp.at(a, b) = acc;
      }
    }
    SymmetricMatrix out(m);
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = a; b < m; ++b) {
        double acc = 0.0;
        for (size_t k = 0; k < m; ++k) acc += tmp.at(a, k) * gs.at(k, b);
        out.set(a, b, acc);
      }
    }
    return out;
  };
  const SymmetricMatrix a = perturb(1, 0.05);
  const SymmetricMatrix b = perturb(2, 0.05);

  const auto va = tangent_vector(a, TangentMetric::riemann, g);
  const auto vb = tangent_vector(b, TangentMetric::riemann, g);
  double d_ts = 0.0;
  for (size_t i = 0; i < va.size(); ++i) d_ts += (va[i] - vb[i]) * (va[i] - vb[i]);
  d_ts = std::sqrt(d_ts);

  // AIRM geodesic distance oracle: || logm(A^-1/2 B A^-1/2) ||_F.
  const SymmetricMatrix a_is = linalg::spd_invsqrt(a);
  Tensor tmp({m, m}, 0.0);
  for (size_t r = 0; r < m; ++r) {
    for (size_t c = 0; c < m; ++c) {
      double acc = 0.0;
      for (size_t k = 0; k < m; ++k) acc += a_is.at(r, k) * b.at(k, c);
      tmp.at(r, c) = acc;
    }
  }
  SymmetricMatrix w(m);
  for (size_t r = 0; r < m; ++r) {
    for (size_t c = r; c < m; ++c) {
      double acc = 0.0;
      for (size_t k = 0; k < m; ++k) acc += tmp.at(r, k) * a_is.at(k, c);
      w.set(r, c, acc);
    }
  }
  const SymmetricMatrix lw = linalg::spd_logm(w);
  double d_geo = 0.0;
  for (double v : lw.raw()) d_geo += v * v;
  d_geo = std::sqrt(d_geo);

  CHECK(d_ts == doctest::Approx(d_geo).epsilon(0.05));
}

TEST_CASE("tangent vector length is m(m+1)/2") {
  CHECK(tangent_dim(8) == 36);
  const SymmetricMatrix g = random_spd(8, 3);
  CHECK(tangent_vector(g, TangentMetric::log_euclidean, g).size() == 36);
}

TEST_CASE("karcher mean of a single matrix is that matrix") {
  const SymmetricMatrix g = random_spd(4, 17);
  const SymmetricMatrix mean = karcher_mean({g});
  CHECK(frob_dist(mean, g) < 1e-8);
}

TEST_CASE("karcher mean of commuting matrices is the geometric mean") {
  // Diagonal matrices commute; the Karcher mean is the entrywise geometric mean.
  SymmetricMatrix a(2), b(2);
  a.set(0, 0, 1.0);
  a.set(1, 1, 4.0);
  b.set(0, 0, 9.0);
  b.set(1, 1, 1.0);
  const SymmetricMatrix mean = karcher_mean({a, b});
  CHECK(mean.at(0, 0) == doctest::Approx(3.0).epsilon(1e-6));
  CHECK(mean.at(1, 1) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK(std::fabs(mean.at(0, 1)) < 1e-8);
}

TEST_CASE("full xdawn + tangent space + heads reach high AUC on planted data") {
  const auto train = planted_epochs(540, 8, 64, 5.0, 21);
  const auto test = planted_epochs(270, 8, 64, 5.0, 22);

  for (const TangentMetric metric : {TangentMetric::log_euclidean, TangentMetric::riemann}) {
    const TangentSpaceModel ts = fit_tangent_space(train, 4, metric);
    Tensor f_train = tangent_features(ts, train);
    Tensor f_test = tangent_features(ts, test);

    if (metric == TangentMetric::log_euclidean) {
      // L1-normalize per trial, then elastic net.
      for (Tensor* f : {&f_train, &f_test}) {
        for (size_t t = 0; t < f->dim(0); ++t) {
          double nrm = 0.0;
          for (size_t j = 0; j < f->dim(1); ++j) nrm += std::fabs(f->at(t, j));
          if (nrm > 0.0) {
            for (size_t j = 0; j < f->dim(1); ++j) f->at(t, j) /= nrm;
          }
        }
      }
      const LinearScorer head = fit_elastic_net(f_train, train.labels);
      CHECK(metrics::auc(head.score_all(f_test), test.labels) > 0.9);
    } else {
      const LinearScorer head = fit_linear_svm(f_train, train.labels);
      CHECK(metrics::auc(head.score_all(f_test), test.labels) > 0.9);
    }
  }
}
