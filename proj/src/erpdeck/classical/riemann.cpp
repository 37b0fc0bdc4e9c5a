#include "erpdeck/classical/riemann.hpp"

#include <cmath>

namespace erpdeck::classical {

using linalg::SymmetricMatrix;

XdawnModel fit_xdawn(const dsp::EpochTensor& e, size_t n_filters) {
  const size_t chans = e.n_channels(), samples = e.n_samples();
  require(n_filters >= 1 && n_filters <= chans, Errc::invalid_input,
          "n_filters must be in [1, channels]");
  size_t n_target = 0;
  for (int l : e.labels) n_target += (l != 0);
  require(n_target > 0, Errc::degenerate_labels, "no target trials");
  require(n_target < e.n_trials(), Errc::degenerate_labels, "no non-target trials");

  // Average target response and its covariance (the "signal").
  Tensor avg({chans, samples}, 0.0);
  for (size_t t = 0; t < e.n_trials(); ++t) {
    if (!e.labels[t]) continue;
    const double* trial = e.trial(t);
    for (size_t i = 0; i < chans * samples; ++i) avg[i] += trial[i];
  }
  for (double& v : avg.raw()) v /= static_cast<double>(n_target);

  SymmetricMatrix sig(chans);
  for (size_t a = 0; a < chans; ++a) {
    for (size_t b = a; b < chans; ++b) {
      double acc = 0.0;
      for (size_t k = 0; k < samples; ++k) acc += avg.at(a, k) * avg.at(b, k);
      sig.set(a, b, acc / static_cast<double>(samples));
    }
  }

  // Covariance of everything (the "noise"), with the regularization floor.
  SymmetricMatrix noise(chans);
  for (size_t t = 0; t < e.n_trials(); ++t) {
    const double* trial = e.trial(t);
    for (size_t a = 0; a < chans; ++a) {
      for (size_t b = a; b < chans; ++b) {
        double acc = 0.0;
        for (size_t k = 0; k < samples; ++k) acc += trial[a * samples + k] * trial[b * samples + k];
        noise.set(a, b, noise.at(a, b) + acc);
      }
    }
  }
  const double denom = static_cast<double>(e.n_trials()) * static_cast<double>(samples);
  for (size_t a = 0; a < chans; ++a) {
    for (size_t b = a; b < chans; ++b) noise.set(a, b, noise.at(a, b) / denom);
  }
  const double floor = 1e-10 * noise.trace() / static_cast<double>(chans);
  for (size_t a = 0; a < chans; ++a) noise.set(a, a, noise.at(a, a) + floor);

  const linalg::EigResult eig = linalg::gen_eig_spd(sig, noise);
  XdawnModel m;
  m.filters = Tensor({n_filters, chans});
  for (size_t f = 0; f < n_filters; ++f) {
    for (size_t c = 0; c < chans; ++c) m.filters.at(f, c) = eig.vectors.at(c, f);
  }
  m.prototype = apply_filters(m, avg.data(), chans, samples);
  return m;
}

Tensor apply_filters(const XdawnModel& m, const double* trial, size_t channels, size_t samples) {
  const size_t nf = m.filters.dim(0);
  require(m.filters.dim(1) == channels, Errc::shape_error, "filter/channel mismatch");
  Tensor out({nf, samples}, 0.0);
  for (size_t f = 0; f < nf; ++f) {
    double* orow = out.data() + f * samples;
    for (size_t c = 0; c < channels; ++c) {
      const double w = m.filters.at(f, c);
      if (w == 0.0) continue;
      const double* irow = trial + c * samples;
      for (size_t k = 0; k < samples; ++k) orow[k] += w * irow[k];
    }
  }
  return out;
}

linalg::SymmetricMatrix augmented_covariance(const XdawnModel& m, const double* trial,
                                             size_t channels, size_t samples) {
  const Tensor filtered = apply_filters(m, trial, channels, samples);
  const size_t nf = m.filters.dim(0);
  const size_t rows = 2 * nf;
  require(m.prototype.dim(1) == samples, Errc::shape_error, "prototype length mismatch");

  auto row_ptr = [&](size_t r) {
    return r < nf ? m.prototype.data() + r * samples : filtered.data() + (r - nf) * samples;
  };
  SymmetricMatrix cov(rows);
  for (size_t a = 0; a < rows; ++a) {
    for (size_t b = a; b < rows; ++b) {
      double acc = 0.0;
      const double* ra = row_ptr(a);
      const double* rb = row_ptr(b);
      for (size_t k = 0; k < samples; ++k) acc += ra[k] * rb[k];
      cov.set(a, b, acc / static_cast<double>(samples));
    }
  }
  const double floor = 1e-10 * cov.trace() / static_cast<double>(rows);
  for (size_t a = 0; a < rows; ++a) cov.set(a, a, cov.at(a, a) + floor);
  return cov;
}

linalg::SymmetricMatrix karcher_mean(const std::vector<SymmetricMatrix>& mats, int max_iter,
                                     double tol) {
  require(!mats.empty(), Errc::invalid_input, "mean of an empty set");
  const size_t m = mats[0].order();
  SymmetricMatrix g(m);
  for (const SymmetricMatrix& s : mats) {
    require(s.order() == m, Errc::shape_error, "order mismatch");
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = a; b < m; ++b) g.set(a, b, g.at(a, b) + s.at(a, b));
    }
  }
  for (size_t a = 0; a < m; ++a) {
    for (size_t b = a; b < m; ++b) g.set(a, b, g.at(a, b) / static_cast<double>(mats.size()));
  }

  for (int iter = 0; iter < max_iter; ++iter) {
    const SymmetricMatrix g_is = linalg::spd_invsqrt(g);
    const SymmetricMatrix g_s = linalg::spd_sqrt(g);
    // Mean of logm(G^-1/2 S G^-1/2) over the set.
    SymmetricMatrix tangent_mean(m);
    for (const SymmetricMatrix& s : mats) {
      // W = G^-1/2 S G^-1/2
      Tensor tmp({m, m}, 0.0);
      for (size_t a = 0; a < m; ++a) {
        for (size_t b = 0; b < m; ++b) {
          double acc = 0.0;
          for (size_t k = 0; k < m; ++k) acc += g_is.at(a, k) * s.at(k, b);
          tmp.at(a, b) = acc;
        }
      }
      SymmetricMatrix w(m);
      for (size_t a = 0; a < m; ++a) {
        for (size_t b = a; b < m; ++b) {
          double acc = 0.0;
          for (size_t k = 0; k < m; ++k) acc += tmp.at(a, k) * g_is.at(k, b);
          w.set(a, b, acc);
        }
      }
      const SymmetricMatrix lw = linalg::spd_logm(w);
      for (size_t a = 0; a < m; ++a) {
        for (size_t b = a; b < m; ++b) tangent_mean.set(a, b, tangent_mean.at(a, b) + lw.at(a, b));
      }
    }
    double norm = 0.0;
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = a; b < m; ++b) {
        const double v = tangent_mean.at(a, b) / static_cast<double>(mats.size());
        tangent_mean.set(a, b, v);
        norm += (a == b ? 1.0 : 2.0) * v * v;
      }
    }
    if (std::sqrt(norm) < tol) break;
    // G <- G^1/2 exp(mean) G^1/2
    const SymmetricMatrix e = linalg::spd_expm(tangent_mean);
    Tensor tmp({m, m}, 0.0);
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = 0; b < m; ++b) {
        double acc = 0.0;
        for (size_t k = 0; k < m; ++k) acc += g_s.at(a, k) * e.at(k, b);
        tmp.at(a, b) = acc;
      }
    }
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = a; b < m; ++b) {
        double acc = 0.0;
        for (size_t k = 0; k < m; ++k) acc += tmp.at(a, k) * g_s.at(k, b);
        g.set(a, b, acc);
      }
    }
  }
  return g;
}

size_t tangent_dim(size_t m) { return m * (m + 1) / 2; }

std::vector<double> tangent_vector(const SymmetricMatrix& s, TangentMetric metric,
                                   const SymmetricMatrix& reference) {
  const size_t m = s.order();
  SymmetricMatrix mapped(m);
  if (metric == TangentMetric::log_euclidean) {
    mapped = linalg::spd_logm(s);
  } else {
    const SymmetricMatrix g_is = linalg::spd_invsqrt(reference);
    Tensor tmp({m, m}, 0.0);
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = 0; b < m; ++b) {
        double acc = 0.0;
        for (size_t k = 0; k < m; ++k) acc += g_is.at(a, k) * s.at(k, b);
        tmp.at(a, b) = acc;
      }
    }
    SymmetricMatrix w(m);
    for (size_t a = 0; a < m; ++a) {
      for (size_t b = a; b < m; ++b) {
        double acc = 0.0;
        for (size_t k = 0; k < m; ++k) acc += tmp.at(a, k) * g_is.at(k, b);
        w.set(a, b, acc);
      }
    }
    mapped = linalg::spd_logm(w);
  }
  std::vector<double> v;
  v.reserve(tangent_dim(m));
  const double rt2 = std::sqrt(2.0);
  for (size_t a = 0; a < m; ++a) {
    for (size_t b = a; b < m; ++b) {
      v.push_back(a == b ? mapped.at(a, b) : rt2 * mapped.at(a, b));
    }
  }
  return v;
}

TangentSpaceModel fit_tangent_space(const dsp::EpochTensor& train, size_t n_filters,
                                    TangentMetric metric) {
  TangentSpaceModel m;
  m.xdawn = fit_xdawn(train, n_filters);
  m.metric = metric;
  if (metric == TangentMetric::riemann) {
    std::vector<SymmetricMatrix> covs;
    covs.reserve(train.n_trials());
    for (size_t t = 0; t < train.n_trials(); ++t) {
      covs.push_back(
          augmented_covariance(m.xdawn, train.trial(t), train.n_channels(), train.n_samples()));
    }
    m.reference = karcher_mean(covs);
  } else {
    m.reference = SymmetricMatrix(2 * n_filters);
    for (size_t i = 0; i < 2 * n_filters; ++i) m.reference.set(i, i, 1.0);
  }
  return m;
}

Tensor tangent_features(const TangentSpaceModel& m, const dsp::EpochTensor& e) {
  const size_t rows = 2 * m.xdawn.filters.dim(0);
  const size_t dim = tangent_dim(rows);
  Tensor out({e.n_trials(), dim});
  for (size_t t = 0; t < e.n_trials(); ++t) {
    const SymmetricMatrix cov =
        augmented_covariance(m.xdawn, e.trial(t), e.n_channels(), e.n_samples());
    const std::vector<double> v = tangent_vector(cov, m.metric, m.reference);
    std::copy(v.begin(), v.end(), out.data() + t * dim);
  }
  return out;
}

}  // namespace erpdeck::classical
