#pragma once

#include <string>
#include <vector>

#include "erpdeck/linalg.hpp"
#include "erpdeck/signal.hpp"

namespace erpdeck::classical {

// Spatial filters maximizing evoked-response SNR: top generalized
// eigenvectors of (covariance of the averaged target response, covariance of
// all data). Rows are orthonormal under the noise metric.
struct XdawnModel {
  Tensor filters;    // (n_filters, channels)
  Tensor prototype;  // (n_filters, samples) — filtered average target response
};

XdawnModel fit_xdawn(const dsp::EpochTensor& e, size_t n_filters = 4);

// Applies the filters to one trial: (n_filters, samples).
Tensor apply_filters(const XdawnModel& m, const double* trial, size_t channels, size_t samples);

enum class TangentMetric { log_euclidean, riemann };

// Augmented covariance of [prototype; filtered trial], with the tensorkit
// regularization floor.
linalg::SymmetricMatrix augmented_covariance(const XdawnModel& m, const double* trial,
                                             size_t channels, size_t samples);

// Riemannian (Karcher) mean of SPD matrices under the affine-invariant
// metric; fixed-point iteration from the arithmetic mean.
linalg::SymmetricMatrix karcher_mean(const std::vector<linalg::SymmetricMatrix>& mats,
                                     int max_iter = 50, double tol = 1e-9);

// Upper-triangle vectorization with sqrt(2) off-diagonal weighting of
//   log-euclidean:  logm(S)
//   riemann:        logm(G^-1/2 S G^-1/2)
std::vector<double> tangent_vector(const linalg::SymmetricMatrix& s, TangentMetric metric,
                                   const linalg::SymmetricMatrix& reference);

size_t tangent_dim(size_t m);  // m(m+1)/2

// Fitted tangent-space feature extractor for one xDAWN pipeline.
struct TangentSpaceModel {
  XdawnModel xdawn;
  TangentMetric metric = TangentMetric::log_euclidean;
  linalg::SymmetricMatrix reference;  // identity-like placeholder for log-euclidean
};

TangentSpaceModel fit_tangent_space(const dsp::EpochTensor& train, size_t n_filters,
                                    TangentMetric metric);
Tensor tangent_features(const TangentSpaceModel& m, const dsp::EpochTensor& e);

}  // namespace erpdeck::classical
