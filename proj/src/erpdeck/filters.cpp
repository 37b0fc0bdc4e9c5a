#include "erpdeck/filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "erpdeck/linalg.hpp"

namespace erpdeck::dsp {

namespace {

using cplx = std::complex<double>;

// Expands prod (x - r_i) into real coefficients, highest power first.
std::vector<double> poly_from_roots(const std::vector<cplx>& roots) {
  std::vector<cplx> c{1.0};
  for (const cplx& r : roots) {
    std::vector<cplx> next(c.size() + 1, cplx(0.0));
    for (size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= c[i] * r;
    }
    c = std::move(next);
  }
  std::vector<double> out(c.size());
  for (size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

// Durand-Kerner root finding; adequate for the low-degree stability check.
std::vector<cplx> poly_roots(const std::vector<double>& coeffs) {
  std::vector<double> c = coeffs;
  while (c.size() > 1 && c.front() == 0.0) c.erase(c.begin());
  const size_t deg = c.size() - 1;
  if (deg == 0) return {};
  std::vector<cplx> monic(deg);
  for (size_t i = 0; i < deg; ++i) monic[i] = c[i + 1] / c[0];
  std::vector<cplx> r(deg);
  cplx seed(0.4, 0.9);
  cplx p = 1.0;
  for (size_t i = 0; i < deg; ++i) {
    p *= seed;
    r[i] = p;
  }
  auto eval = [&](cplx x) {
    cplx v = 1.0;
    for (size_t i = 0; i < deg; ++i) v = v * x + monic[i];
    return v;
  };
  for (int iter = 0; iter < 200; ++iter) {
    double moved = 0.0;
    for (size_t i = 0; i < deg; ++i) {
      cplx denom = 1.0;
      for (size_t j = 0; j < deg; ++j)
        if (j != i) denom *= (r[i] - r[j]);
      cplx delta = eval(r[i]) / denom;
      r[i] -= delta;
      moved = std::max(moved, std::abs(delta));
    }
    if (moved < 1e-13) break;
  }
  return r;
}

}  // namespace

bool IirFilter::stable() const {
  if (a.size() <= 1) return true;
  for (const cplx& p : poly_roots(a)) {
    if (std::abs(p) >= 1.0 - 1e-12) return false;
  }
  return true;
}

double IirFilter::magnitude(double f_hz, double fs) const {
  const double w = 2.0 * M_PI * f_hz / fs;
  const cplx z = std::exp(cplx(0.0, -w));
  cplx num = 0.0, den = 0.0, zp = 1.0;
  for (size_t i = 0; i < std::max(a.size(), b.size()); ++i) {
    if (i < b.size()) num += b[i] * zp;
    if (i < a.size()) den += a[i] * zp;
    zp *= z;
  }
  return std::abs(num / den);
}

IirFilter butter_bandpass(int order, double lo_hz, double hi_hz, double fs) {
  require(order >= 2 && order % 2 == 0, Errc::invalid_band, "order must be a positive even int");
  require(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < fs / 2.0, Errc::invalid_band,
          "band must satisfy 0 < lo < hi < fs/2");

  const int n = order;
  const double fs2 = 2.0 * fs;
  const double w1 = fs2 * std::tan(M_PI * lo_hz / fs);  // pre-warped edges
  const double w2 = fs2 * std::tan(M_PI * hi_hz / fs);
  const double w0 = std::sqrt(w1 * w2);
  const double bw = w2 - w1;

  // Analog Butterworth prototype poles at unit cutoff.
  std::vector<cplx> poles;
  for (int k = -n + 1; k < n; k += 2) {
    poles.push_back(-std::exp(cplx(0.0, M_PI * k / (2.0 * n))));
  }

  // Lowpass -> bandpass in the s-domain: degree doubles, n zeros at s = 0.
  std::vector<cplx> bp_poles;
  for (const cplx& p : poles) {
    const cplx ps = p * (bw / 2.0);
    const cplx d = std::sqrt(ps * ps - cplx(w0 * w0));
    bp_poles.push_back(ps + d);
    bp_poles.push_back(ps - d);
  }
  std::vector<cplx> bp_zeros(static_cast<size_t>(n), cplx(0.0));
  double gain = std::pow(bw, n);

  // Bilinear transform; the n zeros at infinity land on z = -1.
  std::vector<cplx> z_poles, z_zeros;
  cplx num = 1.0, den = 1.0;
  for (const cplx& zz : bp_zeros) {
    z_zeros.push_back((fs2 + zz) / (fs2 - zz));
    num *= (fs2 - zz);
  }
  for (const cplx& pp : bp_poles) {
    z_poles.push_back((fs2 + pp) / (fs2 - pp));
    den *= (fs2 - pp);
  }
  gain *= (num / den).real();
  z_zeros.resize(bp_poles.size(), cplx(-1.0));

  IirFilter f;
  f.b = poly_from_roots(z_zeros);
  for (double& c : f.b) c *= gain;
  f.a = poly_from_roots(z_poles);
  require(f.stable(), Errc::numerical_error, "designed filter is unstable");
  return f;
}

IirFilter notch(double f0_hz, double q, double fs) {
  require(f0_hz > 0.0 && f0_hz < fs / 2.0, Errc::invalid_band, "notch frequency out of (0, fs/2)");
  require(q > 0.0, Errc::invalid_band, "notch q must be positive");
  const double w0 = 2.0 * M_PI * f0_hz / fs;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  IirFilter f;
  f.b = {1.0 / a0, -2.0 * std::cos(w0) / a0, 1.0 / a0};
  f.a = {1.0, -2.0 * std::cos(w0) / a0, (1.0 - alpha) / a0};
  return f;
}

namespace {

// Steady-state initial filter state for a unit step input.
std::vector<double> lfilter_zi(const IirFilter& f) {
  const size_t n = std::max(f.a.size(), f.b.size());
  std::vector<double> a(f.a), b(f.b);
  a.resize(n, 0.0);
  b.resize(n, 0.0);
  if (n <= 1) return {};
  const size_t m = n - 1;
  Tensor imina({m, m}, 0.0);  // I - companion(a)^T
  for (size_t i = 0; i < m; ++i) {
    imina.at(i, 0) += a[i + 1];
    imina.at(i, i) += 1.0;
    if (i + 1 < m) imina.at(i, i + 1) -= 1.0;
  }
  std::vector<double> rhs(m);
  for (size_t i = 0; i < m; ++i) rhs[i] = b[i + 1] - a[i + 1] * b[0];
  return linalg::lu_solve(std::move(imina), std::move(rhs));
}

std::vector<double> lfilter_with_state(const IirFilter& f, const std::vector<double>& x,
                                       std::vector<double> z) {
  const size_t n = std::max(f.a.size(), f.b.size());
  std::vector<double> a(f.a), b(f.b);
  a.resize(n, 0.0);
  b.resize(n, 0.0);
  z.resize(n > 0 ? n - 1 : 0, 0.0);
  std::vector<double> y(x.size());
  for (size_t i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    const double yi = b[0] * xi + (z.empty() ? 0.0 : z[0]);
    for (size_t k = 0; k + 1 < z.size(); ++k) z[k] = b[k + 1] * xi + z[k + 1] - a[k + 1] * yi;
    if (!z.empty()) z.back() = b[n - 1] * xi - a[n - 1] * yi;
    y[i] = yi;
  }
  return y;
}

}  // namespace

std::vector<double> lfilter(const IirFilter& f, const std::vector<double>& x) {
  return lfilter_with_state(f, x, {});
}

std::vector<double> filtfilt(const IirFilter& f, const std::vector<double>& x) {
  const size_t pad = 3 * std::max(f.a.size(), f.b.size());
  require(x.size() > pad, Errc::signal_too_short,
          "filtfilt needs signal length > 3*max(len(a), len(b))");

  std::vector<double> ext;
  ext.reserve(x.size() + 2 * pad);
  for (size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x.front() - x[pad - i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (size_t i = 0; i < pad; ++i) ext.push_back(2.0 * x.back() - x[x.size() - 2 - i]);

  const std::vector<double> zi = lfilter_zi(f);
  auto forward = [&](std::vector<double> v) {
    std::vector<double> z(zi);
    for (double& s : z) s *= v.front();
    return lfilter_with_state(f, v, std::move(z));
  };
  auto backward = [&](std::vector<double> v) {
    std::reverse(v.begin(), v.end());
    v = forward(std::move(v));
    std::reverse(v.begin(), v.end());
    return v;
  };

  // Running both pass orders and averaging makes the operator commute with
  // time reversal exactly; a single forward-backward pass only does so up to
  // its residual edge transient.
  const std::vector<double> fb = backward(forward(ext));
  const std::vector<double> bf = forward(backward(std::move(ext)));
  std::vector<double> y(x.size());
  for (size_t i = 0; i < y.size(); ++i) y[i] = 0.5 * (fb[i + pad] + bf[i + pad]);
  return y;
}

}  // namespace erpdeck::dsp
