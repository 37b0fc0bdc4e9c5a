#include "erpdeck/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace erpdeck::linalg {

namespace {

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v) {
    require(std::isfinite(x), Errc::invalid_input, std::string(what) + " has non-finite entries");
  }
}

// Applies f to the eigenvalues of a regularized SPD matrix and recomposes.
SymmetricMatrix spd_eig_map(const SymmetricMatrix& a, double (*f)(double), const char* what) {
  const size_t n = a.order();
  SymmetricMatrix reg = a;
  const double floor = 1e-10 * a.trace() / static_cast<double>(n ? n : 1);
  for (size_t i = 0; i < n; ++i) reg.at(i, i) += floor;
  EigResult e = sym_eig(reg);
  std::vector<double> mapped(n);
  for (size_t i = 0; i < n; ++i) {
    require(e.values[i] > 0.0, Errc::not_positive_definite,
            std::string(what) + ": eigenvalue <= 0 after regularization");
    mapped[i] = f(e.values[i]);
  }
  SymmetricMatrix out(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (size_t k = 0; k < n; ++k) s += e.vectors.at(i, k) * mapped[k] * e.vectors.at(j, k);
      out.set(i, j, s);
    }
  }
  return out;
}

double f_log(double x) { return std::log(x); }
double f_invsqrt(double x) { return 1.0 / std::sqrt(x); }
double f_sqrt(double x) { return std::sqrt(x); }

}  // namespace

SymmetricMatrix SymmetricMatrix::from_dense(size_t n, const std::vector<double>& dense) {
  require(dense.size() == n * n, Errc::shape_error, "dense storage does not match order");
  require_finite(dense, "SymmetricMatrix");
  double max_abs = 0.0;
  for (double x : dense) max_abs = std::max(max_abs, std::fabs(x));
  double max_asym = 0.0;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      max_asym = std::max(max_asym, std::fabs(dense[i * n + j] - dense[j * n + i]));
    }
  }
  require(max_asym <= 1e-12 * std::max(max_abs, 1e-300), Errc::invalid_input,
          "matrix is not symmetric within tolerance");
  SymmetricMatrix m(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      m.set(i, j, 0.5 * (dense[i * n + j] + dense[j * n + i]));
    }
  }
  return m;
}

double SymmetricMatrix::trace() const {
  double t = 0.0;
  for (size_t i = 0; i < n_; ++i) t += at(i, i);
  return t;
}

EigResult sym_eig(const SymmetricMatrix& a) {
  const size_t n = a.order();
  require_finite(a.raw(), "sym_eig input");

  std::vector<double> m = a.raw();  // working copy, row-major
  Tensor v({n, n}, 0.0);
  for (size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

  auto off_norm2 = [&]() {
    double s = 0.0;
    for (size_t i = 0; i < n; ++i)
      for (size_t j = i + 1; j < n; ++j) s += m[i * n + j] * m[i * n + j];
    return s;
  };

  double frob2 = 0.0;
  for (double x : m) frob2 += x * x;
  const double tol2 = frob2 * 1e-28 + 1e-300;

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps && off_norm2() > tol2; ++sweep) {
    for (size_t p = 0; p + 1 < n; ++p) {
      for (size_t q = p + 1; q < n; ++q) {
        const double apq = m[p * n + q];
        if (apq == 0.0) continue;
        const double app = m[p * n + p];
        const double aqq = m[q * n + q];
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (size_t k = 0; k < n; ++k) {
          const double akp = m[k * n + p];
          const double akq = m[k * n + q];
          m[k * n + p] = c * akp - s * akq;
          m[k * n + q] = s * akp + c * akq;
        }
        for (size_t k = 0; k < n; ++k) {
          const double apk = m[p * n + k];
          const double aqk = m[q * n + k];
          m[p * n + k] = c * apk - s * aqk;
          m[q * n + k] = s * apk + c * aqk;
        }
        for (size_t k = 0; k < n; ++k) {
          const double vkp = v.at(k, p);
          const double vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  EigResult result;
  result.values.resize(n);
  for (size_t i = 0; i < n; ++i) result.values[i] = m[i * n + i];

  // Sort ascending, permuting eigenvector columns alongside.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t x, size_t y) { return result.values[x] < result.values[y]; });
  EigResult sorted;
  sorted.values.resize(n);
  sorted.vectors = Tensor({n, n}, 0.0);
  for (size_t j = 0; j < n; ++j) {
    sorted.values[j] = result.values[order[j]];
    for (size_t i = 0; i < n; ++i) sorted.vectors.at(i, j) = v.at(i, order[j]);
  }
  return sorted;
}

Tensor cholesky(const SymmetricMatrix& a) {
  const size_t n = a.order();
  Tensor l({n, n}, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j <= i; ++j) {
      double s = a.at(i, j);
      for (size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
      if (i == j) {
        require(s > 0.0, Errc::not_positive_definite, "Cholesky pivot <= 0");
        l.at(i, i) = std::sqrt(s);
      } else {
        l.at(i, j) = s / l.at(j, j);
      }
    }
  }
  return l;
}

std::vector<double> spd_solve(const SymmetricMatrix& a, const std::vector<double>& rhs) {
  const size_t n = a.order();
  require(rhs.size() == n, Errc::shape_error, "spd_solve rhs size mismatch");
  Tensor l = cholesky(a);
  std::vector<double> y(n), x(n);
  for (size_t i = 0; i < n; ++i) {
    double s = rhs[i];
    for (size_t k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
    y[i] = s / l.at(i, i);
  }
  for (size_t ii = n; ii-- > 0;) {
    double s = y[ii];
    for (size_t k = ii + 1; k < n; ++k) s -= l.at(k, ii) * x[k];
    x[ii] = s / l.at(ii, ii);
  }
  return x;
}

EigResult gen_eig_spd(const SymmetricMatrix& a, const SymmetricMatrix& b) {
  const size_t n = a.order();
  require(b.order() == n, Errc::shape_error, "gen_eig_spd order mismatch");
  Tensor l = cholesky(b);  // throws NotPositiveDefinite if B is not SPD

  // C = L^-1 A L^-T, computed column-by-column with triangular solves.
  Tensor c({n, n}, 0.0);
  {
    // First W = L^-1 A  (solve L W = A).
    Tensor w({n, n}, 0.0);
    for (size_t col = 0; col < n; ++col) {
      for (size_t i = 0; i < n; ++i) {
        double s = a.at(i, col);
        for (size_t k = 0; k < i; ++k) s -= l.at(i, k) * w.at(k, col);
        w.at(i, col) = s / l.at(i, i);
      }
    }
    // Then C = W L^-T  (solve row-wise: C L^T = W  =>  L C^T = W^T).
    for (size_t row = 0; row < n; ++row) {
      for (size_t i = 0; i < n; ++i) {
        double s = w.at(row, i);
        for (size_t k = 0; k < i; ++k) s -= l.at(i, k) * c.at(row, k);
        c.at(row, i) = s / l.at(i, i);
      }
    }
  }
  SymmetricMatrix cs(n);
  for (size_t i = 0; i < n; ++i)
    for (size_t j = i; j < n; ++j) cs.set(i, j, 0.5 * (c.at(i, j) + c.at(j, i)));

  EigResult e = sym_eig(cs);

  // Back-transform: V = L^-T U, then flip to descending order.
  Tensor u = e.vectors;
  Tensor vv({n, n}, 0.0);
  for (size_t col = 0; col < n; ++col) {
    for (size_t ii = n; ii-- > 0;) {
      double s = u.at(ii, col);
      for (size_t k = ii + 1; k < n; ++k) s -= l.at(k, ii) * vv.at(k, col);
      vv.at(ii, col) = s / l.at(ii, ii);
    }
  }
  EigResult out;
  out.values.resize(n);
  out.vectors = Tensor({n, n}, 0.0);
  for (size_t j = 0; j < n; ++j) {
    out.values[j] = e.values[n - 1 - j];
    for (size_t i = 0; i < n; ++i) out.vectors.at(i, j) = vv.at(i, n - 1 - j);
  }
  return out;
}

SymmetricMatrix spd_logm(const SymmetricMatrix& a) { return spd_eig_map(a, f_log, "spd_logm"); }
SymmetricMatrix spd_invsqrt(const SymmetricMatrix& a) {
  return spd_eig_map(a, f_invsqrt, "spd_invsqrt");
}
SymmetricMatrix spd_sqrt(const SymmetricMatrix& a) { return spd_eig_map(a, f_sqrt, "spd_sqrt"); }

SymmetricMatrix spd_expm(const SymmetricMatrix& s) {
  // exp of a symmetric matrix needs no positivity floor.
  const size_t n = s.order();
  EigResult e = sym_eig(s);
  SymmetricMatrix out(n);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i; j < n; ++j) {
      double acc = 0.0;
      for (size_t k = 0; k < n; ++k)
        acc += e.vectors.at(i, k) * std::exp(e.values[k]) * e.vectors.at(j, k);
      out.set(i, j, acc);
    }
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0), Errc::shape_error,
          "matmul shape mismatch");
  const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n}, 0.0);
  for (size_t i = 0; i < m; ++i) {
    for (size_t kk = 0; kk < k; ++kk) {
      const double aik = a.at(i, kk);
      if (aik == 0.0) continue;
      const double* brow = b.data() + kk * n;
      double* crow = c.data() + i * n;
      for (size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, Errc::shape_error, "transpose needs rank-2 tensor");
  Tensor t({a.dim(1), a.dim(0)}, 0.0);
  for (size_t i = 0; i < a.dim(0); ++i)
    for (size_t j = 0; j < a.dim(1); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

std::vector<double> lu_solve(Tensor a, std::vector<double> rhs) {
  require(a.rank() == 2 && a.dim(0) == a.dim(1) && a.dim(0) == rhs.size(), Errc::shape_error,
          "lu_solve shape mismatch");
  const size_t n = a.dim(0);
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::fabs(a.at(r, col)) > std::fabs(a.at(piv, col))) piv = r;
    require(a.at(piv, col) != 0.0, Errc::numerical_error, "singular system");
    if (piv != col) {
      for (size_t j = 0; j < n; ++j) std::swap(a.at(piv, j), a.at(col, j));
      std::swap(rhs[piv], rhs[col]);
    }
    for (size_t r = col + 1; r < n; ++r) {
      const double f = a.at(r, col) / a.at(col, col);
      if (f == 0.0) continue;
      for (size_t j = col; j < n; ++j) a.at(r, j) -= f * a.at(col, j);
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(n);
  for (size_t ii = n; ii-- > 0;) {
    double s = rhs[ii];
    for (size_t j = ii + 1; j < n; ++j) s -= a.at(ii, j) * x[j];
    x[ii] = s / a.at(ii, ii);
  }
  return x;
}

}  // namespace erpdeck::linalg
