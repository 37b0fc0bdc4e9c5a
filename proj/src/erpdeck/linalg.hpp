#pragma once

#include <cstddef>
#include <vector>

#include "erpdeck/error.hpp"
#include "erpdeck/tensor.hpp"

namespace erpdeck::linalg {

// Dense symmetric matrix. Construction enforces symmetry to rounding
// (max |A[i][j] - A[j][i]| <= 1e-12 * max|A|) and stores the symmetrized
// average, so downstream eigensolves see an exactly symmetric operand.
class SymmetricMatrix {
 public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(size_t n) : n_(n), a_(n * n, 0.0) {}

  // From dense row-major storage; checks the symmetry tolerance.
  static SymmetricMatrix from_dense(size_t n, const std::vector<double>& dense);

  size_t order() const { return n_; }
  double& at(size_t i, size_t j) { return a_[i * n_ + j]; }
  double at(size_t i, size_t j) const { return a_[i * n_ + j]; }
  void set(size_t i, size_t j, double v) {
    a_[i * n_ + j] = v;
    a_[j * n_ + i] = v;
  }

  const std::vector<double>& raw() const { return a_; }
  double trace() const;

 private:
  size_t n_ = 0;
  std::vector<double> a_;
};

struct EigResult {
  std::vector<double> values;  // ascending for sym_eig, descending for gen_eig_spd
  Tensor vectors;              // columns are eigenvectors, shape (n, n)
};

// Cyclic Jacobi rotations; fine for the matrix orders used here (<= ~300).
// Eigenvalues ascending; eigenvector columns orthonormal to ~1e-12.
EigResult sym_eig(const SymmetricMatrix& a);

// Generalized symmetric-definite problem A v = lambda B v via Cholesky
// reduction. Eigenvalues descending; eigenvectors are B-orthonormal.
EigResult gen_eig_spd(const SymmetricMatrix& a, const SymmetricMatrix& b);

// Symmetric positive-definite transcendental maps. Inputs get a
// regularization floor of 1e-10 * trace/n added to the diagonal before the
// eigenvalue map; single-trial covariances are routinely rank-deficient.
SymmetricMatrix spd_logm(const SymmetricMatrix& a);
SymmetricMatrix spd_expm(const SymmetricMatrix& s);  // of a symmetric matrix
SymmetricMatrix spd_invsqrt(const SymmetricMatrix& a);
SymmetricMatrix spd_sqrt(const SymmetricMatrix& a);

// Cholesky factor L (lower) of an SPD matrix; throws NotPositiveDefinite.
Tensor cholesky(const SymmetricMatrix& a);

// Solves A x = rhs for SPD A via Cholesky.
std::vector<double> spd_solve(const SymmetricMatrix& a, const std::vector<double>& rhs);

// Dense helpers (row-major, shapes must agree).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// General square solve with partial pivoting (small systems only).
std::vector<double> lu_solve(Tensor a, std::vector<double> rhs);

}  // namespace erpdeck::linalg
