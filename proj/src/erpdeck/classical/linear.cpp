#include "erpdeck/classical/linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "erpdeck/error.hpp"
#include "erpdeck/linalg.hpp"
#include "erpdeck/special.hpp"
#include "erpdeck/stats.hpp"

namespace erpdeck::classical {

namespace {

void check_two_classes(const std::vector<int>& labels) {
  size_t pos = 0;
  for (int l : labels) pos += (l != 0);
  require(pos >= 2 && labels.size() - pos >= 2, Errc::degenerate_labels,
          "need at least two samples per class");
}

std::vector<double> column(const Tensor& x, size_t j) {
  std::vector<double> c(x.dim(0));
  for (size_t i = 0; i < x.dim(0); ++i) c[i] = x.at(i, j);
  return c;
}

}  // namespace

std::vector<double> LinearScorer::score_all(const Tensor& x) const {
  require(x.rank() == 2 && x.dim(1) == w.size(), Errc::shape_error,
          "feature matrix does not match scorer");
  std::vector<double> s(x.dim(0));
  for (size_t i = 0; i < x.dim(0); ++i) s[i] = score(x.data() + i * w.size());
  return s;
}

LinearScorer fit_shrinkage_lda(const Tensor& x, const std::vector<int>& labels,
                               double gamma_override, double* gamma_out) {
  require(x.rank() == 2 && x.dim(0) == labels.size(), Errc::shape_error, "bad feature matrix");
  check_two_classes(labels);
  const size_t n = x.dim(0), d = x.dim(1);

  std::vector<double> mu0(d, 0.0), mu1(d, 0.0);
  size_t n0 = 0, n1 = 0;
  for (size_t i = 0; i < n; ++i) {
    const double* row = x.data() + i * d;
    if (labels[i]) {
      ++n1;
      for (size_t j = 0; j < d; ++j) mu1[j] += row[j];
    } else {
      ++n0;
      for (size_t j = 0; j < d; ++j) mu0[j] += row[j];
    }
  }
  for (size_t j = 0; j < d; ++j) {
    mu0[j] /= static_cast<double>(n0);
    mu1[j] /= static_cast<double>(n1);
  }

  // Pooled within-class scatter of the class-centered samples.
  Tensor centered({n, d});
  for (size_t i = 0; i < n; ++i) {
    const double* row = x.data() + i * d;
    const std::vector<double>& mu = labels[i] ? mu1 : mu0;
    for (size_t j = 0; j < d; ++j) centered.at(i, j) = row[j] - mu[j];
  }
  linalg::SymmetricMatrix s(d);
  for (size_t a = 0; a < d; ++a) {
    for (size_t b = a; b < d; ++b) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) acc += centered.at(i, a) * centered.at(i, b);
      s.set(a, b, acc / static_cast<double>(n));
    }
  }

  double gamma = gamma_override;
  if (gamma < 0.0) {
    // Ledoit-Wolf analytic intensity toward the scaled identity target.
    const double m = s.trace() / static_cast<double>(d);
    double d2 = 0.0;
    for (size_t a = 0; a < d; ++a) {
      for (size_t b = 0; b < d; ++b) {
        const double v = s.at(a, b) - (a == b ? m : 0.0);
        d2 += v * v;
      }
    }
    d2 /= static_cast<double>(d);
    double b2 = 0.0;
    double s_frob2 = 0.0;
    for (size_t a = 0; a < d; ++a) {
      for (size_t b = 0; b < d; ++b) s_frob2 += s.at(a, b) * s.at(a, b);
    }
    for (size_t i = 0; i < n; ++i) {
      // ||x x^T - S||_F^2 = ||x||^4 - 2 x^T S x + ||S||_F^2
      const double* row = centered.data() + i * d;
      double norm2 = 0.0, xsx = 0.0;
      for (size_t a = 0; a < d; ++a) {
        norm2 += row[a] * row[a];
        double sx = 0.0;
        for (size_t b = 0; b < d; ++b) sx += s.at(a, b) * row[b];
        xsx += row[a] * sx;
      }
      b2 += norm2 * norm2 - 2.0 * xsx + s_frob2;
    }
    b2 /= static_cast<double>(n) * static_cast<double>(n) * static_cast<double>(d);
    b2 = std::min(b2, d2);
    gamma = d2 > 0.0 ? b2 / d2 : 1.0;
  }
  gamma = std::clamp(gamma, 0.0, 1.0);
  if (gamma_out) *gamma_out = gamma;

  const double m = s.trace() / static_cast<double>(d);
  linalg::SymmetricMatrix reg(d);
  for (size_t a = 0; a < d; ++a) {
    for (size_t b = a; b < d; ++b) {
      double v = (1.0 - gamma) * s.at(a, b);
      if (a == b) v += gamma * m + 1e-12 * (m > 0.0 ? m : 1.0);
      reg.set(a, b, v);
    }
  }

  std::vector<double> diff(d);
  for (size_t j = 0; j < d; ++j) diff[j] = mu1[j] - mu0[j];
  LinearScorer out;
  out.w = linalg::spd_solve(reg, diff);
  double mid = 0.0;
  for (size_t j = 0; j < d; ++j) mid += out.w[j] * 0.5 * (mu0[j] + mu1[j]);
  out.b = -mid;
  return out;
}

LinearScorer fit_swlda(const Tensor& x, const std::vector<int>& labels, double p_enter,
                       double p_remove, size_t max_terms) {
  require(x.rank() == 2 && x.dim(0) == labels.size(), Errc::shape_error, "bad feature matrix");
  check_two_classes(labels);
  const size_t n = x.dim(0), d = x.dim(1);
  require(n > 4, Errc::invalid_input, "too few samples for stepwise regression");

  // Work on centered labels; features are assumed standardized by the caller
  // so the intercept is just the label mean.
  const double y_mean =
      std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(n);
  std::vector<double> y(n);
  for (size_t i = 0; i < n; ++i) y[i] = static_cast<double>(labels[i]) - y_mean;

  std::vector<size_t> selected;
  std::vector<std::vector<double>> q_basis;  // orthonormal basis of selected columns
  std::vector<double> residual = y;
  double rss = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);

  auto orthogonalize = [&](std::vector<double> col) {
    for (const auto& q : q_basis) {
      const double proj = std::inner_product(col.begin(), col.end(), q.begin(), 0.0);
      for (size_t i = 0; i < n; ++i) col[i] -= proj * q[i];
    }
    return col;
  };

  auto rebuild = [&]() {
    q_basis.clear();
    residual = y;
    rss = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);
    for (size_t j : selected) {
      std::vector<double> q = orthogonalize(column(x, j));
      const double norm = std::sqrt(std::inner_product(q.begin(), q.end(), q.begin(), 0.0));
      for (double& v : q) v /= norm;
      const double coef = std::inner_product(residual.begin(), residual.end(), q.begin(), 0.0);
      for (size_t i = 0; i < n; ++i) residual[i] -= coef * q[i];
      rss -= coef * coef;
      q_basis.push_back(std::move(q));
    }
    if (rss < 0.0) rss = 0.0;
  };

  bool changed = true;
  while (changed && selected.size() < max_terms) {
    changed = false;

    // Forward step: most significant candidate below p_enter.
    double best_p = 1.0;
    size_t best_j = d;
    double best_reduction = 0.0;
    const double dof = static_cast<double>(n) - static_cast<double>(selected.size()) - 2.0;
    if (dof < 1.0) break;
    for (size_t j = 0; j < d; ++j) {
      if (std::find(selected.begin(), selected.end(), j) != selected.end()) continue;
      std::vector<double> col = column(x, j);
      const double raw_norm2 = std::inner_product(col.begin(), col.end(), col.begin(), 0.0);
      std::vector<double> q = orthogonalize(std::move(col));
      const double norm2 = std::inner_product(q.begin(), q.end(), q.begin(), 0.0);
      if (norm2 <= 1e-10 * std::max(raw_norm2, 1e-300)) continue;  // collinear with selection
      const double coef = std::inner_product(residual.begin(), residual.end(), q.begin(), 0.0);
      const double reduction = coef * coef / norm2;
      const double rss_new = std::max(rss - reduction, 1e-300);
      const double f = reduction / (rss_new / dof);
      const double p = stats::f_sf(f, 1.0, dof);
      if (p < best_p || (p == best_p && reduction > best_reduction)) {
        best_p = p;
        best_j = j;
        best_reduction = reduction;
      }
    }
    if (best_j < d && best_p < p_enter) {
      selected.push_back(best_j);
      rebuild();
      changed = true;
    }

    // Backward step: drop the least significant term above p_remove.
    bool removed = true;
    while (removed && !selected.empty()) {
      removed = false;
      const double dof_r =
          static_cast<double>(n) - static_cast<double>(selected.size()) - 1.0;
      if (dof_r < 1.0) break;
      double worst_p = 0.0;
      size_t worst_idx = selected.size();
      for (size_t k = 0; k < selected.size(); ++k) {
        std::vector<size_t> keep = selected;
        keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(k));
        // RSS without term k, via a fresh orthogonal sweep of the survivors.
        std::vector<double> r = y;
        std::vector<std::vector<double>> qs;
        double rss_without = rss;
        {
          rss_without = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);
          for (size_t j : keep) {
            std::vector<double> q = column(x, j);
            for (const auto& prev : qs) {
              const double proj = std::inner_product(q.begin(), q.end(), prev.begin(), 0.0);
              for (size_t i = 0; i < n; ++i) q[i] -= proj * prev[i];
            }
            const double norm =
                std::sqrt(std::inner_product(q.begin(), q.end(), q.begin(), 0.0));
            if (norm <= 1e-12) continue;
            for (double& v : q) v /= norm;
            const double coef = std::inner_product(r.begin(), r.end(), q.begin(), 0.0);
            for (size_t i = 0; i < n; ++i) r[i] -= coef * q[i];
            rss_without -= coef * coef;
            qs.push_back(std::move(q));
          }
          if (rss_without < 0.0) rss_without = 0.0;
        }
        const double f = (rss_without - rss) / (std::max(rss, 1e-300) / dof_r);
        const double p = stats::f_sf(std::max(f, 0.0), 1.0, dof_r);
        if (p > worst_p) {
          worst_p = p;
          worst_idx = k;
        }
      }
      if (worst_idx < selected.size() && worst_p > p_remove) {
        selected.erase(selected.begin() + static_cast<std::ptrdiff_t>(worst_idx));
        rebuild();
        removed = true;
        changed = true;
      }
    }
  }

  require(!selected.empty(), Errc::empty_model, "no feature passed the entry threshold");

  // Ordinary least squares on the selected set.
  const size_t k = selected.size();
  linalg::SymmetricMatrix gram(k);
  std::vector<double> xty(k, 0.0);
  for (size_t a = 0; a < k; ++a) {
    for (size_t b = a; b < k; ++b) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) acc += x.at(i, selected[a]) * x.at(i, selected[b]);
      gram.set(a, b, acc + (a == b ? 1e-10 : 0.0));
    }
    for (size_t i = 0; i < n; ++i) xty[a] += x.at(i, selected[a]) * y[i];
  }
  const std::vector<double> coef = linalg::spd_solve(gram, xty);
  LinearScorer out;
  out.w.assign(d, 0.0);
  for (size_t a = 0; a < k; ++a) out.w[selected[a]] = coef[a];
  out.b = y_mean;
  return out;
}

LinearScorer fit_blda(const Tensor& x, const std::vector<int>& labels, BldaTrace* trace) {
  require(x.rank() == 2 && x.dim(0) == labels.size(), Errc::shape_error, "bad feature matrix");
  check_two_classes(labels);
  const size_t n = x.dim(0), d = x.dim(1);
  const size_t da = d + 1;  // bias column of ones

  std::vector<double> y(n);
  for (size_t i = 0; i < n; ++i) y[i] = labels[i] ? 1.0 : -1.0;

  // Eigenbasis of the augmented Gram matrix makes each evidence iteration a
  // couple of vector sweeps.
  linalg::SymmetricMatrix gram(da);
  for (size_t a = 0; a < da; ++a) {
    for (size_t b = a; b < da; ++b) {
      double acc = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double xa = a < d ? x.at(i, a) : 1.0;
        const double xb = b < d ? x.at(i, b) : 1.0;
        acc += xa * xb;
      }
      gram.set(a, b, acc);
    }
  }
  const linalg::EigResult eig = linalg::sym_eig(gram);
  std::vector<double> xty(da, 0.0);
  for (size_t a = 0; a < da; ++a) {
    for (size_t i = 0; i < n; ++i) xty[a] += (a < d ? x.at(i, a) : 1.0) * y[i];
  }
  std::vector<double> z(da, 0.0);  // V^T X^T y
  for (size_t k = 0; k < da; ++k) {
    for (size_t a = 0; a < da; ++a) z[k] += eig.vectors.at(a, k) * xty[a];
  }
  const double yty = std::inner_product(y.begin(), y.end(), y.begin(), 0.0);

  double alpha = 1.0;
  double beta = 1.0;
  bool converged = false;
  std::vector<double> c(da);  // coefficients in the eigenbasis
  for (int iter = 0; iter < 500; ++iter) {
    double gamma_eff = 0.0, w_norm2 = 0.0, wt_xty = 0.0, wt_gram_w = 0.0;
    for (size_t k = 0; k < da; ++k) {
      const double lam = std::max(eig.values[k], 0.0);
      const double denom = beta * lam + alpha;
      c[k] = beta * z[k] / denom;
      gamma_eff += beta * lam / denom;
      w_norm2 += c[k] * c[k];
      wt_xty += c[k] * z[k];
      wt_gram_w += lam * c[k] * c[k];
    }
    const double rss = std::max(yty - 2.0 * wt_xty + wt_gram_w, 1e-300);
    const double alpha_new = gamma_eff / std::max(w_norm2, 1e-300);
    const double beta_new = (static_cast<double>(n) - gamma_eff) / rss;
    const double rel = std::fabs(alpha_new - alpha) / std::max(alpha, 1e-300) +
                       std::fabs(beta_new - beta) / std::max(beta, 1e-300);
    alpha = alpha_new;
    beta = beta_new;
    if (trace) {
      trace->alpha.push_back(alpha);
      trace->beta.push_back(beta);
    }
    if (rel < 1e-6) {
      converged = true;
      break;
    }
  }

  // Back to feature space.
  std::vector<double> w_aug(da, 0.0);
  for (size_t k = 0; k < da; ++k) {
    const double lam = std::max(eig.values[k], 0.0);
    const double ck = beta * z[k] / (beta * lam + alpha);
    for (size_t a = 0; a < da; ++a) w_aug[a] += eig.vectors.at(a, k) * ck;
  }
  LinearScorer out;
  out.w.assign(w_aug.begin(), w_aug.begin() + static_cast<std::ptrdiff_t>(d));
  out.b = w_aug[d];
  out.converged = converged;
  return out;
}

LinearScorer fit_elastic_net(const Tensor& x, const std::vector<int>& labels, double alpha,
                             double l1_ratio, double tol, size_t max_iter) {
  require(x.rank() == 2 && x.dim(0) == labels.size(), Errc::shape_error, "bad feature matrix");
  require(alpha >= 0.0 && l1_ratio >= 0.0 && l1_ratio <= 1.0, Errc::invalid_input,
          "bad elastic net hyperparameters");
  const size_t n = x.dim(0), d = x.dim(1);
  std::vector<double> y(n);
  for (size_t i = 0; i < n; ++i) y[i] = labels[i] ? 1.0 : -1.0;

  std::vector<double> col_ms(d, 0.0);  // (1/n) sum x_ij^2
  for (size_t i = 0; i < n; ++i) {
    const double* row = x.data() + i * d;
    for (size_t j = 0; j < d; ++j) col_ms[j] += row[j] * row[j];
  }
  for (double& v : col_ms) v /= static_cast<double>(n);

  LinearScorer out;
  out.w.assign(d, 0.0);
  out.b = stats::mean(y);
  std::vector<double> r(n);  // residual y - b - Xw
  for (size_t i = 0; i < n; ++i) r[i] = y[i] - out.b;

  const double l1 = alpha * l1_ratio;
  const double l2 = alpha * (1.0 - l1_ratio);
  for (size_t iter = 0; iter < max_iter; ++iter) {
    double max_delta = 0.0;
    for (size_t j = 0; j < d; ++j) {
      if (col_ms[j] == 0.0) continue;
      double rho = 0.0;
      for (size_t i = 0; i < n; ++i) rho += x.at(i, j) * r[i];
      rho = rho / static_cast<double>(n) + col_ms[j] * out.w[j];
      double w_new = 0.0;
      if (rho > l1) {
        w_new = (rho - l1) / (col_ms[j] + l2);
      } else if (rho < -l1) {
        w_new = (rho + l1) / (col_ms[j] + l2);
      }
      const double delta = w_new - out.w[j];
      if (delta != 0.0) {
        for (size_t i = 0; i < n; ++i) r[i] -= delta * x.at(i, j);
        out.w[j] = w_new;
        max_delta = std::max(max_delta, std::fabs(delta));
      }
    }
    // Unpenalized intercept.
    double b_shift = 0.0;
    for (double v : r) b_shift += v;
    b_shift /= static_cast<double>(n);
    if (b_shift != 0.0) {
      out.b += b_shift;
      for (double& v : r) v -= b_shift;
      max_delta = std::max(max_delta, std::fabs(b_shift));
    }
    if (max_delta < tol) break;
  }
  return out;
}

LinearScorer fit_linear_svm(const Tensor& x, const std::vector<int>& labels, double c,
                            size_t epochs) {
  require(x.rank() == 2 && x.dim(0) == labels.size(), Errc::shape_error, "bad feature matrix");
  require(c > 0.0, Errc::invalid_input, "C must be positive");
  const size_t n = x.dim(0), d = x.dim(1);
  std::vector<double> y(n);
  for (size_t i = 0; i < n; ++i) y[i] = labels[i] ? 1.0 : -1.0;

  const double lambda = 1.0 / (c * static_cast<double>(n));
  LinearScorer out;
  out.w.assign(d, 0.0);
  out.b = 0.0;
  std::vector<double> gw(d);
  for (size_t t = 1; t <= epochs; ++t) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double* row = x.data() + i * d;
      if (y[i] * (out.score(row)) < 1.0) {
        for (size_t j = 0; j < d; ++j) gw[j] -= y[i] * row[j];
        gb -= y[i];
      }
    }
    const double eta = 1.0 / (lambda * static_cast<double>(t + 1));
    const double inv_n = 1.0 / static_cast<double>(n);
    for (size_t j = 0; j < d; ++j) out.w[j] -= eta * (lambda * out.w[j] + gw[j] * inv_n);
    out.b -= eta * gb * inv_n;
  }
  return out;
}

}  // namespace erpdeck::classical
