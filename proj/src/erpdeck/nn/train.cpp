#include "erpdeck/nn/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "erpdeck/error.hpp"
#include "erpdeck/rng.hpp"

namespace erpdeck::nn {

namespace {
constexpr double kScoreClamp = 1e-12;

double clamp_score(double s) {
  return std::min(1.0 - kScoreClamp, std::max(kScoreClamp, s));
}
}  // namespace

void TrainConfig::validate() const {
  require(lr > 0.0 && weight_decay >= 0.0 && eps > 0.0, Errc::invalid_input,
          "optimizer settings must be positive");
  require(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0, Errc::invalid_input,
          "betas must lie in (0, 1)");
  require(batch >= 1, Errc::invalid_input, "batch size must be >= 1");
}

void AdamW::step(const std::vector<Param*>& params) {
  if (m_.empty()) {
    for (const Param* p : params) {
      m_.emplace_back(p->value.shape(), 0.0);
      v_.emplace_back(p->value.shape(), 0.0);
    }
  }
  require(m_.size() == params.size(), Errc::invalid_input, "optimizer/param set mismatch");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t k = 0; k < params.size(); ++k) {
    Param& p = *params[k];
    double* w = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[k].data();
    double* v = v_[k].data();
    for (size_t i = 0; i < p.value.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.lr * cfg_.weight_decay * w[i];
    }
  }
}

double bce_loss(const std::vector<double>& scores, const std::vector<int>& labels) {
  require(scores.size() == labels.size() && !scores.empty(), Errc::shape_error,
          "scores/labels mismatch");
  double loss = 0.0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const double s = clamp_score(scores[i]);
    loss += labels[i] ? -std::log(s) : -std::log(1.0 - s);
  }
  return loss / static_cast<double>(scores.size());
}

std::vector<double> bce_grad(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<double> g(scores.size());
  const double inv_n = 1.0 / static_cast<double>(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    const double s = clamp_score(scores[i]);
    g[i] = (labels[i] ? -1.0 / s : 1.0 / (1.0 - s)) * inv_n;
  }
  return g;
}

TrainResult train(ModelGraph& g, const Tensor& x, const std::vector<int>& labels,
                  const TrainConfig& cfg, uint64_t seed) {
  cfg.validate();
  require(x.rank() == 4 && x.dim(0) == labels.size(), Errc::shape_error,
          "x must be (N, C, H, W) matching labels");
  const size_t n = x.dim(0);
  const size_t c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const size_t row = c * h * w;

  g.reseed_dropout(derive_seed(seed, "dropout"));
  Rng shuffle_rng(derive_seed(seed, "shuffle"));
  AdamW opt(cfg);
  const std::vector<Param*> params = g.all_params();

  TrainResult result;
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});

  for (size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t batches = 0;
    for (size_t start = 0; start < n; start += cfg.batch) {
      const size_t bsz = std::min(cfg.batch, n - start);
      Tensor xb({bsz, c, h, w});
      std::vector<int> yb(bsz);
      for (size_t i = 0; i < bsz; ++i) {
        const size_t src = order[start + i];
        std::copy(x.data() + src * row, x.data() + (src + 1) * row, xb.data() + i * row);
        yb[i] = labels[src];
      }
      const std::vector<double> scores = g.forward(xb, true);
      const double loss = bce_loss(scores, yb);
      require(std::isfinite(loss), Errc::numerical_error, "training loss diverged");
      epoch_loss += loss;
      ++batches;
      g.zero_grad();
      g.backward(bce_grad(scores, yb), true);
      opt.step(params);
      g.apply_constraints();
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(batches ? batches : 1));
  }
  return result;
}

std::vector<double> predict(ModelGraph& g, const Tensor& x) { return g.forward(x, false); }

}  // namespace erpdeck::nn
