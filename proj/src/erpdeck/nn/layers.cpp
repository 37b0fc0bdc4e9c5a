#include "erpdeck/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "erpdeck/parallel.hpp"

namespace erpdeck::nn {

namespace {

size_t conv_out_dim(size_t padded, size_t k, size_t stride, size_t dil) {
  const size_t eff = (k - 1) * dil + 1;
  require(padded >= eff, Errc::shape_error, "kernel larger than (padded) input");
  return (padded - eff) / stride + 1;
}

PadSpec same_pad(size_t kh, size_t kw, size_t dh, size_t dw) {
  const size_t th = (kh - 1) * dh;
  const size_t tw = (kw - 1) * dw;
  return {th / 2, th - th / 2, tw / 2, tw - tw / 2};
}

// Copies (N, C, H, W) into a zero-padded (N, C, H+pt+pb, W+pl+pr) buffer,
// reusing out's allocation when shapes repeat.
void pad_batch(const Tensor& x, const PadSpec& p, Tensor& out) {
  const size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const size_t hp = h + p.top + p.bottom, wp = w + p.left + p.right;
  out.ensure({n, c, hp, wp});
  out.fill(0.0);
  for (size_t i = 0; i < n * c; ++i) {
    const double* src = x.data() + i * h * w;
    double* dst = out.data() + i * hp * wp + p.top * wp + p.left;
    for (size_t r = 0; r < h; ++r) {
      std::copy(src + r * w, src + (r + 1) * w, dst + r * wp);
    }
  }
}

// Register-blocked row kernels for the stride-1 convolution paths. Keeping a
// block of output accumulators live across all kernel taps trades one
// load/store pair per tap for one per block, which the store port otherwise
// bottlenecks.
constexpr size_t kRowBlock = 16;

// out[0..n) += sum_k w[k] * in[i + k*dil]
inline void row_taps_acc(double* out, const double* in, const double* w, size_t k, size_t dil,
                         size_t n) {
  size_t i = 0;
  for (; i + kRowBlock <= n; i += kRowBlock) {
    double acc[kRowBlock];
    for (size_t b = 0; b < kRowBlock; ++b) acc[b] = out[i + b];
    for (size_t kk = 0; kk < k; ++kk) {
      const double wv = w[kk];
      const double* ip = in + i + kk * dil;
      for (size_t b = 0; b < kRowBlock; ++b) acc[b] += wv * ip[b];
    }
    for (size_t b = 0; b < kRowBlock; ++b) out[i + b] = acc[b];
  }
  for (; i < n; ++i) {
    double a = out[i];
    for (size_t kk = 0; kk < k; ++kk) a += w[kk] * in[i + kk * dil];
    out[i] = a;
  }
}

// dw[0..k) += sum_i g[i] * in[i + kk*dil], blocked over taps. The tap
// stride `tap` lets column kernels treat rows as taps.
template <size_t TB>
inline void row_taps_grad_block(double* dw, const double* g, const double* in, size_t dil,
                                size_t tap, size_t n) {
  double acc[TB] = {};
  for (size_t i = 0; i < n; ++i) {
    const double gv = g[i];
    const double* ip = in + i;
    for (size_t b = 0; b < TB; ++b) acc[b] += gv * ip[b * tap];
  }
  for (size_t b = 0; b < TB; ++b) dw[b] += acc[b];
  (void)dil;
}

inline void row_taps_grad(double* dw, const double* g, const double* in, size_t k, size_t tap,
                          size_t n) {
  size_t kk = 0;
  for (; kk + 8 <= k; kk += 8) row_taps_grad_block<8>(dw + kk, g, in + kk * tap, tap, tap, n);
  for (; kk + 4 <= k; kk += 4) row_taps_grad_block<4>(dw + kk, g, in + kk * tap, tap, tap, n);
  for (; kk + 2 <= k; kk += 2) row_taps_grad_block<2>(dw + kk, g, in + kk * tap, tap, tap, n);
  for (; kk < k; ++kk) {
    double acc = 0.0;
    const double* ip = in + kk * tap;
    for (size_t i = 0; i < n; ++i) acc += g[i] * ip[i];
    dw[kk] += acc;
  }
}

// One output plane of a valid convolution over a (multi-channel) input
// plane stack. All ci*kh*kw taps accumulate in registers before each store;
// block widths cascade so short rows stay vectorized.
template <size_t B>
inline void conv_taps_block(const double* in, const double* kernel, double* out, double bias,
                            size_t ci_n, size_t hp, size_t wp, size_t kh, size_t kw, size_t sh,
                            size_t dh, size_t dw, size_t h, size_t w0) {
  double acc[B];
  for (size_t b = 0; b < B; ++b) acc[b] = bias;
  const double* wk = kernel;
  for (size_t ci = 0; ci < ci_n; ++ci) {
    const double* iplane = in + ci * hp * wp;
    for (size_t r = 0; r < kh; ++r) {
      const double* irow = iplane + (h * sh + r * dh) * wp + w0;
      for (size_t c = 0; c < kw; ++c) {
        const double wv = *wk++;
        const double* ip = irow + c * dw;
        for (size_t b = 0; b < B; ++b) acc[b] += wv * ip[b];
      }
    }
  }
  for (size_t b = 0; b < B; ++b) out[w0 + b] = acc[b];
}

void conv_plane_valid(const double* in, const double* kernel, double* out, double bias,
                      size_t ci_n, size_t hp, size_t wp, size_t kh, size_t kw, size_t sh,
                      size_t sw, size_t dh, size_t dw, size_t ho, size_t wo) {
  if (sw == 1) {
    for (size_t h = 0; h < ho; ++h) {
      double* orow = out + h * wo;
      size_t w0 = 0;
      for (; w0 + 16 <= wo; w0 += 16)
        conv_taps_block<16>(in, kernel, orow, bias, ci_n, hp, wp, kh, kw, sh, dh, dw, h, w0);
      for (; w0 + 8 <= wo; w0 += 8)
        conv_taps_block<8>(in, kernel, orow, bias, ci_n, hp, wp, kh, kw, sh, dh, dw, h, w0);
      for (; w0 + 4 <= wo; w0 += 4)
        conv_taps_block<4>(in, kernel, orow, bias, ci_n, hp, wp, kh, kw, sh, dh, dw, h, w0);
      for (; w0 < wo; ++w0)
        conv_taps_block<1>(in, kernel, orow, bias, ci_n, hp, wp, kh, kw, sh, dh, dw, h, w0);
    }
    return;
  }
  for (size_t h = 0; h < ho; ++h) {
    double* orow = out + h * wo;
    for (size_t w0 = 0; w0 < wo; ++w0) {
      double acc = bias;
      const double* wk = kernel;
      for (size_t ci = 0; ci < ci_n; ++ci) {
        const double* iplane = in + ci * hp * wp;
        for (size_t r = 0; r < kh; ++r) {
          const double* irow = iplane + (h * sh + r * dh) * wp + w0 * sw;
          for (size_t c = 0; c < kw; ++c) acc += *wk++ * irow[c * dw];
        }
      }
      orow[w0] = acc;
    }
  }
}

Param make_weight(std::string name, std::vector<size_t> shape, size_t fan_in, size_t fan_out,
                  double max_norm, size_t norm_group) {
  Param p;
  p.name = std::move(name);
  p.value = Tensor(shape, 0.0);
  p.grad = Tensor(shape, 0.0);
  p.max_norm = max_norm;
  p.norm_group = norm_group;
  p.trainable = true;
  p.fan_in = fan_in;
  p.fan_out = fan_out;
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, size_t in_ch, size_t out_ch, size_t kh, size_t kw, PadMode pad,
               bool bias, double max_norm, size_t stride_h, size_t stride_w, size_t dil_h,
               size_t dil_w, PadSpec explicit_pad)
    : Layer(std::move(name)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kh_(kh),
      kw_(kw),
      sh_(stride_h),
      sw_(stride_w),
      dh_(dil_h),
      dw_(dil_w),
      pad_mode_(pad),
      explicit_pad_(explicit_pad),
      has_bias_(bias) {
  Param w = make_weight("kernel", {out_ch, in_ch, kh, kw}, in_ch * kh * kw, out_ch * kh * kw,
                        max_norm, in_ch * kh * kw);
  params_.push_back(std::move(w));
  if (bias) params_.push_back(make_weight("bias", {out_ch}, 0, 0, 0.0, 0));
}

PadSpec Conv2d::pad_for(const Shape&) const {
  if (pad_mode_ == PadMode::same) return same_pad(kh_, kw_, dh_, dw_);
  if (pad_mode_ == PadMode::explicit_pad) return explicit_pad_;
  return {};
}

Shape Conv2d::output_shape(const std::vector<Shape>& in) const {
  const Shape& s = in.at(0);
  require(s.at(0) == in_ch_, Errc::shape_error, name_ + ": channel mismatch");
  const PadSpec p = pad_for(s);
  return {out_ch_, conv_out_dim(s[1] + p.top + p.bottom, kh_, sh_, dh_),
          conv_out_dim(s[2] + p.left + p.right, kw_, sw_, dw_)};
}

uint64_t Conv2d::analytic_macs(const std::vector<Shape>& in) const {
  const Shape o = output_shape(in);
  return static_cast<uint64_t>(o[0]) * o[1] * o[2] * in_ch_ * kh_ * kw_;
}

void Conv2d::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*,
                     MacCounter* mac) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0);
  const PadSpec p = pad_for({x.dim(1), x.dim(2), x.dim(3)});
  const Tensor* src = &x;
  if (p.any()) {
    pad_batch(x, p, padded_);
    src = &padded_;
  } else {
    padded_ = Tensor();  // backward reads the node input directly
  }
  const size_t hp = src->dim(2), wp = src->dim(3);
  const size_t ho = conv_out_dim(hp, kh_, sh_, dh_);
  const size_t wo = conv_out_dim(wp, kw_, sw_, dw_);
  out.ensure({n, out_ch_, ho, wo});

  const double* kernel = params_[0].value.data();
  const double* bias = has_bias_ ? params_[1].value.data() : nullptr;
  const Tensor& sp = *src;

  auto run = [&](int64_t idx) {
    const size_t nn = static_cast<size_t>(idx) / out_ch_;
    const size_t co = static_cast<size_t>(idx) % out_ch_;
    conv_plane_valid(sp.data() + nn * in_ch_ * hp * wp, kernel + co * in_ch_ * kh_ * kw_,
                     out.data() + (nn * out_ch_ + co) * ho * wo, bias ? bias[co] : 0.0, in_ch_,
                     hp, wp, kh_, kw_, sh_, sw_, dh_, dw_, ho, wo);
    if (mac) mac->macs += static_cast<uint64_t>(in_ch_) * kh_ * kw_ * ho * wo;
  };

  if (mac) {
    for (int64_t i = 0; i < static_cast<int64_t>(n * out_ch_); ++i) run(i);
  } else {
    ThreadPool::global().for_each(static_cast<int64_t>(n * out_ch_), run);
  }
}

void Conv2d::backward(const std::vector<const Tensor*>& in, const Tensor&, const Tensor& grad_out,
                      const std::vector<Tensor*>& grad_in, bool) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0);
  const PadSpec p = pad_for({x.dim(1), x.dim(2), x.dim(3)});
  const Tensor& sp = p.any() ? padded_ : x;
  const size_t hp = sp.dim(2), wp = sp.dim(3);
  const size_t ho = grad_out.dim(2), wo = grad_out.dim(3);

  const double* kernel = params_[0].value.data();
  double* dkernel = params_[0].grad.data();
  double* dbias = has_bias_ ? params_[1].grad.data() : nullptr;

  // Parameter gradients: each output channel owns its kernel slice.
  ThreadPool::global().for_each(static_cast<int64_t>(out_ch_), [&](int64_t co64) {
    const size_t co = static_cast<size_t>(co64);
    for (size_t nn = 0; nn < n; ++nn) {
      const double* gplane = grad_out.data() + (nn * out_ch_ + co) * ho * wo;
      if (dbias) {
        double s = 0.0;
        for (size_t i = 0; i < ho * wo; ++i) s += gplane[i];
        dbias[co] += s;
      }
      for (size_t ci = 0; ci < in_ch_; ++ci) {
        const double* iplane = sp.data() + (nn * in_ch_ + ci) * hp * wp;
        double* dwrow_base = dkernel + (co * in_ch_ + ci) * kh_ * kw_;
        if (sw_ == 1 && kw_ == 1) {
          // Column kernel: the kh taps stride whole rows.
          for (size_t h = 0; h < ho; ++h) {
            row_taps_grad(dwrow_base, gplane + h * wo, iplane + h * sh_ * wp, kh_, dh_ * wp, wo);
          }
          continue;
        }
        for (size_t kh = 0; kh < kh_; ++kh) {
          if (sw_ == 1) {
            for (size_t h = 0; h < ho; ++h) {
              row_taps_grad(dwrow_base + kh * kw_, gplane + h * wo,
                            iplane + (h * sh_ + kh * dh_) * wp, kw_, dw_, wo);
            }
          } else {
            for (size_t kw = 0; kw < kw_; ++kw) {
              double acc = 0.0;
              for (size_t h = 0; h < ho; ++h) {
                const double* irow = iplane + (h * sh_ + kh * dh_) * wp + kw * dw_;
                const double* grow = gplane + h * wo;
                for (size_t w2 = 0; w2 < wo; ++w2) acc += grow[w2] * irow[w2 * sw_];
              }
              dwrow_base[kh * kw_ + kw] += acc;
            }
          }
        }
      }
    }
  });

  // Input gradient. With unit stride it is itself a valid convolution: pad
  // grad_out by (k-1)*dil on each border and convolve with the
  // channel-transposed, tap-reversed kernel.
  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  if (sh_ == 1 && sw_ == 1) {
    const size_t gh = (kh_ - 1) * dh_, gw = (kw_ - 1) * dw_;
    const size_t hg = ho + 2 * gh, wg = wo + 2 * gw;
    gpadded_.ensure({n, out_ch_, hg, wg});
    gpadded_.fill(0.0);
    for (size_t i = 0; i < n * out_ch_; ++i) {
      const double* src2 = grad_out.data() + i * ho * wo;
      double* dst2 = gpadded_.data() + i * hg * wg + gh * wg + gw;
      for (size_t r = 0; r < ho; ++r) {
        std::copy(src2 + r * wo, src2 + (r + 1) * wo, dst2 + r * wg);
      }
    }
    // kernel_flip[ci][co][r][c] = kernel[co][ci][kh-1-r][kw-1-c]
    std::vector<double> kflip(in_ch_ * out_ch_ * kh_ * kw_);
    for (size_t co = 0; co < out_ch_; ++co) {
      for (size_t ci = 0; ci < in_ch_; ++ci) {
        for (size_t r = 0; r < kh_; ++r) {
          for (size_t c = 0; c < kw_; ++c) {
            kflip[((ci * out_ch_ + co) * kh_ + (kh_ - 1 - r)) * kw_ + (kw_ - 1 - c)] =
                kernel[((co * in_ch_ + ci) * kh_ + r) * kw_ + c];
          }
        }
      }
    }
    dpad_.ensure({n, in_ch_, hp, wp});
    ThreadPool::global().for_each(static_cast<int64_t>(n * in_ch_), [&](int64_t idx) {
      const size_t nn = static_cast<size_t>(idx) / in_ch_;
      const size_t ci = static_cast<size_t>(idx) % in_ch_;
      conv_plane_valid(gpadded_.data() + nn * out_ch_ * hg * wg,
                       kflip.data() + ci * out_ch_ * kh_ * kw_,
                       dpad_.data() + (nn * in_ch_ + ci) * hp * wp, 0.0, out_ch_, hg, wg, kh_,
                       kw_, 1, 1, dh_, dw_, hp, wp);
    });
    const size_t h = x.dim(2), w = x.dim(3);
    for (size_t i = 0; i < n * in_ch_; ++i) {
      const double* src2 = dpad_.data() + i * hp * wp + p.top * wp + p.left;
      double* out2 = gi->data() + i * h * w;
      for (size_t r = 0; r < h; ++r) {
        for (size_t c = 0; c < w; ++c) out2[r * w + c] += src2[r * wp + c];
      }
    }
  } else {
    Tensor* dst = gi;
    if (p.any()) {
      dpad_.ensure({n, in_ch_, hp, wp});
      dpad_.fill(0.0);
      dst = &dpad_;
    }
    ThreadPool::global().for_each(static_cast<int64_t>(n * in_ch_), [&](int64_t idx) {
      const size_t nn = static_cast<size_t>(idx) / in_ch_;
      const size_t ci = static_cast<size_t>(idx) % in_ch_;
      double* dplane = dst->data() + (nn * in_ch_ + ci) * hp * wp;
      for (size_t co = 0; co < out_ch_; ++co) {
        const double* gplane = grad_out.data() + (nn * out_ch_ + co) * ho * wo;
        for (size_t kh = 0; kh < kh_; ++kh) {
          for (size_t kw = 0; kw < kw_; ++kw) {
            const double w = kernel[((co * in_ch_ + ci) * kh_ + kh) * kw_ + kw];
            for (size_t h = 0; h < ho; ++h) {
              double* drow = dplane + (h * sh_ + kh * dh_) * wp + kw * dw_;
              const double* grow = gplane + h * wo;
              for (size_t w2 = 0; w2 < wo; ++w2) drow[w2 * sw_] += w * grow[w2];
            }
          }
        }
      }
    });
    if (p.any()) {
      const size_t h = x.dim(2), w = x.dim(3);
      for (size_t i = 0; i < n * in_ch_; ++i) {
        const double* src2 = dpad_.data() + i * hp * wp + p.top * wp + p.left;
        double* out2 = gi->data() + i * h * w;
        for (size_t r = 0; r < h; ++r) {
          for (size_t c = 0; c < w; ++c) out2[r * w + c] += src2[r * wp + c];
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// DepthwiseConv2d (valid padding, stride 1)

DepthwiseConv2d::DepthwiseConv2d(std::string name, size_t in_ch, size_t mult, size_t kh, size_t kw,
                                 bool bias, double max_norm)
    : Layer(std::move(name)), in_ch_(in_ch), mult_(mult), kh_(kh), kw_(kw), has_bias_(bias) {
  params_.push_back(
      make_weight("kernel", {in_ch, mult, kh, kw}, kh * kw, mult * kh * kw, max_norm, kh * kw));
  if (bias) params_.push_back(make_weight("bias", {in_ch * mult}, 0, 0, 0.0, 0));
}

Shape DepthwiseConv2d::output_shape(const std::vector<Shape>& in) const {
  const Shape& s = in.at(0);
  require(s.at(0) == in_ch_, Errc::shape_error, name_ + ": channel mismatch");
  return {in_ch_ * mult_, conv_out_dim(s[1], kh_, 1, 1), conv_out_dim(s[2], kw_, 1, 1)};
}

uint64_t DepthwiseConv2d::analytic_macs(const std::vector<Shape>& in) const {
  const Shape o = output_shape(in);
  return static_cast<uint64_t>(o[0]) * o[1] * o[2] * kh_ * kw_;
}

void DepthwiseConv2d::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*,
                              MacCounter* mac) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const size_t ho = conv_out_dim(h, kh_, 1, 1), wo = conv_out_dim(w, kw_, 1, 1);
  out.ensure({n, in_ch_ * mult_, ho, wo});
  const double* kernel = params_[0].value.data();
  const double* bias = has_bias_ ? params_[1].value.data() : nullptr;

  auto run = [&](int64_t idx) {
    const size_t nn = static_cast<size_t>(idx) / (in_ch_ * mult_);
    const size_t co = static_cast<size_t>(idx) % (in_ch_ * mult_);
    const size_t ci = co / mult_, m = co % mult_;
    const double* iplane = x.data() + (nn * in_ch_ + ci) * h * w;
    double* oplane = out.data() + (nn * in_ch_ * mult_ + co) * ho * wo;
    std::fill(oplane, oplane + ho * wo, bias ? bias[co] : 0.0);
    uint64_t local = 0;
    for (size_t kh = 0; kh < kh_; ++kh) {
      for (size_t kw = 0; kw < kw_; ++kw) {
        const double wv = kernel[((ci * mult_ + m) * kh_ + kh) * kw_ + kw];
        for (size_t r = 0; r < ho; ++r) {
          const double* irow = iplane + (r + kh) * w + kw;
          double* orow = oplane + r * wo;
          for (size_t c = 0; c < wo; ++c) orow[c] += wv * irow[c];
          local += wo;
        }
      }
    }
    if (mac) mac->macs += local;
  };
  if (mac) {
    for (int64_t i = 0; i < static_cast<int64_t>(n * in_ch_ * mult_); ++i) run(i);
  } else {
    ThreadPool::global().for_each(static_cast<int64_t>(n * in_ch_ * mult_), run);
  }
}

void DepthwiseConv2d::backward(const std::vector<const Tensor*>& in, const Tensor&,
                               const Tensor& grad_out, const std::vector<Tensor*>& grad_in,
                               bool) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0), h = x.dim(2), w = x.dim(3);
  const size_t ho = grad_out.dim(2), wo = grad_out.dim(3);
  const double* kernel = params_[0].value.data();
  double* dkernel = params_[0].grad.data();
  double* dbias = has_bias_ ? params_[1].grad.data() : nullptr;

  ThreadPool::global().for_each(static_cast<int64_t>(in_ch_ * mult_), [&](int64_t co64) {
    const size_t co = static_cast<size_t>(co64);
    const size_t ci = co / mult_, m = co % mult_;
    for (size_t nn = 0; nn < n; ++nn) {
      const double* gplane = grad_out.data() + (nn * in_ch_ * mult_ + co) * ho * wo;
      const double* iplane = x.data() + (nn * in_ch_ + ci) * h * w;
      if (dbias) {
        double s = 0.0;
        for (size_t i = 0; i < ho * wo; ++i) s += gplane[i];
        dbias[co] += s;
      }
      for (size_t kh = 0; kh < kh_; ++kh) {
        for (size_t kw = 0; kw < kw_; ++kw) {
          double acc = 0.0;
          for (size_t r = 0; r < ho; ++r) {
            const double* irow = iplane + (r + kh) * w + kw;
            const double* grow = gplane + r * wo;
            for (size_t c = 0; c < wo; ++c) acc += grow[c] * irow[c];
          }
          dkernel[((ci * mult_ + m) * kh_ + kh) * kw_ + kw] += acc;
        }
      }
    }
  });

  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  ThreadPool::global().for_each(static_cast<int64_t>(n * in_ch_), [&](int64_t idx) {
    const size_t nn = static_cast<size_t>(idx) / in_ch_;
    const size_t ci = static_cast<size_t>(idx) % in_ch_;
    double* dplane = gi->data() + (nn * in_ch_ + ci) * h * w;
    for (size_t m = 0; m < mult_; ++m) {
      const size_t co = ci * mult_ + m;
      const double* gplane = grad_out.data() + (nn * in_ch_ * mult_ + co) * ho * wo;
      for (size_t kh = 0; kh < kh_; ++kh) {
        for (size_t kw = 0; kw < kw_; ++kw) {
          const double wv = kernel[((ci * mult_ + m) * kh_ + kh) * kw_ + kw];
          for (size_t r = 0; r < ho; ++r) {
            double* drow = dplane + (r + kh) * w + kw;
            const double* grow = gplane + r * wo;
            for (size_t c = 0; c < wo; ++c) drow[c] += wv * grow[c];
          }
        }
      }
    }
  });
}

// ---------------------------------------------------------------------------
// SeparableConv2d

SeparableConv2d::SeparableConv2d(std::string name, size_t in_ch, size_t out_ch, size_t kh,
                                 size_t kw, PadMode pad, bool bias, size_t stride_h,
                                 size_t stride_w)
    : Layer(std::move(name)),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kh_(kh),
      kw_(kw),
      sh_(stride_h),
      sw_(stride_w),
      pad_mode_(pad),
      has_bias_(bias) {
  params_.push_back(make_weight("depthwise", {in_ch, kh, kw}, kh * kw, kh * kw, 0.0, 0));
  params_.push_back(make_weight("pointwise", {out_ch, in_ch}, in_ch, out_ch, 0.0, 0));
  if (bias) params_.push_back(make_weight("bias", {out_ch}, 0, 0, 0.0, 0));
}

PadSpec SeparableConv2d::pad_for(const Shape&) const {
  if (pad_mode_ == PadMode::same) return same_pad(kh_, kw_, 1, 1);
  return {};
}

Shape SeparableConv2d::output_shape(const std::vector<Shape>& in) const {
  const Shape& s = in.at(0);
  require(s.at(0) == in_ch_, Errc::shape_error, name_ + ": channel mismatch");
  const PadSpec p = pad_for(s);
  return {out_ch_, conv_out_dim(s[1] + p.top + p.bottom, kh_, sh_, 1),
          conv_out_dim(s[2] + p.left + p.right, kw_, sw_, 1)};
}

uint64_t SeparableConv2d::analytic_macs(const std::vector<Shape>& in) const {
  const Shape o = output_shape(in);
  const uint64_t spatial = static_cast<uint64_t>(o[1]) * o[2];
  return spatial * in_ch_ * kh_ * kw_ + spatial * out_ch_ * in_ch_;
}

void SeparableConv2d::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*,
                              MacCounter* mac) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0);
  const PadSpec p = pad_for({x.dim(1), x.dim(2), x.dim(3)});
  const Tensor* src = &x;
  if (p.any()) {
    pad_batch(x, p, padded_);
    src = &padded_;
  } else {
    padded_ = Tensor();
  }
  const size_t hp = src->dim(2), wp = src->dim(3);
  const size_t ho = conv_out_dim(hp, kh_, sh_, 1), wo = conv_out_dim(wp, kw_, sw_, 1);
  mid_.ensure({n, in_ch_, ho, wo});
  out.ensure({n, out_ch_, ho, wo});
  const double* dw = params_[0].value.data();
  const double* pw = params_[1].value.data();
  const double* bias = has_bias_ ? params_[2].value.data() : nullptr;
  const Tensor& sp = *src;

  auto run_dw = [&](int64_t idx) {
    const size_t nn = static_cast<size_t>(idx) / in_ch_;
    const size_t ci = static_cast<size_t>(idx) % in_ch_;
    const double* iplane = sp.data() + (nn * in_ch_ + ci) * hp * wp;
    double* mplane = mid_.data() + (nn * in_ch_ + ci) * ho * wo;
    std::fill(mplane, mplane + ho * wo, 0.0);
    uint64_t local = 0;
    for (size_t kh = 0; kh < kh_; ++kh) {
      for (size_t kw = 0; kw < kw_; ++kw) {
        const double wv = dw[(ci * kh_ + kh) * kw_ + kw];
        for (size_t r = 0; r < ho; ++r) {
          const double* irow = iplane + (r * sh_ + kh) * wp + kw;
          double* mrow = mplane + r * wo;
          if (sw_ == 1) {
            for (size_t c = 0; c < wo; ++c) mrow[c] += wv * irow[c];
          } else {
            for (size_t c = 0; c < wo; ++c) mrow[c] += wv * irow[c * sw_];
          }
          local += wo;
        }
      }
    }
    if (mac) mac->macs += local;
  };
  auto run_pw = [&](int64_t idx) {
    const size_t nn = static_cast<size_t>(idx) / out_ch_;
    const size_t co = static_cast<size_t>(idx) % out_ch_;
    double* oplane = out.data() + (nn * out_ch_ + co) * ho * wo;
    std::fill(oplane, oplane + ho * wo, bias ? bias[co] : 0.0);
    uint64_t local = 0;
    for (size_t ci = 0; ci < in_ch_; ++ci) {
      const double wv = pw[co * in_ch_ + ci];
      const double* mplane = mid_.data() + (nn * in_ch_ + ci) * ho * wo;
      for (size_t i = 0; i < ho * wo; ++i) oplane[i] += wv * mplane[i];
      local += ho * wo;
    }
    if (mac) mac->macs += local;
  };
  if (mac) {
    for (int64_t i = 0; i < static_cast<int64_t>(n * in_ch_); ++i) run_dw(i);
    for (int64_t i = 0; i < static_cast<int64_t>(n * out_ch_); ++i) run_pw(i);
  } else {
    ThreadPool::global().for_each(static_cast<int64_t>(n * in_ch_), run_dw);
    ThreadPool::global().for_each(static_cast<int64_t>(n * out_ch_), run_pw);
  }
}

void SeparableConv2d::backward(const std::vector<const Tensor*>& in, const Tensor&,
                               const Tensor& grad_out, const std::vector<Tensor*>& grad_in,
                               bool) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0);
  const PadSpec p = pad_for({x.dim(1), x.dim(2), x.dim(3)});
  const Tensor& sp = p.any() ? padded_ : x;
  const size_t hp = sp.dim(2), wp = sp.dim(3);
  const size_t ho = grad_out.dim(2), wo = grad_out.dim(3);
  const double* dw = params_[0].value.data();
  const double* pw = params_[1].value.data();
  double* g_dw = params_[0].grad.data();
  double* g_pw = params_[1].grad.data();
  double* g_bias = has_bias_ ? params_[2].grad.data() : nullptr;

  // Pointwise stage gradients and the mid-stage gradient.
  dmid_.ensure({n, in_ch_, ho, wo});
  dmid_.fill(0.0);
  Tensor& dmid = dmid_;
  ThreadPool::global().for_each(static_cast<int64_t>(out_ch_), [&](int64_t co64) {
    const size_t co = static_cast<size_t>(co64);
    for (size_t nn = 0; nn < n; ++nn) {
      const double* gplane = grad_out.data() + (nn * out_ch_ + co) * ho * wo;
      if (g_bias) {
        double s = 0.0;
        for (size_t i = 0; i < ho * wo; ++i) s += gplane[i];
        g_bias[co] += s;
      }
      for (size_t ci = 0; ci < in_ch_; ++ci) {
        const double* mplane = mid_.data() + (nn * in_ch_ + ci) * ho * wo;
        double acc = 0.0;
        for (size_t i = 0; i < ho * wo; ++i) acc += gplane[i] * mplane[i];
        g_pw[co * in_ch_ + ci] += acc;
      }
    }
  });
  ThreadPool::global().for_each(static_cast<int64_t>(n * in_ch_), [&](int64_t idx) {
    const size_t nn = static_cast<size_t>(idx) / in_ch_;
    const size_t ci = static_cast<size_t>(idx) % in_ch_;
    double* dmplane = dmid.data() + (nn * in_ch_ + ci) * ho * wo;
    for (size_t co = 0; co < out_ch_; ++co) {
      const double wv = pw[co * in_ch_ + ci];
      const double* gplane = grad_out.data() + (nn * out_ch_ + co) * ho * wo;
      for (size_t i = 0; i < ho * wo; ++i) dmplane[i] += wv * gplane[i];
    }
  });

  // Depthwise stage gradients.
  ThreadPool::global().for_each(static_cast<int64_t>(in_ch_), [&](int64_t ci64) {
    const size_t ci = static_cast<size_t>(ci64);
    for (size_t nn = 0; nn < n; ++nn) {
      const double* iplane = sp.data() + (nn * in_ch_ + ci) * hp * wp;
      const double* gplane = dmid.data() + (nn * in_ch_ + ci) * ho * wo;
      for (size_t kh = 0; kh < kh_; ++kh) {
        for (size_t kw = 0; kw < kw_; ++kw) {
          double acc = 0.0;
          for (size_t r = 0; r < ho; ++r) {
            const double* irow = iplane + (r * sh_ + kh) * wp + kw;
            const double* grow = gplane + r * wo;
            if (sw_ == 1) {
              for (size_t c = 0; c < wo; ++c) acc += grow[c] * irow[c];
            } else {
              for (size_t c = 0; c < wo; ++c) acc += grow[c] * irow[c * sw_];
            }
          }
          g_dw[(ci * kh_ + kh) * kw_ + kw] += acc;
        }
      }
    }
  });

  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  Tensor* dst = gi;
  if (p.any()) {
    dpad_.ensure({n, in_ch_, hp, wp});
    dpad_.fill(0.0);
    dst = &dpad_;
  }
  ThreadPool::global().for_each(static_cast<int64_t>(n * in_ch_), [&](int64_t idx) {
    const size_t nn = static_cast<size_t>(idx) / in_ch_;
    const size_t ci = static_cast<size_t>(idx) % in_ch_;
    double* dplane = dst->data() + (nn * in_ch_ + ci) * hp * wp;
    const double* gplane = dmid.data() + (nn * in_ch_ + ci) * ho * wo;
    for (size_t kh = 0; kh < kh_; ++kh) {
      for (size_t kw = 0; kw < kw_; ++kw) {
        const double wv = dw[(ci * kh_ + kh) * kw_ + kw];
        for (size_t r = 0; r < ho; ++r) {
          double* drow = dplane + (r * sh_ + kh) * wp + kw;
          const double* grow = gplane + r * wo;
          if (sw_ == 1) {
            for (size_t c = 0; c < wo; ++c) drow[c] += wv * grow[c];
          } else {
            for (size_t c = 0; c < wo; ++c) drow[c * sw_] += wv * grow[c];
          }
        }
      }
    }
  });
  if (p.any()) {
    const size_t h = x.dim(2), w = x.dim(3);
    for (size_t i = 0; i < n * in_ch_; ++i) {
      const double* src2 = dpad_.data() + i * hp * wp + p.top * wp + p.left;
      double* out2 = gi->data() + i * h * w;
      for (size_t r = 0; r < h; ++r) {
        for (size_t c = 0; c < w; ++c) out2[r * w + c] += src2[r * wp + c];
      }
    }
  }
}

// ---------------------------------------------------------------------------
// BatchNorm2d

BatchNorm2d::BatchNorm2d(std::string name, size_t channels, double eps, double momentum)
    : Layer(std::move(name)), channels_(channels), eps_(eps), momentum_(momentum) {
  params_.push_back(make_weight("gamma", {channels}, 0, 0, 0.0, 0));
  params_.push_back(make_weight("beta", {channels}, 0, 0, 0.0, 0));
  Param rm = make_weight("run_mean", {channels}, 0, 0, 0.0, 0);
  rm.trainable = false;
  params_.push_back(std::move(rm));
  Param rv = make_weight("run_var", {channels}, 0, 0, 0.0, 0);
  rv.trainable = false;
  params_.push_back(std::move(rv));
}

void BatchNorm2d::forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng*,
                          MacCounter*) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  require(c == channels_, Errc::shape_error, name_ + ": channel mismatch");
  out.ensure({n, c, x.dim(2), x.dim(3)});
  const double* gamma = params_[0].value.data();
  const double* beta = params_[1].value.data();
  double* run_mean = params_[2].value.data();
  double* run_var = params_[3].value.data();

  inv_std_.assign(c, 0.0);
  batch_mean_.assign(c, 0.0);

  ThreadPool::global().for_each(static_cast<int64_t>(c), [&](int64_t cc64) {
    const size_t cc = static_cast<size_t>(cc64);
    double m, v;
    if (train) {
      const double count = static_cast<double>(n * plane);
      double s = 0.0;
      for (size_t nn = 0; nn < n; ++nn) {
        const double* ip = x.data() + (nn * c + cc) * plane;
        for (size_t i = 0; i < plane; ++i) s += ip[i];
      }
      m = s / count;
      double ss = 0.0;
      for (size_t nn = 0; nn < n; ++nn) {
        const double* ip = x.data() + (nn * c + cc) * plane;
        for (size_t i = 0; i < plane; ++i) ss += (ip[i] - m) * (ip[i] - m);
      }
      v = ss / count;
      run_mean[cc] = (1.0 - momentum_) * run_mean[cc] + momentum_ * m;
      run_var[cc] = (1.0 - momentum_) * run_var[cc] + momentum_ * v;
    } else {
      m = run_mean[cc];
      v = run_var[cc];
    }
    const double inv = 1.0 / std::sqrt(v + eps_);
    batch_mean_[cc] = m;
    inv_std_[cc] = inv;
    const double g = gamma[cc], b = beta[cc];
    for (size_t nn = 0; nn < n; ++nn) {
      const double* ip = x.data() + (nn * c + cc) * plane;
      double* op = out.data() + (nn * c + cc) * plane;
      for (size_t i = 0; i < plane; ++i) op[i] = g * (ip[i] - m) * inv + b;
    }
  });
}

void BatchNorm2d::backward(const std::vector<const Tensor*>& in, const Tensor&,
                           const Tensor& grad_out, const std::vector<Tensor*>& grad_in,
                           bool train) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const double* gamma = params_[0].value.data();
  double* dgamma = params_[0].grad.data();
  double* dbeta = params_[1].grad.data();
  Tensor* gi = grad_in.at(0);

  ThreadPool::global().for_each(static_cast<int64_t>(c), [&](int64_t cc64) {
    const size_t cc = static_cast<size_t>(cc64);
    const double m = batch_mean_[cc], inv = inv_std_[cc], g = gamma[cc];
    const double count = static_cast<double>(n * plane);
    double s1 = 0.0, s2 = 0.0;
    for (size_t nn = 0; nn < n; ++nn) {
      const double* gp = grad_out.data() + (nn * c + cc) * plane;
      const double* ip = x.data() + (nn * c + cc) * plane;
      for (size_t i = 0; i < plane; ++i) {
        s1 += gp[i];
        s2 += gp[i] * (ip[i] - m) * inv;
      }
    }
    dbeta[cc] += s1;
    dgamma[cc] += s2;
    if (!gi) return;
    if (train) {
      // Batch statistics participate in the gradient.
      for (size_t nn = 0; nn < n; ++nn) {
        const double* gp = grad_out.data() + (nn * c + cc) * plane;
        const double* ip = x.data() + (nn * c + cc) * plane;
        double* dp = gi->data() + (nn * c + cc) * plane;
        for (size_t i = 0; i < plane; ++i) {
          const double xhat = (ip[i] - m) * inv;
          dp[i] += g * inv * (gp[i] - s1 / count - xhat * s2 / count);
        }
      }
    } else {
      for (size_t nn = 0; nn < n; ++nn) {
        const double* gp = grad_out.data() + (nn * c + cc) * plane;
        double* dp = gi->data() + (nn * c + cc) * plane;
        for (size_t i = 0; i < plane; ++i) dp[i] += g * inv * gp[i];
      }
    }
  });
}

// ---------------------------------------------------------------------------
// Activation

const char* Activation::kind() const {
  switch (act_) {
    case Act::elu: return "elu";
    case Act::tanh_: return "tanh";
    case Act::sigmoid: return "sigmoid";
  }
  return "activation";
}

void Activation::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*,
                         MacCounter*) {
  const Tensor& x = *in.at(0);
  out = x;
  double* o = out.data();
  switch (act_) {
    case Act::elu:
      for (size_t i = 0; i < out.size(); ++i) o[i] = o[i] > 0.0 ? o[i] : std::expm1(o[i]);
      break;
    case Act::tanh_:
      for (size_t i = 0; i < out.size(); ++i) o[i] = std::tanh(o[i]);
      break;
    case Act::sigmoid:
      for (size_t i = 0; i < out.size(); ++i) o[i] = 1.0 / (1.0 + std::exp(-o[i]));
      break;
  }
}

void Activation::backward(const std::vector<const Tensor*>&, const Tensor& out,
                          const Tensor& grad_out, const std::vector<Tensor*>& grad_in, bool) {
  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  const double* o = out.data();
  const double* g = grad_out.data();
  double* d = gi->data();
  switch (act_) {
    case Act::elu:
      // d/dx elu = 1 for x > 0, exp(x) = elu(x) + 1 otherwise.
      for (size_t i = 0; i < out.size(); ++i) d[i] += g[i] * (o[i] > 0.0 ? 1.0 : o[i] + 1.0);
      break;
    case Act::tanh_:
      for (size_t i = 0; i < out.size(); ++i) d[i] += g[i] * (1.0 - o[i] * o[i]);
      break;
    case Act::sigmoid:
      for (size_t i = 0; i < out.size(); ++i) d[i] += g[i] * o[i] * (1.0 - o[i]);
      break;
  }
}

// ---------------------------------------------------------------------------
// Pooling

Shape AvgPool2d::output_shape(const std::vector<Shape>& in) const {
  const Shape& s = in.at(0);
  return {s[0], conv_out_dim(s[1], ph_, sh_, 1), conv_out_dim(s[2], pw_, sw_, 1)};
}

void AvgPool2d::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*,
                        MacCounter*) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const size_t ho = conv_out_dim(h, ph_, sh_, 1), wo = conv_out_dim(w, pw_, sw_, 1);
  out.ensure({n, c, ho, wo});
  const double scale = 1.0 / static_cast<double>(ph_ * pw_);
  for (size_t i = 0; i < n * c; ++i) {
    const double* ip = x.data() + i * h * w;
    double* op = out.data() + i * ho * wo;
    for (size_t r = 0; r < ho; ++r) {
      for (size_t col = 0; col < wo; ++col) {
        double s = 0.0;
        for (size_t pr = 0; pr < ph_; ++pr) {
          const double* irow = ip + (r * sh_ + pr) * w + col * sw_;
          for (size_t pc = 0; pc < pw_; ++pc) s += irow[pc];
        }
        op[r * wo + col] = s * scale;
      }
    }
  }
}

void AvgPool2d::backward(const std::vector<const Tensor*>& in, const Tensor&,
                         const Tensor& grad_out, const std::vector<Tensor*>& grad_in, bool) {
  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const size_t ho = grad_out.dim(2), wo = grad_out.dim(3);
  const double scale = 1.0 / static_cast<double>(ph_ * pw_);
  for (size_t i = 0; i < n * c; ++i) {
    double* dp = gi->data() + i * h * w;
    const double* gp = grad_out.data() + i * ho * wo;
    for (size_t r = 0; r < ho; ++r) {
      for (size_t col = 0; col < wo; ++col) {
        const double gv = gp[r * wo + col] * scale;
        for (size_t pr = 0; pr < ph_; ++pr) {
          double* drow = dp + (r * sh_ + pr) * w + col * sw_;
          for (size_t pc = 0; pc < pw_; ++pc) drow[pc] += gv;
        }
      }
    }
  }
}

Shape MaxPool2d::output_shape(const std::vector<Shape>& in) const {
  const Shape& s = in.at(0);
  return {s[0], conv_out_dim(s[1], ph_, sh_, 1), conv_out_dim(s[2], pw_, sw_, 1)};
}

void MaxPool2d::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*,
                        MacCounter*) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const size_t ho = conv_out_dim(h, ph_, sh_, 1), wo = conv_out_dim(w, pw_, sw_, 1);
  out.ensure({n, c, ho, wo});
  argmax_.assign(out.size(), 0);
  for (size_t i = 0; i < n * c; ++i) {
    const double* ip = x.data() + i * h * w;
    double* op = out.data() + i * ho * wo;
    for (size_t r = 0; r < ho; ++r) {
      for (size_t col = 0; col < wo; ++col) {
        double best = -std::numeric_limits<double>::infinity();
        size_t best_idx = 0;
        for (size_t pr = 0; pr < ph_; ++pr) {
          for (size_t pc = 0; pc < pw_; ++pc) {
            const size_t idx = (r * sh_ + pr) * w + col * sw_ + pc;
            if (ip[idx] > best) {
              best = ip[idx];
              best_idx = idx;
            }
          }
        }
        op[r * wo + col] = best;
        argmax_[i * ho * wo + r * wo + col] = i * h * w + best_idx;
      }
    }
  }
}

void MaxPool2d::backward(const std::vector<const Tensor*>&, const Tensor&, const Tensor& grad_out,
                         const std::vector<Tensor*>& grad_in, bool) {
  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  const double* gp = grad_out.data();
  double* dp = gi->data();
  for (size_t i = 0; i < grad_out.size(); ++i) dp[argmax_[i]] += gp[i];
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(std::string name, double p) : Layer(std::move(name)), p_(p) {
  require(p >= 0.0 && p < 1.0, Errc::invalid_input, "dropout p must be in [0, 1)");
}

void Dropout::forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
                      MacCounter*) {
  const Tensor& x = *in.at(0);
  out = x;
  if (!train || p_ == 0.0) {
    mask_.clear();
    return;
  }
  const double keep = 1.0 - p_;
  mask_.resize(x.size());
  double* o = out.data();
  for (size_t i = 0; i < x.size(); ++i) {
    mask_[i] = rng->uniform() < p_ ? 0.0 : 1.0 / keep;
    o[i] *= mask_[i];
  }
}

void Dropout::backward(const std::vector<const Tensor*>&, const Tensor&, const Tensor& grad_out,
                       const std::vector<Tensor*>& grad_in, bool train) {
  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  const double* g = grad_out.data();
  double* d = gi->data();
  if (!train || mask_.empty()) {
    for (size_t i = 0; i < grad_out.size(); ++i) d[i] += g[i];
  } else {
    for (size_t i = 0; i < grad_out.size(); ++i) d[i] += g[i] * mask_[i];
  }
}

// ---------------------------------------------------------------------------
// Flatten / Dense

Shape Flatten::output_shape(const std::vector<Shape>& in) const {
  const Shape& s = in.at(0);
  return {s[0] * s[1] * s[2], 1, 1};
}

void Flatten::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*, MacCounter*) {
  const Tensor& x = *in.at(0);
  out = x;
  out.reshape({x.dim(0), x.dim(1) * x.dim(2) * x.dim(3), 1, 1});
}

void Flatten::backward(const std::vector<const Tensor*>& in, const Tensor&,
                       const Tensor& grad_out, const std::vector<Tensor*>& grad_in, bool) {
  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  (void)in;
  const double* g = grad_out.data();
  double* d = gi->data();
  for (size_t i = 0; i < grad_out.size(); ++i) d[i] += g[i];
}

Dense::Dense(std::string name, size_t in, size_t out, bool bias, double max_norm)
    : Layer(std::move(name)), in_(in), out_(out), has_bias_(bias) {
  params_.push_back(make_weight("kernel", {out, in}, in, out, max_norm, in));
  if (bias) params_.push_back(make_weight("bias", {out}, 0, 0, 0.0, 0));
}

Shape Dense::output_shape(const std::vector<Shape>& in) const {
  const Shape& s = in.at(0);
  require(s[0] * s[1] * s[2] == in_, Errc::shape_error, name_ + ": input size mismatch");
  return {out_, 1, 1};
}

uint64_t Dense::analytic_macs(const std::vector<Shape>&) const { return in_ * out_; }

void Dense::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*,
                    MacCounter* mac) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0);
  out.ensure({n, out_, 1, 1});
  const double* w = params_[0].value.data();
  const double* b = has_bias_ ? params_[1].value.data() : nullptr;
  auto run = [&](int64_t nn64) {
    const size_t nn = static_cast<size_t>(nn64);
    const double* xr = x.data() + nn * in_;
    double* orow = out.data() + nn * out_;
    for (size_t o = 0; o < out_; ++o) {
      double s = b ? b[o] : 0.0;
      const double* wr = w + o * in_;
      for (size_t i = 0; i < in_; ++i) s += wr[i] * xr[i];
      orow[o] = s;
    }
    if (mac) mac->macs += static_cast<uint64_t>(out_) * in_;
  };
  if (mac) {
    for (int64_t i = 0; i < static_cast<int64_t>(n); ++i) run(i);
  } else {
    ThreadPool::global().for_each(static_cast<int64_t>(n), run);
  }
}

void Dense::backward(const std::vector<const Tensor*>& in, const Tensor&, const Tensor& grad_out,
                     const std::vector<Tensor*>& grad_in, bool) {
  const Tensor& x = *in.at(0);
  const size_t n = x.dim(0);
  const double* w = params_[0].value.data();
  double* dw = params_[0].grad.data();
  double* db = has_bias_ ? params_[1].grad.data() : nullptr;

  for (size_t o = 0; o < out_; ++o) {
    double bias_acc = 0.0;
    double* dwr = dw + o * in_;
    for (size_t nn = 0; nn < n; ++nn) {
      const double g = grad_out[nn * out_ + o];
      if (g == 0.0) continue;
      bias_acc += g;
      const double* xr = x.data() + nn * in_;
      for (size_t i = 0; i < in_; ++i) dwr[i] += g * xr[i];
    }
    if (db) db[o] += bias_acc;
  }

  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  ThreadPool::global().for_each(static_cast<int64_t>(n), [&](int64_t nn64) {
    const size_t nn = static_cast<size_t>(nn64);
    double* dxr = gi->data() + nn * in_;
    for (size_t o = 0; o < out_; ++o) {
      const double g = grad_out[nn * out_ + o];
      if (g == 0.0) continue;
      const double* wr = w + o * in_;
      for (size_t i = 0; i < in_; ++i) dxr[i] += g * wr[i];
    }
  });
}

// ---------------------------------------------------------------------------
// ZeroPad2d / Crop1d / Add / Concat

Shape ZeroPad2d::output_shape(const std::vector<Shape>& in) const {
  const Shape& s = in.at(0);
  return {s[0], s[1] + pad_.top + pad_.bottom, s[2] + pad_.left + pad_.right};
}

void ZeroPad2d::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*,
                        MacCounter*) {
  pad_batch(*in.at(0), pad_, out);
}

void ZeroPad2d::backward(const std::vector<const Tensor*>& in, const Tensor&,
                         const Tensor& grad_out, const std::vector<Tensor*>& grad_in, bool) {
  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  const Tensor& x = *in.at(0);
  const size_t nc = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const size_t hp = grad_out.dim(2), wp = grad_out.dim(3);
  for (size_t i = 0; i < nc; ++i) {
    const double* gp = grad_out.data() + i * hp * wp + pad_.top * wp + pad_.left;
    double* dp = gi->data() + i * h * w;
    for (size_t r = 0; r < h; ++r) {
      for (size_t c = 0; c < w; ++c) dp[r * w + c] += gp[r * wp + c];
    }
  }
}

Shape Crop1d::output_shape(const std::vector<Shape>& in) const {
  const Shape& s = in.at(0);
  require(s[2] > left_ + right_, Errc::shape_error, name_ + ": crop exceeds width");
  return {s[0], s[1], s[2] - left_ - right_};
}

void Crop1d::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*, MacCounter*) {
  const Tensor& x = *in.at(0);
  const size_t nch = x.dim(0) * x.dim(1) * x.dim(2), w = x.dim(3);
  const size_t wo = w - left_ - right_;
  out.ensure({x.dim(0), x.dim(1), x.dim(2), wo});
  for (size_t i = 0; i < nch; ++i) {
    const double* ip = x.data() + i * w + left_;
    std::copy(ip, ip + wo, out.data() + i * wo);
  }
}

void Crop1d::backward(const std::vector<const Tensor*>& in, const Tensor&, const Tensor& grad_out,
                      const std::vector<Tensor*>& grad_in, bool) {
  Tensor* gi = grad_in.at(0);
  if (!gi) return;
  const Tensor& x = *in.at(0);
  const size_t nch = x.dim(0) * x.dim(1) * x.dim(2), w = x.dim(3);
  const size_t wo = grad_out.dim(3);
  for (size_t i = 0; i < nch; ++i) {
    const double* gp = grad_out.data() + i * wo;
    double* dp = gi->data() + i * w + left_;
    for (size_t c = 0; c < wo; ++c) dp[c] += gp[c];
  }
}

Shape Add::output_shape(const std::vector<Shape>& in) const {
  require(in.size() == 2 && in[0] == in[1], Errc::shape_error, name_ + ": operand shape mismatch");
  return in[0];
}

void Add::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*, MacCounter*) {
  out = *in.at(0);
  const double* b = in.at(1)->data();
  double* o = out.data();
  for (size_t i = 0; i < out.size(); ++i) o[i] += b[i];
}

void Add::backward(const std::vector<const Tensor*>&, const Tensor&, const Tensor& grad_out,
                   const std::vector<Tensor*>& grad_in, bool) {
  const double* g = grad_out.data();
  for (Tensor* gi : grad_in) {
    if (!gi) continue;
    double* d = gi->data();
    for (size_t i = 0; i < grad_out.size(); ++i) d[i] += g[i];
  }
}

Shape Concat::output_shape(const std::vector<Shape>& in) const {
  require(!in.empty(), Errc::shape_error, name_ + ": no inputs");
  size_t channels = 0;
  for (const Shape& s : in) {
    require(s[1] == in[0][1] && s[2] == in[0][2], Errc::shape_error,
            name_ + ": spatial shape mismatch");
    channels += s[0];
  }
  return {channels, in[0][1], in[0][2]};
}

void Concat::forward(const std::vector<const Tensor*>& in, Tensor& out, bool, Rng*, MacCounter*) {
  const size_t n = in.at(0)->dim(0);
  const size_t h = in.at(0)->dim(2), w = in.at(0)->dim(3);
  size_t channels = 0;
  for (const Tensor* t : in) channels += t->dim(1);
  out.ensure({n, channels, h, w});
  for (size_t nn = 0; nn < n; ++nn) {
    size_t off = 0;
    for (const Tensor* t : in) {
      const size_t c = t->dim(1);
      std::copy(t->data() + nn * c * h * w, t->data() + (nn + 1) * c * h * w,
                out.data() + (nn * channels + off) * h * w);
      off += c;
    }
  }
}

void Concat::backward(const std::vector<const Tensor*>& in, const Tensor&, const Tensor& grad_out,
                      const std::vector<Tensor*>& grad_in, bool) {
  const size_t n = in.at(0)->dim(0);
  const size_t h = in.at(0)->dim(2), w = in.at(0)->dim(3);
  const size_t channels = grad_out.dim(1);
  for (size_t nn = 0; nn < n; ++nn) {
    size_t off = 0;
    for (size_t k = 0; k < in.size(); ++k) {
      const size_t c = in[k]->dim(1);
      if (grad_in[k]) {
        const double* gp = grad_out.data() + (nn * channels + off) * h * w;
        double* dp = grad_in[k]->data() + nn * c * h * w;
        for (size_t i = 0; i < c * h * w; ++i) dp[i] += gp[i];
      }
      off += c;
    }
  }
}

}  // namespace erpdeck::nn
