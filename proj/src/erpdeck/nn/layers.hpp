#pragma once

#include "erpdeck/nn/graph.hpp"

namespace erpdeck::nn {

struct PadSpec {
  size_t top = 0, bottom = 0, left = 0, right = 0;
  bool any() const { return top || bottom || left || right; }
};

enum class PadMode { valid, same, explicit_pad };

// 2-D convolution, NCHW, optional dilation/stride. 'same' materializes a
// zero-padded buffer so every output element runs the full kernel (keeps the
// instrumented MAC count equal to out_elems * ci * kh * kw).
class Conv2d : public Layer {
 public:
  Conv2d(std::string name, size_t in_ch, size_t out_ch, size_t kh, size_t kw, PadMode pad,
         bool bias, double max_norm = 0.0, size_t stride_h = 1, size_t stride_w = 1,
         size_t dil_h = 1, size_t dil_w = 1, PadSpec explicit_pad = {});

  const char* kind() const override { return "conv2d"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;
  uint64_t analytic_macs(const std::vector<Shape>& in) const override;

  size_t in_ch() const { return in_ch_; }
  size_t out_ch() const { return out_ch_; }

 private:
  PadSpec pad_for(const Shape& in) const;
  size_t in_ch_, out_ch_, kh_, kw_, sh_, sw_, dh_, dw_;
  PadMode pad_mode_;
  PadSpec explicit_pad_;
  bool has_bias_;
  Tensor padded_;            // cache for backward
  Tensor dpad_, gpadded_;    // backward scratch, reused across batches
};

// Depthwise 2-D convolution with a depth multiplier; valid padding.
class DepthwiseConv2d : public Layer {
 public:
  DepthwiseConv2d(std::string name, size_t in_ch, size_t mult, size_t kh, size_t kw, bool bias,
                  double max_norm = 0.0);

  const char* kind() const override { return "depthwise_conv2d"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;
  uint64_t analytic_macs(const std::vector<Shape>& in) const override;

 private:
  size_t in_ch_, mult_, kh_, kw_;
  bool has_bias_;
};

// Depthwise stage (multiplier 1, optional stride) followed by a 1x1 pointwise
// mix; the single bias sits on the pointwise stage.
class SeparableConv2d : public Layer {
 public:
  SeparableConv2d(std::string name, size_t in_ch, size_t out_ch, size_t kh, size_t kw, PadMode pad,
                  bool bias, size_t stride_h = 1, size_t stride_w = 1);

  const char* kind() const override { return "separable_conv2d"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;
  uint64_t analytic_macs(const std::vector<Shape>& in) const override;

 private:
  PadSpec pad_for(const Shape& in) const;
  size_t in_ch_, out_ch_, kh_, kw_, sh_, sw_;
  PadMode pad_mode_;
  bool has_bias_;
  Tensor padded_, mid_;   // caches
  Tensor dmid_, dpad_;    // backward scratch
};

// Per-channel batch normalization over (N, H, W). Train mode uses biased
// batch statistics and updates running buffers with momentum 0.1
// (running <- 0.9*running + 0.1*batch); eval mode normalizes with the
// running buffers.
class BatchNorm2d : public Layer {
 public:
  BatchNorm2d(std::string name, size_t channels, double eps = 1e-5, double momentum = 0.1);

  const char* kind() const override { return "batchnorm"; }
  Shape output_shape(const std::vector<Shape>& in) const override { return in.at(0); }
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;

 private:
  size_t channels_;
  double eps_, momentum_;
  std::vector<double> inv_std_, batch_mean_;  // caches (train-mode backward)
};

enum class Act { elu, tanh_, sigmoid };

class Activation : public Layer {
 public:
  Activation(std::string name, Act act) : Layer(std::move(name)), act_(act) {}
  const char* kind() const override;
  Shape output_shape(const std::vector<Shape>& in) const override { return in.at(0); }
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;

 private:
  Act act_;
};

class AvgPool2d : public Layer {
 public:
  AvgPool2d(std::string name, size_t ph, size_t pw, size_t sh = 0, size_t sw = 0)
      : Layer(std::move(name)), ph_(ph), pw_(pw), sh_(sh ? sh : ph), sw_(sw ? sw : pw) {}
  const char* kind() const override { return "avgpool2d"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;

 private:
  size_t ph_, pw_, sh_, sw_;
};

class MaxPool2d : public Layer {
 public:
  MaxPool2d(std::string name, size_t ph, size_t pw, size_t sh = 0, size_t sw = 0)
      : Layer(std::move(name)), ph_(ph), pw_(pw), sh_(sh ? sh : ph), sw_(sw ? sw : pw) {}
  const char* kind() const override { return "maxpool2d"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;

 private:
  size_t ph_, pw_, sh_, sw_;
  std::vector<size_t> argmax_;  // cache
};

// Inverted dropout: train-time scaling by 1/(1-p), identity in eval mode.
class Dropout : public Layer {
 public:
  Dropout(std::string name, double p);
  const char* kind() const override { return "dropout"; }
  Shape output_shape(const std::vector<Shape>& in) const override { return in.at(0); }
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;

 private:
  double p_;
  std::vector<double> mask_;  // cache
};

class Flatten : public Layer {
 public:
  explicit Flatten(std::string name) : Layer(std::move(name)) {}
  const char* kind() const override { return "flatten"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;
};

class Dense : public Layer {
 public:
  Dense(std::string name, size_t in, size_t out, bool bias = true, double max_norm = 0.0);
  const char* kind() const override { return "dense"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;
  uint64_t analytic_macs(const std::vector<Shape>& in) const override;

 private:
  size_t in_, out_;
  bool has_bias_;
};

// Zero padding along W (and optionally H).
class ZeroPad2d : public Layer {
 public:
  ZeroPad2d(std::string name, PadSpec pad) : Layer(std::move(name)), pad_(pad) {}
  const char* kind() const override { return "zeropad"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;

 private:
  PadSpec pad_;
};

// Crops along W: the TCN chomp (right crop) and last-timestep selection
// (left crop) are both instances.
class Crop1d : public Layer {
 public:
  Crop1d(std::string name, size_t left, size_t right)
      : Layer(std::move(name)), left_(left), right_(right) {}
  const char* kind() const override { return "chomp1d"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;

 private:
  size_t left_, right_;
};

class Add : public Layer {
 public:
  explicit Add(std::string name) : Layer(std::move(name)) {}
  const char* kind() const override { return "add"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;
};

// Concatenation along the channel axis.
class Concat : public Layer {
 public:
  explicit Concat(std::string name) : Layer(std::move(name)) {}
  const char* kind() const override { return "concat"; }
  Shape output_shape(const std::vector<Shape>& in) const override;
  void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
               MacCounter* mac) override;
  void backward(const std::vector<const Tensor*>& in, const Tensor& out, const Tensor& grad_out,
                const std::vector<Tensor*>& grad_in, bool train) override;
};

}  // namespace erpdeck::nn
