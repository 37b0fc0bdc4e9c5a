#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "erpdeck/rng.hpp"
#include "erpdeck/tensor.hpp"

namespace erpdeck::nn {

// Counts multiply-accumulate operations actually executed by the conv/dense
// inner loops; compared against the analytic per-layer formulas.
struct MacCounter {
  uint64_t macs = 0;
};

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  double max_norm = 0.0;   // 0 = unconstrained
  size_t norm_group = 0;   // weights per constrained row (contiguous); 0 = whole tensor
  bool trainable = true;   // false for running statistics
  size_t fan_in = 0;       // 0 marks biases/affine terms (zero or one init)
  size_t fan_out = 0;
};

// Activations are (batch, C, H, W); node shapes below exclude the batch axis.
using Shape = std::vector<size_t>;  // {C, H, W}

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;

  const std::string& name() const { return name_; }
  virtual const char* kind() const = 0;

  virtual Shape output_shape(const std::vector<Shape>& in) const = 0;

  // `train` toggles dropout and batch statistics; rng is the graph's stream.
  virtual void forward(const std::vector<const Tensor*>& in, Tensor& out, bool train, Rng* rng,
                       MacCounter* mac) = 0;

  // Accumulates into grad_in (already zero-initialized by the graph) and into
  // the layer's own parameter gradients. Layers may rely on caches from the
  // immediately preceding forward call.
  virtual void backward(const std::vector<const Tensor*>& in, const Tensor& out,
                        const Tensor& grad_out, const std::vector<Tensor*>& grad_in,
                        bool train) = 0;

  virtual uint64_t analytic_macs(const std::vector<Shape>& in) const {
    (void)in;
    return 0;
  }

  std::vector<Param>& params() { return params_; }
  const std::vector<Param>& params() const { return params_; }

 protected:
  std::vector<Param> params_;
  std::string name_;
};

// DAG of layers in topological order (construction order). Mutable buffers
// make a graph exclusive-access during forward/backward; distinct graphs are
// independent.
class ModelGraph {
 public:
  ModelGraph() = default;

  void set_input_shape(Shape s) { input_shape_ = std::move(s); }
  const Shape& input_shape() const { return input_shape_; }

  // inputs: node indices, or -1 for the graph input. Returns the node index.
  int add(std::unique_ptr<Layer> layer, std::vector<int> inputs);

  size_t node_count() const { return nodes_.size(); }
  Layer& layer(size_t i) { return *nodes_[i].layer; }
  const Layer& layer(size_t i) const { return *nodes_[i].layer; }
  const Shape& node_shape(size_t i) const { return nodes_[i].shape; }
  const Shape* shape_by_name(const std::string& name) const;

  // Seeded Glorot-style init for every trainable weight tensor.
  void init_weights(uint64_t seed);
  void reseed_dropout(uint64_t seed) { rng_.reseed(seed); }

  // Scores in [0, 1], one per batch row; batch order preserved.
  std::vector<double> forward(const Tensor& x, bool train, MacCounter* mac = nullptr);

  // dL/dscore per batch row, after a train-mode (or eval-mode) forward.
  void backward(const std::vector<double>& grad_scores, bool train);

  void zero_grad();

  uint64_t param_count() const;          // trainable values
  uint64_t analytic_macs() const;        // conv/dense formulas, per inference
  std::vector<Param*> all_params();      // trainable first-to-last

  // Projects every constrained parameter row back onto its max-norm ball.
  void apply_constraints();

 private:
  struct Node {
    std::unique_ptr<Layer> layer;
    std::vector<int> inputs;
    Shape shape;
  };
  std::vector<Node> nodes_;
  Shape input_shape_;
  Rng rng_{0xe5d0};

  // Per-forward caches, reused across batches of the same size.
  std::vector<Tensor> acts_;
  std::vector<Tensor> grads_;
  Tensor input_copy_;
  Tensor input_grad_;
};

}  // namespace erpdeck::nn
