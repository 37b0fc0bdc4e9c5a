#include "erpdeck/nn/graph.hpp"

#include <cmath>

#include "erpdeck/error.hpp"

namespace erpdeck::nn {

int ModelGraph::add(std::unique_ptr<Layer> layer, std::vector<int> inputs) {
  require(!input_shape_.empty(), Errc::shape_error, "set_input_shape before adding layers");
  std::vector<Shape> in_shapes;
  for (int idx : inputs) {
    if (idx < 0) {
      in_shapes.push_back(input_shape_);
    } else {
      require(static_cast<size_t>(idx) < nodes_.size(), Errc::shape_error,
              "layer input must precede it");
      in_shapes.push_back(nodes_[static_cast<size_t>(idx)].shape);
    }
  }
  Node node;
  node.shape = layer->output_shape(in_shapes);
  node.layer = std::move(layer);
  node.inputs = std::move(inputs);
  nodes_.push_back(std::move(node));
  return static_cast<int>(nodes_.size()) - 1;
}

const Shape* ModelGraph::shape_by_name(const std::string& name) const {
  for (const Node& n : nodes_) {
    if (n.layer->name() == name) return &n.shape;
  }
  return nullptr;
}

void ModelGraph::init_weights(uint64_t seed) {
  uint64_t index = 0;
  for (Node& node : nodes_) {
    for (Param& p : node.layer->params()) {
      ++index;
      if (!p.trainable) {
        // Running statistics: mean 0, variance 1.
        const double v = p.name == "run_var" ? 1.0 : 0.0;
        p.value.fill(v);
        continue;
      }
      if (p.fan_in == 0) {
        p.value.fill(p.name == "gamma" ? 1.0 : 0.0);
        continue;
      }
      Rng rng(derive_seed(seed, "init", {index}));
      const double limit = std::sqrt(6.0 / static_cast<double>(p.fan_in + p.fan_out));
      for (size_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.uniform(-limit, limit);
    }
  }
}

std::vector<double> ModelGraph::forward(const Tensor& x, bool train, MacCounter* mac) {
  require(x.rank() == 4, Errc::shape_error, "input must be (batch, C, H, W)");
  require(x.dim(1) == input_shape_[0] && x.dim(2) == input_shape_[1] &&
              x.dim(3) == input_shape_[2],
          Errc::shape_error, "input shape does not match the graph");
  const size_t n = x.dim(0);
  input_copy_ = x;
  acts_.resize(nodes_.size());

  for (size_t i = 0; i < nodes_.size(); ++i) {
    std::vector<const Tensor*> ins;
    for (int idx : nodes_[i].inputs) {
      ins.push_back(idx < 0 ? &input_copy_ : &acts_[static_cast<size_t>(idx)]);
    }
    nodes_[i].layer->forward(ins, acts_[i], train, &rng_, mac);
  }

  const Tensor& out = acts_.back();
  require(out.size() == n, Errc::shape_error, "graph must end in a single scalar output");
  std::vector<double> scores(n);
  for (size_t i = 0; i < n; ++i) {
    scores[i] = out[i];
    require(std::isfinite(scores[i]), Errc::numerical_error, "non-finite network output");
  }
  return scores;
}

void ModelGraph::backward(const std::vector<double>& grad_scores, bool train) {
  require(acts_.size() == nodes_.size() && !acts_.empty(), Errc::invalid_input,
          "backward requires a forward pass first");
  const size_t n = input_copy_.dim(0);
  require(grad_scores.size() == n, Errc::shape_error, "grad size mismatch");

  grads_.resize(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) {
    grads_[i].ensure(acts_[i].shape());
    grads_[i].fill(0.0);
  }
  std::vector<Tensor>& grads = grads_;
  input_grad_.ensure(input_copy_.shape());
  input_grad_.fill(0.0);
  Tensor& input_grad = input_grad_;

  Tensor& top = grads.back();
  for (size_t i = 0; i < n; ++i) top[i] = grad_scores[i];

  for (size_t ii = nodes_.size(); ii-- > 0;) {
    std::vector<const Tensor*> ins;
    std::vector<Tensor*> gins;
    for (int idx : nodes_[ii].inputs) {
      if (idx < 0) {
        ins.push_back(&input_copy_);
        gins.push_back(&input_grad);
      } else {
        ins.push_back(&acts_[static_cast<size_t>(idx)]);
        gins.push_back(&grads[static_cast<size_t>(idx)]);
      }
    }
    nodes_[ii].layer->backward(ins, acts_[ii], grads[ii], gins, train);
  }
}

void ModelGraph::zero_grad() {
  for (Node& node : nodes_) {
    for (Param& p : node.layer->params()) p.grad.fill(0.0);
  }
}

uint64_t ModelGraph::param_count() const {
  uint64_t c = 0;
  for (const Node& node : nodes_) {
    for (const Param& p : node.layer->params()) {
      if (p.trainable) c += p.value.size();
    }
  }
  return c;
}

uint64_t ModelGraph::analytic_macs() const {
  uint64_t c = 0;
  for (const Node& node : nodes_) {
    std::vector<Shape> in_shapes;
    for (int idx : node.inputs) {
      in_shapes.push_back(idx < 0 ? input_shape_ : nodes_[static_cast<size_t>(idx)].shape);
    }
    c += node.layer->analytic_macs(in_shapes);
  }
  return c;
}

std::vector<Param*> ModelGraph::all_params() {
  std::vector<Param*> out;
  for (Node& node : nodes_) {
    for (Param& p : node.layer->params()) {
      if (p.trainable) out.push_back(&p);
    }
  }
  return out;
}

void ModelGraph::apply_constraints() {
  for (Node& node : nodes_) {
    for (Param& p : node.layer->params()) {
      if (!p.trainable || p.max_norm <= 0.0) continue;
      const size_t group = p.norm_group == 0 ? p.value.size() : p.norm_group;
      for (size_t start = 0; start + group <= p.value.size(); start += group) {
        double s = 0.0;
        for (size_t i = 0; i < group; ++i) s += p.value[start + i] * p.value[start + i];
        const double norm = std::sqrt(s);
        if (norm > p.max_norm) {
          const double scale = p.max_norm / norm;
          for (size_t i = 0; i < group; ++i) p.value[start + i] *= scale;
        }
      }
    }
  }
}

}  // namespace erpdeck::nn
