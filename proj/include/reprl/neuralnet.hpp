#pragma once

#include <vector>

#include "reprl/numerics.hpp"

namespace reprl {

enum class Activation { Tanh, Relu, None };

/// Fully-connected network over a single flat parameter vector. Layer l stores
/// its weight matrix (out x in, column-major) followed by its bias. Hidden
/// layers use `hidden`; the last layer uses `output` (default: affine).
class DenseNet {
 public:
  DenseNet() = default;
  DenseNet(std::vector<Eigen::Index> layer_dims, Activation hidden, Activation output = Activation::None);

  const std::vector<Eigen::Index>& layer_dims() const { return dims_; }
  Activation hidden_activation() const { return hidden_; }
  Activation output_activation() const { return output_; }
  std::size_t num_layers() const { return dims_.empty() ? 0 : dims_.size() - 1; }
  Eigen::Index input_dim() const { return dims_.front(); }
  Eigen::Index output_dim() const { return dims_.back(); }
  Eigen::Index parameter_count() const { return params_.size(); }

  const Vector& params() const { return params_; }
  Vector& params() { return params_; }
  void set_params(const Vector& params);

  Eigen::Map<const Matrix> weight(std::size_t layer) const;
  Eigen::Map<Matrix> weight(std::size_t layer);
  Eigen::Map<const Vector> bias(std::size_t layer) const;
  Eigen::Map<Vector> bias(std::size_t layer);

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
  void init_uniform(Engine& engine);

  struct Pass {
    /// activations[0] is the input batch; activations[l + 1] is the output of
    /// layer l after its activation. Columns are samples.
    std::vector<Matrix> activations;
    const Matrix& output() const { return activations.back(); }
  };

  Pass forward(const Matrix& inputs) const;
  Vector forward(const Vector& input) const;

  /// Network output for a batch whose first-layer pre-activations W_0 x + b_0
  /// are already known.
  Matrix forward_from_preactivation(Matrix preactivation) const;

  /// Parameter gradient summed over the batch, given dL/d(output). Optionally
  /// also writes dL/d(input).
  Vector backward(const Pass& pass, const Matrix& out_grad, Matrix* input_grad = nullptr) const;

 private:
  Eigen::Index offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<Eigen::Index> dims_;
  std::vector<Eigen::Index> offsets_;
  Activation hidden_ = Activation::None;
  Activation output_ = Activation::None;
  Vector params_;
};

struct AdamState {
  long step = 0;
  Vector m;
  Vector v;
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_size(Eigen::Index n, double learning_rate = 3e-4);
};

/// One bias-corrected Adam update, in place.
void adam_step(Vector& params, const Vector& grads, AdamState& state);

}  // namespace reprl
