#include "reprl/neuralnet.hpp"

#include <cmath>
#include <string>

#include "reprl/error.hpp"

namespace reprl {

namespace {

void apply_activation(Activation act, Matrix& m) {
  switch (act) {
    case Activation::Tanh: m = m.array().tanh(); break;
    case Activation::Relu: m = m.cwiseMax(0.0); break;
    case Activation::None: break;
  }
}

// Multiplies `grad` in place by the activation derivative, expressed through
// the post-activation value.
void scale_by_derivative(Activation act, const Matrix& post, Matrix& grad) {
  switch (act) {
    case Activation::Tanh: grad.array() *= 1.0 - post.array().square(); break;
    case Activation::Relu: grad.array() *= (post.array() > 0.0).cast<double>(); break;
    case Activation::None: break;
  }
}

}  // namespace

DenseNet::DenseNet(std::vector<Eigen::Index> layer_dims, Activation hidden, Activation output)
    : dims_(std::move(layer_dims)), hidden_(hidden), output_(output) {
  require(!dims_.empty(), ErrorKind::InvalidArgument, "DenseNet needs at least an input dim");
  Eigen::Index total = 0;
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    require(dims_[l] > 0 && dims_[l + 1] > 0, ErrorKind::InvalidArgument, "layer dims must be positive");
    offsets_.push_back(total);
    total += dims_[l] * dims_[l + 1] + dims_[l + 1];
  }
  params_ = Vector::Zero(total);
}

void DenseNet::set_params(const Vector& params) {
  require(params.size() == params_.size(), ErrorKind::DimMismatch, "DenseNet parameter count");
  params_ = params;
}

Eigen::Map<const Matrix> DenseNet::weight(std::size_t l) const {
  return {params_.data() + offset(l), dims_[l + 1], dims_[l]};
}
Eigen::Map<Matrix> DenseNet::weight(std::size_t l) {
  return {params_.data() + offset(l), dims_[l + 1], dims_[l]};
}
Eigen::Map<const Vector> DenseNet::bias(std::size_t l) const {
  return {params_.data() + offset(l) + dims_[l] * dims_[l + 1], dims_[l + 1]};
}
Eigen::Map<Vector> DenseNet::bias(std::size_t l) {
  return {params_.data() + offset(l) + dims_[l] * dims_[l + 1], dims_[l + 1]};
}

void DenseNet::init_uniform(Engine& engine) {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims_[l]));
    const Eigen::Index n = dims_[l] * dims_[l + 1] + dims_[l + 1];
    for (Eigen::Index i = 0; i < n; ++i) params_(offset(l) + i) = bound * (2.0 * engine.uniform() - 1.0);
  }
}

DenseNet::Pass DenseNet::forward(const Matrix& inputs) const {
  require(inputs.rows() == input_dim(), ErrorKind::DimMismatch,
          "DenseNet input has " + std::to_string(inputs.rows()) + " rows, expected " + std::to_string(input_dim()));
  Pass pass;
  pass.activations.reserve(num_layers() + 1);
  pass.activations.push_back(inputs);
  for (std::size_t l = 0; l < num_layers(); ++l) {
    Matrix z = weight(l) * pass.activations.back();
    z.colwise() += bias(l);
    apply_activation(l + 1 == num_layers() ? output_ : hidden_, z);
    pass.activations.push_back(std::move(z));
  }
  return pass;
}

Matrix DenseNet::forward_from_preactivation(Matrix preactivation) const {
  require(num_layers() > 0 && preactivation.rows() == dims_[1], ErrorKind::DimMismatch, "preactivation shape");
  apply_activation(num_layers() == 1 ? output_ : hidden_, preactivation);
  for (std::size_t l = 1; l < num_layers(); ++l) {
    Matrix z = weight(l) * preactivation;
    z.colwise() += bias(l);
    apply_activation(l + 1 == num_layers() ? output_ : hidden_, z);
    preactivation = std::move(z);
  }
  return preactivation;
}

Vector DenseNet::forward(const Vector& input) const {
  return forward(Matrix(input)).output().col(0);
}

Vector DenseNet::backward(const Pass& pass, const Matrix& out_grad, Matrix* input_grad) const {
  require(pass.activations.size() == num_layers() + 1, ErrorKind::DimMismatch, "cache does not match network");
  require(out_grad.rows() == output_dim() && out_grad.cols() == pass.output().cols(), ErrorKind::DimMismatch,
          "out_grad shape");
  Vector grad = Vector::Zero(parameter_count());
  Matrix delta = out_grad;
  for (std::size_t l = num_layers(); l-- > 0;) {
    scale_by_derivative(l + 1 == num_layers() ? output_ : hidden_, pass.activations[l + 1], delta);
    const Eigen::Index in = dims_[l], out = dims_[l + 1];
    Eigen::Map<Matrix>(grad.data() + offset(l), out, in).noalias() = delta * pass.activations[l].transpose();
    Eigen::Map<Vector>(grad.data() + offset(l) + in * out, out) = delta.rowwise().sum();
    if (l > 0 || input_grad != nullptr) {
      Matrix prev = weight(l).transpose() * delta;
      delta = std::move(prev);
    }
  }
  if (input_grad != nullptr) {
    *input_grad = num_layers() == 0 ? out_grad : delta;
  }
  return grad;
}

AdamState AdamState::for_size(Eigen::Index n, double learning_rate) {
  AdamState s;
  s.m = Vector::Zero(n);
  s.v = Vector::Zero(n);
  s.learning_rate = learning_rate;
  return s;
}

void adam_step(Vector& params, const Vector& grads, AdamState& state) {
  require(params.size() == grads.size() && state.m.size() == params.size() && state.v.size() == params.size(),
          ErrorKind::DimMismatch, "adam_step vector lengths");
  ++state.step;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  params.array() -= state.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.epsilon);
}

}  // namespace reprl
