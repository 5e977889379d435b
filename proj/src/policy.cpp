#include "reprl/policy.hpp"

#include <cmath>
#include <string>

#include "reprl/error.hpp"

namespace reprl {

Eigen::Index PolicyArch::parameter_count() const {
  if (kind == PolicyKind::Linear) return state_dim * action_dim;
  return make_net().parameter_count();
}

DenseNet PolicyArch::make_net() const {
  std::vector<Eigen::Index> dims{state_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(action_dim);
  return DenseNet(dims, Activation::Tanh, Activation::None);
}

Vector softmax(const Vector& logits) {
  const double top = logits.maxCoeff();
  Vector p = (logits.array() - top).exp();
  return p / p.sum();
}

Policy::Policy(const PolicyArch& arch, const Vector& theta) : arch_(arch) {
  require(theta.size() == arch.parameter_count(), ErrorKind::DimMismatch,
          "policy theta has " + std::to_string(theta.size()) + " entries, arch needs " +
              std::to_string(arch.parameter_count()));
  if (arch.kind == PolicyKind::Linear) {
    linear_ = Eigen::Map<const Matrix>(theta.data(), arch.action_dim, arch.state_dim);
  } else {
    net_ = arch.make_net();
    net_.set_params(theta);
  }
}

Vector Policy::probabilities(const Vector& state) const {
  require(arch_.discrete(), ErrorKind::UnsupportedForLinear, "probabilities of a linear policy");
  require(state.size() == arch_.state_dim, ErrorKind::DimMismatch, "state dim");
  return softmax(net_.forward(state));
}

Action Policy::act(const Vector& state, Engine& engine) const {
  require(state.size() == arch_.state_dim, ErrorKind::DimMismatch, "state dim");
  Action a;
  if (arch_.kind == PolicyKind::Linear) {
    a.value = linear_ * state;
    return a;
  }
  const Vector p = probabilities(state);
  const double u = engine.uniform();
  double cumulative = 0.0;
  a.index = static_cast<int>(p.size()) - 1;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    cumulative += p(i);
    if (u < cumulative) {
      a.index = static_cast<int>(i);
      break;
    }
  }
  a.log_prob = std::log(p(a.index));
  return a;
}

Vector Policy::logprob_grad(const Vector& state, int action) const {
  return weighted_logprob_grad(Matrix(state), {action}, Vector::Ones(1));
}

Vector Policy::weighted_logprob_grad(const Matrix& states, const std::vector<int>& actions,
                                     const Vector& weights) const {
  if (!arch_.discrete()) throw Error(ErrorKind::UnsupportedForLinear, "log-prob gradient needs a softmax policy");
  require(states.rows() == arch_.state_dim, ErrorKind::DimMismatch, "state dim");
  require(static_cast<Eigen::Index>(actions.size()) == states.cols() && weights.size() == states.cols(),
          ErrorKind::DimMismatch, "one action and weight per state");
  const DenseNet::Pass pass = net_.forward(states);
  Matrix out_grad(arch_.action_dim, states.cols());
  for (Eigen::Index t = 0; t < states.cols(); ++t) {
    const int a = actions[static_cast<std::size_t>(t)];
    require(a >= 0 && a < arch_.action_dim, ErrorKind::IndexOutOfRange, "action index");
    // d log softmax_a / d logits = onehot(a) - p
    out_grad.col(t) = -softmax(pass.output().col(t));
    out_grad(a, t) += 1.0;
    out_grad.col(t) *= weights(t);
  }
  return net_.backward(pass, out_grad);
}

Action act(const PolicyParams& params, const Vector& state, const RngStream& stream) {
  Engine engine = stream.engine();
  return Policy(params).act(state, engine);
}

Vector logprob_grad(const PolicyParams& params, const Vector& state, int action) {
  if (!params.arch.discrete()) throw Error(ErrorKind::UnsupportedForLinear, "log-prob gradient needs a softmax policy");
  return Policy(params).logprob_grad(state, action);
}

Vector initial_policy_params(const PolicyArch& arch, const RngStream& stream) {
  if (arch.kind == PolicyKind::Linear) return Vector::Zero(arch.parameter_count());
  DenseNet net = arch.make_net();
  Engine engine = stream.engine();
  net.init_uniform(engine);
  return net.params();
}

}  // namespace reprl
