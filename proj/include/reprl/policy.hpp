#pragma once

#include <optional>
#include <vector>

#include "reprl/neuralnet.hpp"
#include "reprl/numerics.hpp"

namespace reprl {

enum class PolicyKind { Linear, SoftmaxMlp };

/// Shape of a policy. Linear: action = Theta * state with Theta stored
/// column-major (action_dim x state_dim). SoftmaxMlp: tanh MLP over the state
/// with a softmax over action_dim logits.
struct PolicyArch {
  PolicyKind kind = PolicyKind::SoftmaxMlp;
  Eigen::Index state_dim = 0;
  Eigen::Index action_dim = 0;
  std::vector<Eigen::Index> hidden;

  Eigen::Index parameter_count() const;
  DenseNet make_net() const;
  bool discrete() const { return kind == PolicyKind::SoftmaxMlp; }
};

struct PolicyParams {
  PolicyArch arch;
  Vector theta;
};

struct Action {
  int index = -1;  // discrete action, or -1
  Vector value;    // continuous action (empty for discrete)
  std::optional<double> log_prob;
};

Vector softmax(const Vector& logits);

/// A policy bound to one parameter vector. Construction unpacks theta once so
/// rollouts do not re-allocate per step.
class Policy {
 public:
  Policy(const PolicyArch& arch, const Vector& theta);
  explicit Policy(const PolicyParams& params) : Policy(params.arch, params.theta) {}

  const PolicyArch& arch() const { return arch_; }

  /// Action probabilities (softmax policies only).
  Vector probabilities(const Vector& state) const;
  Action act(const Vector& state, Engine& engine) const;

  /// d/dtheta log pi(action | state).
  Vector logprob_grad(const Vector& state, int action) const;
  /// sum_t weights[t] * d/dtheta log pi(actions[t] | states[:, t]).
  Vector weighted_logprob_grad(const Matrix& states, const std::vector<int>& actions, const Vector& weights) const;

 private:
  PolicyArch arch_;
  DenseNet net_;      // softmax policies
  Matrix linear_;     // linear policies
};

Action act(const PolicyParams& params, const Vector& state, const RngStream& stream);
Vector logprob_grad(const PolicyParams& params, const Vector& state, int action);

/// Policy parameters initialized like a fresh network (uniform fan-in scaling
/// for MLPs, zeros for linear maps).
Vector initial_policy_params(const PolicyArch& arch, const RngStream& stream);

}  // namespace reprl
