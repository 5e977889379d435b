#include "reprl/decision_set.hpp"

#include <algorithm>
#include <string>

#include "reprl/error.hpp"

namespace reprl {

namespace {

void check_sampling(double nu, Eigen::Index n) {
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "InvalidCount: decision set size must be >= 1");
  require(nu > 0.0, ErrorKind::InvalidArgument, "decision set noise nu must be positive");
}

}  // namespace

DecisionSet policy_space_set(const EncoderModel& enc, const Vector& theta, double nu, Eigen::Index n,
                             const RngStream& stream) {
  check_sampling(nu, n);
  require(theta.size() == enc.input_dim(), ErrorKind::DimMismatch, "theta dim does not match encoder");
  DecisionSet set;
  set.provenance = DecisionSetKind::PolicySpace;
  set.candidates.resize(theta.size(), n);
  Engine engine = stream.engine();
  fill_gaussian(engine, set.candidates);
  set.candidates *= nu;
  set.candidates.colwise() += theta;
  set.features = encode_means(enc, set.candidates);
  return set;
}

Matrix latent_space_set(const Vector& z, double nu, Eigen::Index n, const RngStream& stream) {
  check_sampling(nu, n);
  Matrix out(z.size(), n);
  Engine engine = stream.engine();
  fill_gaussian(engine, out);
  out *= nu;
  out.colwise() += z;
  return out;
}

InversionResult invert_latent(const EncoderModel& enc, const Vector& z_target, const Vector& theta_init, int steps,
                              double learning_rate) {
  require(steps >= 0, ErrorKind::InvalidArgument, "inversion steps must be >= 0");
  require(z_target.size() == enc.latent_dim() && theta_init.size() == enc.input_dim(), ErrorKind::DimMismatch,
          "inversion dims");

  // Objective and gradient with respect to the raw (unnormalized) theta.
  auto evaluate = [&](const Vector& theta, Vector* grad) {
    const Matrix x = enc.input_norm.apply(Matrix(theta));
    const DenseNet::Pass trunk = enc.trunk.forward(x);
    const DenseNet::Pass head = enc.mean_head.forward(trunk.output());
    const Vector diff = head.output().col(0) - z_target;
    if (grad != nullptr) {
      Matrix d_hidden, d_input;
      enc.mean_head.backward(head, 2.0 * diff, &d_hidden);
      enc.trunk.backward(trunk, d_hidden, &d_input);
      *grad = d_input.col(0);
      if (!enc.input_norm.empty()) *grad = grad->cwiseQuotient(enc.input_norm.std);
    }
    return diff.squaredNorm();
  };

  InversionResult result;
  result.theta = theta_init;
  result.initial_objective = evaluate(theta_init, nullptr);
  result.objective = result.initial_objective;

  Vector theta = theta_init;
  Vector grad;
  for (int step = 0; step < steps; ++step) {
    evaluate(theta, &grad);
    theta -= learning_rate * grad;
    const double value = evaluate(theta, nullptr);
    if (value < result.objective) {
      result.objective = value;
      result.theta = theta;
    }
  }
  return result;
}

DecisionSet history_set(const EncoderModel& enc, const std::vector<Vector>& history_thetas, double nu,
                        Eigen::Index n_per, int window, const RngStream& stream) {
  if (history_thetas.empty()) throw Error(ErrorKind::EmptyHistory, "history_set needs at least one policy");
  check_sampling(nu, n_per);
  const std::size_t count =
      window <= 0 ? history_thetas.size() : std::min(history_thetas.size(), static_cast<std::size_t>(window));
  const std::size_t first = history_thetas.size() - count;
  const Eigen::Index p = enc.input_dim();

  DecisionSet set;
  set.provenance = DecisionSetKind::History;
  set.candidates.resize(p, static_cast<Eigen::Index>(count) * n_per);
  Engine engine = stream.engine();
  fill_gaussian(engine, set.candidates);
  set.candidates *= nu;
  for (std::size_t k = 0; k < count; ++k) {
    const Vector& center = history_thetas[first + k];
    require(center.size() == p, ErrorKind::DimMismatch, "history theta dim");
    set.candidates.middleCols(static_cast<Eigen::Index>(k) * n_per, n_per).colwise() += center;
  }
  set.features = encode_means(enc, set.candidates);
  return set;
}

}  // namespace reprl
