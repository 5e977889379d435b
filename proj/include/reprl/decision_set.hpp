#pragma once

#include <vector>

#include "reprl/numerics.hpp"
#include "reprl/representation.hpp"

namespace reprl {

enum class DecisionSetKind { PolicySpace, LatentSpace, History };

/// Candidate policies with their aligned latent features (one column each).
struct DecisionSet {
  DecisionSetKind provenance = DecisionSetKind::PolicySpace;
  Matrix candidates;  // theta_dim x n
  Matrix features;    // latent_dim x n

  Eigen::Index size() const { return candidates.cols(); }
  Vector candidate(Eigen::Index i) const { return candidates.col(i); }
};

/// {theta + eps_i}, eps_i ~ N(0, nu^2 I), with encoder-mean features.
DecisionSet policy_space_set(const EncoderModel& enc, const Vector& theta, double nu, Eigen::Index n,
                             const RngStream& stream);

/// {z + eps_i} in latent space (latent_dim x n).
Matrix latent_space_set(const Vector& z, double nu, Eigen::Index n, const RngStream& stream);

struct InversionResult {
  Vector theta;
  double objective = 0.0;          // ||mu(theta) - z_target||^2 at theta
  double initial_objective = 0.0;  // same at theta_init
};

/// Gradient descent on ||mu(theta) - z_target||^2 from theta_init; returns the
/// best iterate seen.
InversionResult invert_latent(const EncoderModel& enc, const Vector& z_target, const Vector& theta_init, int steps,
                              double learning_rate);

/// n_per perturbations around each of the last `window` thetas (window <= 0
/// means all of them), concatenated oldest first.
DecisionSet history_set(const EncoderModel& enc, const std::vector<Vector>& history_thetas, double nu,
                        Eigen::Index n_per, int window, const RngStream& stream);

}  // namespace reprl
