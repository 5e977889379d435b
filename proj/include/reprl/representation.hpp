#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "reprl/neuralnet.hpp"
#include "reprl/numerics.hpp"

namespace reprl {

/// Per-coordinate z-scoring. Empty stats mean identity.
struct NormStats {
  Vector mean;
  Vector std;

  bool empty() const { return mean.size() == 0; }
  /// Fits from sample columns; std entries are floored at 1e-8.
  static NormStats fit(const Matrix& samples);
  Matrix apply(const Matrix& raw) const;
  Vector apply(const Vector& raw) const;
};

/// Gaussian posterior f(z | theta): ReLU trunk followed by affine mean and
/// log-variance heads. In deterministic mode the posterior is a point mass at
/// the mean and the log-variance head is unused.
struct EncoderModel {
  DenseNet trunk;
  DenseNet mean_head;
  DenseNet logvar_head;
  bool deterministic = false;
  NormStats input_norm;

  /// Builds an encoder over `input_dim` parameters. An empty `hidden` list
  /// makes the trunk the identity map.
  static EncoderModel make(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden, Eigen::Index latent_dim,
                           bool deterministic, Engine& engine);

  Eigen::Index input_dim() const { return trunk.input_dim(); }
  Eigen::Index latent_dim() const { return mean_head.output_dim(); }
  Eigen::Index parameter_count() const;
  Vector params() const;
  void set_params(const Vector& params);
};

/// Linear-Gaussian return likelihood N(kappa^T z, noise_var) on the
/// normalized return scale. target_mean / target_std map raw returns to it.
struct ReturnDecoder {
  Vector kappa;
  double noise_var = 1.0;
  double target_mean = 0.0;
  double target_std = 1.0;

  double normalize(double raw) const { return (raw - target_mean) / target_std; }
  double denormalize(double normalized) const { return normalized * target_std + target_mean; }
};

struct Encoding {
  Matrix mu;     // latent_dim x batch
  Matrix sigma;  // zeros in deterministic mode
};

Encoding encode(const EncoderModel& enc, const Matrix& thetas);
std::pair<Vector, Vector> encode(const EncoderModel& enc, const Vector& theta);
/// Posterior means only, evaluated in column chunks to bound memory.
Matrix encode_means(const EncoderModel& enc, const Matrix& thetas);
/// Posterior means of theta + deltas and theta - deltas (column-aligned). The
/// first trunk layer is applied to theta and deltas separately, so the
/// perturbed parameter matrices are never formed.
std::pair<Matrix, Matrix> encode_means_antithetic(const EncoderModel& enc, const Vector& theta, const Matrix& deltas);

/// KL(N(mu, diag sigma^2) || N(0, I)).
double kl_gauss(const Vector& mu, const Vector& sigma);

struct ElboResult {
  double loss = 0.0;
  Vector encoder_grad;
  Vector decoder_grad;  // d loss / d kappa
};

/// Mean negative ELBO over the batch with fixed reparameterization noise
/// `xi` (latent_dim x batch): z = mu + sigma * xi. Targets are normalized.
ElboResult elbo_batch(const EncoderModel& enc, const ReturnDecoder& dec, const Matrix& thetas, const Vector& targets,
                      const Matrix& xi);
ElboResult elbo_loss(const EncoderModel& enc, const ReturnDecoder& dec, const Vector& theta, double target,
                     const Vector& xi);
ElboResult elbo_loss(const EncoderModel& enc, const ReturnDecoder& dec, const Vector& theta, double target,
                     const RngStream& stream);

/// kappa^T z on the normalized scale.
double predict_value(const ReturnDecoder& dec, const Vector& z);

/// One bandit/representation training record.
struct HistoryEntry {
  std::shared_ptr<const Vector> theta;
  Vector feature;
  double g_tilde = 0.0;
  long episode = 0;
};

struct RepresentationConfig {
  Eigen::Index latent_dim = 32;
  std::vector<Eigen::Index> hidden{32, 32};
  bool deterministic = false;
  int epochs = 3;
  Eigen::Index batch_size = 64;
  double learning_rate = 3e-4;
  double noise_var = 1.0;
  bool normalize_inputs = true;
  bool normalize_targets = true;
};

/// Encoder, decoder and their optimizer state.
struct Representation {
  EncoderModel encoder;
  ReturnDecoder decoder;
  AdamState adam;
  bool normalize_inputs = true;
  bool normalize_targets = true;

  static Representation make(Eigen::Index theta_dim, const RepresentationConfig& config, const RngStream& stream);
};

/// Shuffled minibatch Adam on the negative ELBO over `epochs` passes. Refits
/// input and target normalization on the given entries first. Returns the
/// mean loss of the last pass (or of a no-update evaluation if epochs == 0).
double train_representation(Representation& rep, std::span<const HistoryEntry> history, int epochs,
                            Eigen::Index batch_size, const RngStream& stream);

/// Rows "episode<TAB>z_1..z_d<TAB>g_tilde" with posterior-mean features.
void write_embeddings(std::ostream& out, const EncoderModel& enc, std::span<const HistoryEntry> history);

}  // namespace reprl
