#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "reprl/decision_set.hpp"
#include "reprl/environments.hpp"
#include "reprl/linear_bandit.hpp"
#include "reprl/metrics.hpp"
#include "reprl/neuralnet.hpp"
#include "reprl/representation.hpp"

namespace reprl {

enum class DriverKind { Es, RepEs, RepPg, Reinforce };

std::string to_string(DriverKind kind);
DriverKind parse_driver(const std::string& name);

struct BanditConfig {
  double lambda = 0.1;
  SelectionRule rule;
  bool per_candidate_draws = false;
  /// Most recent history entries kept for rebuilding (0 = all).
  std::size_t history_window = 0;
  /// Use a posterior sample instead of the posterior mean as the feature.
  bool sampled_features = false;
};

/// Everything the representation-driven drivers share.
struct LearnerConfig {
  BanditConfig bandit;
  RepresentationConfig representation;
  /// Most recent history entries the encoder trains on each round (0 = all).
  std::size_t train_window = 0;
  /// Return-to-go samples drawn from each stored trajectory.
  int inner_samples = 4;
};

struct EsConfig {
  double nu = 0.1;
  double alpha = 0.1;
  Eigen::Index eval_pairs = 50;
  Eigen::Index decision_size = 2048;
  double mixing = 0.2;  // weight of the sampled-return ES gradient
  double gamma = 1.0;

  void validate() const;
};

struct DecisionSetConfig {
  DecisionSetKind kind = DecisionSetKind::PolicySpace;
  double nu = 0.1;
  Eigen::Index size = 2048;
  int history_window = 20;
  int inversion_steps = 200;
  double inversion_lr = 1e-2;
};

struct PgConfig {
  double zeta = 1.0;
  double learning_rate = 0.05;
  int collect = 10;  // rollouts per round
  int steps = 4;     // gradient steps per round
  double gamma = 1.0;
  std::vector<Eigen::Index> baseline_hidden{32, 32};
  double baseline_lr = 1e-2;
  DecisionSetConfig decision;

  void validate() const;
};

struct StepStats {
  double mean_return = 0.0;
  double best_return = 0.0;
  double success_rate = 0.0;
  double representation_loss = 0.0;
};

/// Antithetic evaluation set {theta +- delta_i}, delta_i ~ N(0, nu^2 I), and
/// the discounted returns of one rollout per member.
struct EvaluationBatch {
  Matrix deltas;  // theta_dim x K
  std::vector<Trajectory> plus;
  std::vector<Trajectory> minus;
  Vector returns_plus;
  Vector returns_minus;

  StepStats stats() const;
};

EvaluationBatch evaluate_pairs(const Vector& theta, const PolicyArch& arch, const Environment& env, double nu,
                               Eigen::Index pairs, double gamma, const RngStream& stream);

/// (1 / (sigma_R K)) sum_i [G(theta + delta_i) - G(theta - delta_i)] delta_i
/// with sigma_R the std of all 2K returns (floored at 1e-8).
Vector es_gradient(const EvaluationBatch& batch);

struct EsStepResult {
  Vector theta;
  StepStats stats;
};

/// theta' = theta + alpha * es_gradient(evaluation batch).
EsStepResult es_step(const Vector& theta, const PolicyArch& arch, const Environment& env, const EsConfig& cfg,
                     const RngStream& stream);

/// Encoder, decoder, bandit and history carried between rounds.
struct LearnerState {
  Representation rep;
  BanditState bandit;
  std::vector<HistoryEntry> history;

  static LearnerState make(Eigen::Index theta_dim, const LearnerConfig& cfg, const RngStream& stream);
};

/// Appends inner-trajectory samples of `traj` (generated by `theta`).
void record_rollout(LearnerState& state, const std::shared_ptr<const Vector>& theta, const Trajectory& traj,
                    double gamma, long episode, const LearnerConfig& cfg, Engine& engine);

/// Trims history to the configured window, retrains the representation and
/// rebuilds the bandit from every retained entry's current feature. Returns
/// the mean representation loss.
double refresh_learner(LearnerState& state, const LearnerConfig& cfg, int epochs, const RngStream& stream);

struct RepEsStepResult {
  Vector theta;
  StepStats stats;
  Vector rep_gradient;  // bandit-score gradient g_t
  Vector es_gradient;   // sampled-return gradient
};

RepEsStepResult repes_step(const Vector& theta, const PolicyArch& arch, const Environment& env, LearnerState& state,
                           const EsConfig& cfg, const LearnerConfig& learner, long episode, const RngStream& stream);

struct ReinforceResult {
  Vector policy_grad;    // gradient of the surrogate loss
  Vector baseline_grad;  // gradient of the mean squared-error / 2 baseline loss
  double surrogate_loss = 0.0;
  double baseline_loss = 0.0;
};

/// L = -(1/T) sum_t log pi(a_t | s_t) (G_t - b(s_t)) over all T steps of the
/// batch, with the advantage held fixed; baseline fit by squared error to G_t.
ReinforceResult reinforce_loss(const std::vector<Trajectory>& trajs, const PolicyParams& params,
                               const DenseNet& baseline, double gamma);

DenseNet make_baseline(const PolicyArch& arch, const std::vector<Eigen::Index>& hidden, const RngStream& stream);

struct PgState {
  DenseNet baseline;
  AdamState baseline_adam;
};

struct PgStepResult {
  Vector theta;
  StepStats stats;
  std::vector<Vector> anchors;  // theta~ picked at each gradient step
};

/// Plain REINFORCE with a learned baseline: collect, then `steps` descents.
PgStepResult reinforce_step(const Vector& theta, const PolicyArch& arch, const Environment& env, PgState& pg,
                            const PgConfig& cfg, const RngStream& stream);

/// REINFORCE regularized toward the bandit-chosen theta~ by zeta ||theta - theta~||.
PgStepResult reppg_step(const Vector& theta, const PolicyArch& arch, const Environment& env, PgState& pg,
                        LearnerState& state, const PgConfig& cfg, const LearnerConfig& learner, long episode,
                        const RngStream& stream);

struct TrainingConfig {
  DriverKind driver = DriverKind::RepEs;
  long rounds = 300;
  EsConfig es;
  PgConfig pg;
  LearnerConfig learner;
};

struct TrainingResult {
  MetricsLog log;
  Vector theta;
  std::optional<LearnerState> learner;
};

/// Runs `rounds` rounds of the configured driver from a seed-derived initial
/// policy. Deterministic in (config, seed).
TrainingResult run_training(const Environment& env, const TrainingConfig& cfg, std::uint64_t seed,
                            const std::string& config_hash = "");

}  // namespace reprl
