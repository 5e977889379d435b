#include "reprl/drivers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_map>

#include "reprl/error.hpp"

namespace reprl {

namespace {

// Child stream labels. Fixed so that drivers sharing a label see the same
// draws (e.g. RepES and ES evaluate the same perturbations).
enum StreamLabel : std::uint64_t {
  kEvalNoise = 1,
  kRollouts = 2,
  kInner = 3,
  kTrain = 4,
  kDecision = 5,
  kScores = 6,
  kFeatures = 7,
  kInitPolicy = 11,
  kInitLearner = 12,
  kInitBaseline = 13,
  kRounds = 14,
};

double population_std(const Vector& v) {
  if (v.size() == 0) return 0.0;
  return std::sqrt((v.array() - v.mean()).square().mean());
}

StepStats trajectory_stats(const std::vector<Trajectory>& trajs, double gamma) {
  StepStats s;
  if (trajs.empty()) return s;
  s.best_return = -std::numeric_limits<double>::infinity();
  double total = 0.0, hits = 0.0;
  for (const Trajectory& t : trajs) {
    const double g = t.length() > 0 ? discounted_return(t, 0, gamma) : 0.0;
    total += g;
    s.best_return = std::max(s.best_return, g);
    hits += t.reached_goal ? 1.0 : 0.0;
  }
  s.mean_return = total / static_cast<double>(trajs.size());
  s.success_rate = hits / static_cast<double>(trajs.size());
  return s;
}

}  // namespace

std::string to_string(DriverKind kind) {
  switch (kind) {
    case DriverKind::Es: return "es";
    case DriverKind::RepEs: return "repes";
    case DriverKind::RepPg: return "reppg";
    case DriverKind::Reinforce: return "reinforce";
  }
  return "unknown";
}

DriverKind parse_driver(const std::string& name) {
  if (name == "es") return DriverKind::Es;
  if (name == "repes") return DriverKind::RepEs;
  if (name == "reppg") return DriverKind::RepPg;
  if (name == "reinforce") return DriverKind::Reinforce;
  throw Error(ErrorKind::ConfigError, "run.driver: unknown driver '" + name + "'");
}

void EsConfig::validate() const {
  require(eval_pairs >= 1, ErrorKind::ConfigError, "es.eval_pairs must be >= 1");
  require(decision_size >= 1, ErrorKind::ConfigError, "es.decision_size must be >= 1");
  require(mixing >= 0.0 && mixing <= 1.0, ErrorKind::ConfigError, "es.mixing must be in [0, 1]");
  require(nu > 0.0, ErrorKind::ConfigError, "es.nu must be positive");
  require(alpha >= 0.0, ErrorKind::ConfigError, "es.alpha must be >= 0");
  require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::ConfigError, "es.gamma must be in [0, 1]");
}

void PgConfig::validate() const {
  require(zeta >= 0.0, ErrorKind::ConfigError, "pg.zeta must be >= 0");
  require(collect >= 1, ErrorKind::ConfigError, "pg.collect must be >= 1");
  require(steps >= 0, ErrorKind::ConfigError, "pg.steps must be >= 0");
  require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::ConfigError, "pg.gamma must be in [0, 1]");
  require(decision.size >= 1, ErrorKind::ConfigError, "decision_set.size must be >= 1");
  require(decision.nu > 0.0, ErrorKind::ConfigError, "decision_set.nu must be positive");
}

StepStats EvaluationBatch::stats() const {
  std::vector<Trajectory> all;
  all.reserve(plus.size() + minus.size());
  all.insert(all.end(), plus.begin(), plus.end());
  all.insert(all.end(), minus.begin(), minus.end());
  StepStats s;
  const Eigen::Index k = returns_plus.size();
  Vector returns(2 * k);
  returns << returns_plus, returns_minus;
  s.mean_return = returns.mean();
  s.best_return = returns.maxCoeff();
  double hits = 0.0;
  for (const Trajectory& t : all) hits += t.reached_goal ? 1.0 : 0.0;
  s.success_rate = hits / static_cast<double>(all.size());
  return s;
}

EvaluationBatch evaluate_pairs(const Vector& theta, const PolicyArch& arch, const Environment& env, double nu,
                               Eigen::Index pairs, double gamma, const RngStream& stream) {
  require(pairs >= 1, ErrorKind::InvalidArgument, "need at least one evaluation pair");
  EvaluationBatch batch;
  batch.deltas.resize(theta.size(), pairs);
  Engine noise = stream.split(kEvalNoise).engine();
  fill_gaussian(noise, batch.deltas);
  batch.deltas *= nu;
  batch.returns_plus.resize(pairs);
  batch.returns_minus.resize(pairs);
  const RngStream rollouts = stream.split(kRollouts);
  for (Eigen::Index i = 0; i < pairs; ++i) {
    const auto u = static_cast<std::uint64_t>(i);
    batch.plus.push_back(env.rollout({arch, theta + batch.deltas.col(i)}, rollouts.split(2 * u)));
    batch.minus.push_back(env.rollout({arch, theta - batch.deltas.col(i)}, rollouts.split(2 * u + 1)));
    batch.returns_plus(i) = discounted_return(batch.plus.back(), 0, gamma);
    batch.returns_minus(i) = discounted_return(batch.minus.back(), 0, gamma);
  }
  return batch;
}

Vector es_gradient(const EvaluationBatch& batch) {
  const Eigen::Index k = batch.deltas.cols();
  Vector returns(2 * k);
  returns << batch.returns_plus, batch.returns_minus;
  const double sigma_r = std::max(population_std(returns), 1e-8);
  return batch.deltas * (batch.returns_plus - batch.returns_minus) / (sigma_r * static_cast<double>(k));
}

EsStepResult es_step(const Vector& theta, const PolicyArch& arch, const Environment& env, const EsConfig& cfg,
                     const RngStream& stream) {
  cfg.validate();
  const EvaluationBatch batch = evaluate_pairs(theta, arch, env, cfg.nu, cfg.eval_pairs, cfg.gamma, stream);
  return {theta + cfg.alpha * es_gradient(batch), batch.stats()};
}

LearnerState LearnerState::make(Eigen::Index theta_dim, const LearnerConfig& cfg, const RngStream& stream) {
  return LearnerState{Representation::make(theta_dim, cfg.representation, stream),
                      BanditState(cfg.representation.latent_dim, cfg.bandit.lambda),
                      {}};
}

void record_rollout(LearnerState& state, const std::shared_ptr<const Vector>& theta, const Trajectory& traj,
                    double gamma, long episode, const LearnerConfig& cfg, Engine& engine) {
  if (traj.length() == 0) return;
  for (int s = 0; s < cfg.inner_samples; ++s) {
    const InnerSample sample = sample_inner(traj, gamma, engine);
    state.history.push_back(HistoryEntry{theta, Vector(), sample.g_tilde, episode});
  }
}

double refresh_learner(LearnerState& state, const LearnerConfig& cfg, int epochs, const RngStream& stream) {
  auto& history = state.history;
  if (history.empty()) throw Error(ErrorKind::EmptyHistory, "no history to learn from");
  const std::size_t window = cfg.bandit.history_window;
  if (window > 0 && history.size() > window)
    history.erase(history.begin(), history.end() - static_cast<std::ptrdiff_t>(window));

  std::span<const HistoryEntry> all(history);
  const std::size_t train_n = cfg.train_window > 0 ? std::min(cfg.train_window, history.size()) : history.size();
  const double loss = train_representation(state.rep, all.last(train_n), epochs,
                                           cfg.representation.batch_size, stream.split(kTrain));

  // Features for every retained entry under the updated encoder.
  std::unordered_map<const Vector*, Eigen::Index> column;
  std::vector<const Vector*> unique;
  for (const HistoryEntry& e : history)
    if (column.emplace(e.theta.get(), static_cast<Eigen::Index>(unique.size())).second) unique.push_back(e.theta.get());
  Matrix thetas(state.rep.encoder.input_dim(), static_cast<Eigen::Index>(unique.size()));
  for (std::size_t i = 0; i < unique.size(); ++i) thetas.col(static_cast<Eigen::Index>(i)) = *unique[i];

  const Eigen::Index d = state.rep.encoder.latent_dim();
  Matrix features(d, static_cast<Eigen::Index>(history.size()));
  Vector targets(features.cols());
  if (cfg.bandit.sampled_features) {
    const Encoding enc = encode(state.rep.encoder, thetas);
    Engine engine = stream.split(kFeatures).engine();
    Vector xi(d);
    for (std::size_t i = 0; i < history.size(); ++i) {
      const Eigen::Index c = column.at(history[i].theta.get());
      fill_gaussian(engine, xi);
      features.col(static_cast<Eigen::Index>(i)) = enc.mu.col(c) + enc.sigma.col(c).cwiseProduct(xi);
    }
  } else {
    const Matrix means = encode_means(state.rep.encoder, thetas);
    for (std::size_t i = 0; i < history.size(); ++i)
      features.col(static_cast<Eigen::Index>(i)) = means.col(column.at(history[i].theta.get()));
  }
  for (std::size_t i = 0; i < history.size(); ++i) {
    history[i].feature = features.col(static_cast<Eigen::Index>(i));
    targets(static_cast<Eigen::Index>(i)) = state.rep.decoder.normalize(history[i].g_tilde);
  }
  state.bandit = BanditState::rebuild(features, targets, cfg.bandit.lambda);
  return loss;
}

RepEsStepResult repes_step(const Vector& theta, const PolicyArch& arch, const Environment& env, LearnerState& state,
                           const EsConfig& cfg, const LearnerConfig& learner, long episode, const RngStream& stream) {
  cfg.validate();
  const EvaluationBatch batch = evaluate_pairs(theta, arch, env, cfg.nu, cfg.eval_pairs, cfg.gamma, stream);

  Engine inner = stream.split(kInner).engine();
  for (Eigen::Index i = 0; i < cfg.eval_pairs; ++i) {
    const auto plus = std::make_shared<const Vector>(theta + batch.deltas.col(i));
    const auto minus = std::make_shared<const Vector>(theta - batch.deltas.col(i));
    record_rollout(state, plus, batch.plus[static_cast<std::size_t>(i)], cfg.gamma, episode, learner, inner);
    record_rollout(state, minus, batch.minus[static_cast<std::size_t>(i)], cfg.gamma, episode, learner, inner);
  }
  const double loss = refresh_learner(state, learner, learner.representation.epochs, stream);

  // Antithetic decision pairs scored by the bandit.
  const Eigen::Index n = cfg.decision_size;
  Matrix deltas(theta.size(), n);
  Engine noise = stream.split(kDecision).engine();
  fill_gaussian(noise, deltas);
  deltas *= cfg.nu;
  const auto [plus, minus] = encode_means_antithetic(state.rep.encoder, theta, deltas);
  Matrix features(plus.rows(), 2 * n);
  features << plus, minus;
  Engine scorer = stream.split(kScores).engine();
  const Vector scores = state.bandit.scores(features, learner.bandit.rule, scorer, learner.bandit.per_candidate_draws);
  const double sigma_v = std::max(population_std(scores), 1e-8);

  RepEsStepResult out;
  out.rep_gradient = deltas * (scores.head(n) - scores.tail(n)) / (static_cast<double>(n) * sigma_v);
  out.es_gradient = es_gradient(batch);
  out.theta = theta + cfg.alpha * ((1.0 - cfg.mixing) * out.rep_gradient + cfg.mixing * out.es_gradient);
  out.stats = batch.stats();
  out.stats.representation_loss = loss;
  return out;
}

ReinforceResult reinforce_loss(const std::vector<Trajectory>& trajs, const PolicyParams& params,
                               const DenseNet& baseline, double gamma) {
  if (!params.arch.discrete()) throw Error(ErrorKind::UnsupportedForLinear, "REINFORCE needs a softmax policy");
  Eigen::Index total = 0;
  for (const Trajectory& t : trajs) total += static_cast<Eigen::Index>(t.length());
  require(total > 0, ErrorKind::EmptyTrajectory, "REINFORCE batch has no steps");

  Matrix states(params.arch.state_dim, total);
  std::vector<int> actions;
  actions.reserve(static_cast<std::size_t>(total));
  Vector returns(total);
  Eigen::Index col = 0;
  for (const Trajectory& t : trajs) {
    double g = 0.0;
    const Eigen::Index len = static_cast<Eigen::Index>(t.length());
    for (Eigen::Index i = len; i-- > 0;) {
      g = t.rewards[static_cast<std::size_t>(i)] + gamma * g;
      returns(col + i) = g;
    }
    for (std::size_t i = 0; i < t.length(); ++i) {
      states.col(col + static_cast<Eigen::Index>(i)) = t.states[i];
      actions.push_back(t.actions[i].index);
    }
    col += len;
  }

  const DenseNet::Pass pass = baseline.forward(states);
  const Vector values = pass.output().row(0).transpose();
  const Vector advantage = returns - values;
  const double inv_t = 1.0 / static_cast<double>(total);

  const Policy policy(params);
  ReinforceResult out;
  out.policy_grad = policy.weighted_logprob_grad(states, actions, -inv_t * advantage);
  const Matrix value_grad = ((values - returns) * inv_t).transpose();
  out.baseline_grad = baseline.backward(pass, value_grad);
  out.baseline_loss = 0.5 * (values - returns).squaredNorm() * inv_t;

  DenseNet net = params.arch.make_net();
  net.set_params(params.theta);
  const Matrix logits = net.forward(states).output();
  double surrogate = 0.0;
  for (Eigen::Index t = 0; t < total; ++t) {
    const double top = logits.col(t).maxCoeff();
    const double log_z = top + std::log((logits.col(t).array() - top).exp().sum());
    surrogate -= (logits(actions[static_cast<std::size_t>(t)], t) - log_z) * advantage(t);
  }
  out.surrogate_loss = surrogate * inv_t;
  return out;
}

DenseNet make_baseline(const PolicyArch& arch, const std::vector<Eigen::Index>& hidden, const RngStream& stream) {
  std::vector<Eigen::Index> dims{arch.state_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  DenseNet net(dims, Activation::Tanh);
  Engine engine = stream.engine();
  net.init_uniform(engine);
  return net;
}

namespace {

std::vector<Trajectory> collect(const Vector& theta, const PolicyArch& arch, const Environment& env, int count,
                                const RngStream& stream) {
  const Policy policy(arch, theta);
  const RngStream rollouts = stream.split(kRollouts);
  std::vector<Trajectory> trajs;
  trajs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) trajs.push_back(env.run_policy(policy, rollouts.split(static_cast<std::uint64_t>(i))));
  return trajs;
}

void baseline_update(PgState& pg, const ReinforceResult& res) {
  Vector params = pg.baseline.params();
  adam_step(params, res.baseline_grad, pg.baseline_adam);
  pg.baseline.set_params(params);
}

// theta~ for one gradient step, chosen by the bandit from the configured set.
Vector choose_anchor(const Vector& theta, const LearnerState& state, const PgConfig& cfg, const LearnerConfig& learner,
                     const RngStream& decision, const RngStream& scores) {
  const EncoderModel& enc = state.rep.encoder;
  const DecisionSetConfig& ds = cfg.decision;
  switch (ds.kind) {
    case DecisionSetKind::PolicySpace: {
      const DecisionSet set = policy_space_set(enc, theta, ds.nu, ds.size, decision);
      return set.candidate(static_cast<Eigen::Index>(state.bandit.select(set.features, learner.bandit.rule, scores)));
    }
    case DecisionSetKind::History: {
      std::vector<Vector> past;
      const Vector* last = nullptr;
      for (const HistoryEntry& e : state.history)
        if (e.theta.get() != last) {
          last = e.theta.get();
          if (past.empty() || past.back() != *last) past.push_back(*last);
        }
      if (past.empty()) past.push_back(theta);
      const int window = std::max(1, ds.history_window);
      const Eigen::Index per = std::max<Eigen::Index>(1, ds.size / std::min<Eigen::Index>(window, static_cast<Eigen::Index>(past.size())));
      const DecisionSet set = history_set(enc, past, ds.nu, per, window, decision);
      return set.candidate(static_cast<Eigen::Index>(state.bandit.select(set.features, learner.bandit.rule, scores)));
    }
    case DecisionSetKind::LatentSpace: {
      const Vector z = encode(enc, theta).first;
      const Matrix latents = latent_space_set(z, ds.nu, ds.size, decision);
      const auto pick = static_cast<Eigen::Index>(state.bandit.select(latents, learner.bandit.rule, scores));
      return invert_latent(enc, latents.col(pick), theta, ds.inversion_steps, ds.inversion_lr).theta;
    }
  }
  return theta;
}

}  // namespace

PgStepResult reinforce_step(const Vector& theta, const PolicyArch& arch, const Environment& env, PgState& pg,
                            const PgConfig& cfg, const RngStream& stream) {
  cfg.validate();
  const std::vector<Trajectory> trajs = collect(theta, arch, env, cfg.collect, stream);
  PgStepResult out;
  out.stats = trajectory_stats(trajs, cfg.gamma);
  out.theta = theta;
  for (int step = 0; step < cfg.steps; ++step) {
    const ReinforceResult res = reinforce_loss(trajs, {arch, out.theta}, pg.baseline, cfg.gamma);
    out.theta -= cfg.learning_rate * res.policy_grad;
    baseline_update(pg, res);
  }
  return out;
}

PgStepResult reppg_step(const Vector& theta, const PolicyArch& arch, const Environment& env, PgState& pg,
                        LearnerState& state, const PgConfig& cfg, const LearnerConfig& learner, long episode,
                        const RngStream& stream) {
  cfg.validate();
  const std::vector<Trajectory> trajs = collect(theta, arch, env, cfg.collect, stream);
  const auto shared_theta = std::make_shared<const Vector>(theta);
  Engine inner = stream.split(kInner).engine();
  for (const Trajectory& t : trajs) record_rollout(state, shared_theta, t, cfg.gamma, episode, learner, inner);

  PgStepResult out;
  out.stats = trajectory_stats(trajs, cfg.gamma);
  out.stats.representation_loss = refresh_learner(state, learner, learner.representation.epochs, stream);
  out.theta = theta;
  for (int step = 0; step < cfg.steps; ++step) {
    const auto s = static_cast<std::uint64_t>(step);
    const Vector anchor = choose_anchor(out.theta, state, cfg, learner, stream.split(kDecision).split(s),
                                        stream.split(kScores).split(s));
    out.anchors.push_back(anchor);
    const ReinforceResult res = reinforce_loss(trajs, {arch, out.theta}, pg.baseline, cfg.gamma);
    Vector grad = res.policy_grad;
    if (cfg.zeta > 0.0) {
      const Vector diff = out.theta - anchor;
      const double dist = diff.norm();
      if (dist > 0.0) grad += cfg.zeta * diff / dist;
    }
    out.theta -= cfg.learning_rate * grad;
    baseline_update(pg, res);
  }
  return out;
}

TrainingResult run_training(const Environment& env, const TrainingConfig& cfg, std::uint64_t seed,
                            const std::string& config_hash) {
  require(cfg.rounds >= 0, ErrorKind::ConfigError, "run.rounds must be >= 0");
  const PolicyArch arch = env.default_arch();
  const bool policy_gradient = cfg.driver == DriverKind::RepPg || cfg.driver == DriverKind::Reinforce;
  if (policy_gradient && !arch.discrete())
    throw Error(ErrorKind::ConfigError, "run.driver: " + to_string(cfg.driver) + " needs a discrete-action environment");
  if (policy_gradient) cfg.pg.validate();
  else cfg.es.validate();

  const RngStream root(seed);
  TrainingResult result;
  result.log.driver = to_string(cfg.driver);
  result.log.seed = seed;
  result.log.config_hash = config_hash;
  result.theta = initial_policy_params(arch, root.split(kInitPolicy));

  if (cfg.driver == DriverKind::RepEs || cfg.driver == DriverKind::RepPg)
    result.learner = LearnerState::make(result.theta.size(), cfg.learner, root.split(kInitLearner));
  std::optional<PgState> pg;
  if (policy_gradient) {
    DenseNet baseline = make_baseline(arch, cfg.pg.baseline_hidden, root.split(kInitBaseline));
    AdamState adam = AdamState::for_size(baseline.parameter_count(), cfg.pg.baseline_lr);
    pg = PgState{std::move(baseline), std::move(adam)};
  }

  const auto start = std::chrono::steady_clock::now();
  const RngStream rounds = root.split(kRounds);
  for (long k = 1; k <= cfg.rounds; ++k) {
    const RngStream stream = rounds.split(static_cast<std::uint64_t>(k));
    StepStats stats;
    switch (cfg.driver) {
      case DriverKind::Es: {
        EsStepResult r = es_step(result.theta, arch, env, cfg.es, stream);
        result.theta = std::move(r.theta);
        stats = r.stats;
        break;
      }
      case DriverKind::RepEs: {
        RepEsStepResult r = repes_step(result.theta, arch, env, *result.learner, cfg.es, cfg.learner, k, stream);
        result.theta = std::move(r.theta);
        stats = r.stats;
        break;
      }
      case DriverKind::RepPg: {
        PgStepResult r = reppg_step(result.theta, arch, env, *pg, *result.learner, cfg.pg, cfg.learner, k, stream);
        result.theta = std::move(r.theta);
        stats = r.stats;
        break;
      }
      case DriverKind::Reinforce: {
        PgStepResult r = reinforce_step(result.theta, arch, env, *pg, cfg.pg, stream);
        result.theta = std::move(r.theta);
        stats = r.stats;
        break;
      }
    }
    MetricsRecord rec;
    rec.round = k;
    rec.mean_return = stats.mean_return;
    rec.best_return = stats.best_return;
    rec.success_rate = stats.success_rate;
    rec.representation_loss = stats.representation_loss;
    if (result.learner) {
      rec.w_norm = result.learner->bandit.estimate().norm();
      rec.log_det_v = result.learner->bandit.log_det();
    }
    rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.append(rec);
  }
  return result;
}

}  // namespace reprl
