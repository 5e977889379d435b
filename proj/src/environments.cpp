#include "reprl/environments.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "reprl/error.hpp"

namespace reprl {

Matrix Trajectory::state_matrix() const {
  if (states.empty()) return {};
  Matrix out(states.front().size(), static_cast<Eigen::Index>(states.size()));
  for (std::size_t t = 0; t < states.size(); ++t) out.col(static_cast<Eigen::Index>(t)) = states[t];
  return out;
}

std::vector<int> Trajectory::action_indices() const {
  std::vector<int> out;
  out.reserve(actions.size());
  for (const Action& a : actions) out.push_back(a.index);
  return out;
}

double discounted_return(const Trajectory& traj, std::size_t start, double gamma) {
  if (start >= traj.length())
    throw Error(ErrorKind::IndexOutOfRange,
                "start " + std::to_string(start) + " outside trajectory of length " + std::to_string(traj.length()));
  double g = 0.0;
  for (std::size_t t = traj.length(); t-- > start;) g = traj.rewards[t] + gamma * g;
  return g;
}

InnerSample sample_inner(const Trajectory& traj, double gamma, Engine& engine) {
  if (traj.length() == 0) throw Error(ErrorKind::EmptyTrajectory, "sample_inner on an empty trajectory");
  InnerSample s;
  s.start = engine.index(traj.length());
  s.g_tilde = discounted_return(traj, s.start, gamma);
  return s;
}

InnerSample sample_inner(const Trajectory& traj, double gamma, const RngStream& stream) {
  Engine engine = stream.engine();
  return sample_inner(traj, gamma, engine);
}

Trajectory Environment::rollout(const PolicyParams& params, const RngStream& stream) const {
  check_arch(params.arch);
  return run_policy(Policy(params), stream);
}

void Environment::check_arch(const PolicyArch& arch) const {
  require(arch.state_dim == state_dim() && arch.action_dim == action_dim() && arch.discrete() == discrete_actions(),
          ErrorKind::DimMismatch, "policy architecture does not fit environment " + name());
}

// --- GridWorld -------------------------------------------------------------

GridWorldEnv::GridWorldEnv(GridWorldConfig config) : config_(std::move(config)) {
  require(config_.width > 0 && config_.height > 0 && config_.horizon > 0, ErrorKind::InvalidArgument,
          "gridworld dims and horizon must be positive");
  require(config_.a1 > 0 && config_.a2 > 0 && config_.noise_std >= 0, ErrorKind::InvalidArgument,
          "gridworld widths must be positive and noise nonnegative");
  auto inside = [&](int x, int y) { return x >= 1 && x <= config_.width && y >= 1 && y <= config_.height; };
  require(inside(config_.start_x, config_.start_y) && inside(config_.goal_x, config_.goal_y),
          ErrorKind::InvalidArgument, "gridworld start and goal must be inside the grid");
}

PolicyArch GridWorldEnv::default_arch() const {
  return PolicyArch{PolicyKind::SoftmaxMlp, state_dim(), action_dim(), config_.policy_hidden};
}

double GridWorldEnv::mean_reward(int x, int y) const {
  const auto bump = [](double dx, double dy, double width) { return std::exp(-(dx * dx + dy * dy) / width); };
  double mu = config_.r1 * bump(x - config_.x1, y - config_.y1, config_.a1) +
              config_.r2 * bump(x - config_.x2, y - config_.y2, config_.a2);
  if (x == config_.goal_x && y == config_.goal_y) mu += config_.r3;
  return mu;
}

Vector GridWorldEnv::encode(int x, int y) const {
  Vector s = Vector::Zero(state_dim());
  s((y - 1) * config_.width + (x - 1)) = 1.0;
  return s;
}

std::pair<int, int> GridWorldEnv::move(int x, int y, int action) const {
  switch (action) {
    case 0: y = std::min(y + 1, config_.height); break;
    case 1: y = std::max(y - 1, 1); break;
    case 2: x = std::max(x - 1, 1); break;
    case 3: x = std::min(x + 1, config_.width); break;
    default: throw Error(ErrorKind::IndexOutOfRange, "gridworld action " + std::to_string(action));
  }
  return {x, y};
}

Trajectory GridWorldEnv::run_policy(const Policy& policy, const RngStream& stream) const {
  check_arch(policy.arch());
  Engine engine = stream.engine();
  Trajectory traj;
  traj.stream_id = stream.stream_id();
  int x = config_.start_x, y = config_.start_y;
  for (int t = 0; t < config_.horizon; ++t) {
    Vector state = encode(x, y);
    Action a = policy.act(state, engine);
    std::tie(x, y) = move(x, y, a.index);
    const double reward = mean_reward(x, y) + config_.noise_std * engine.normal();
    traj.states.push_back(std::move(state));
    traj.actions.push_back(std::move(a));
    traj.rewards.push_back(reward);
    if (x == config_.goal_x && y == config_.goal_y) {
      traj.reached_goal = true;
      if (config_.terminate_at_goal) break;
    }
  }
  return traj;
}

// --- SparseLine ------------------------------------------------------------

SparseLineEnv::SparseLineEnv(SparseLineConfig config) : config_(config) {
  require(config_.horizon > 0 && config_.interval > 0 && config_.control_cost >= 0 && config_.step_scale > 0,
          ErrorKind::InvalidArgument, "sparseline constants out of range");
}

PolicyArch SparseLineEnv::default_arch() const { return PolicyArch{PolicyKind::Linear, 2, 1, {}}; }

Trajectory SparseLineEnv::run_policy(const Policy& policy, const RngStream& stream) const {
  check_arch(policy.arch());
  Engine engine = stream.engine();
  Trajectory traj;
  traj.stream_id = stream.stream_id();
  double x = 0.0;
  long best_milestone = 0;
  for (int t = 0; t < config_.horizon; ++t) {
    Vector state(2);
    state << x, 1.0;
    Action act = policy.act(state, engine);
    const double a = std::clamp(act.value(0), -1.0, 1.0);
    x += config_.step_scale * a;
    // Small slack so that accumulated steps landing on k * interval count.
    const long milestone = static_cast<long>(std::floor(std::abs(x) / config_.interval + 1e-9));
    double reward = -config_.control_cost * a * a;
    if (milestone > best_milestone) {
      reward += config_.milestone_reward;
      best_milestone = milestone;
      traj.reached_goal = true;
    }
    traj.states.push_back(std::move(state));
    traj.actions.push_back(std::move(act));
    traj.rewards.push_back(reward);
  }
  return traj;
}

// --- Tabular ---------------------------------------------------------------

void TabularMDP::validate() const {
  require(num_states > 0 && num_actions > 0, ErrorKind::InvalidArgument, "MDP needs states and actions");
  require(static_cast<Eigen::Index>(transition.size()) == num_actions, ErrorKind::DimMismatch,
          "one transition matrix per action");
  for (const Matrix& t : transition) {
    require(t.rows() == num_states && t.cols() == num_states, ErrorKind::DimMismatch, "transition shape");
    require((t.array() >= 0.0).all(), ErrorKind::InvalidArgument, "negative transition probability");
    require(((t.rowwise().sum().array() - 1.0).abs() <= 1e-12).all(), ErrorKind::InvalidArgument,
            "transition rows must sum to 1");
  }
  require(reward.rows() == num_states && reward.cols() == num_actions, ErrorKind::DimMismatch, "reward shape");
  require(initial.size() == num_states && std::abs(initial.sum() - 1.0) <= 1e-12 && (initial.array() >= 0).all(),
          ErrorKind::InvalidArgument, "initial distribution");
  require(gamma >= 0.0 && gamma < 1.0, ErrorKind::InvalidArgument, "gamma must be in [0, 1)");
}

namespace {

Vector random_simplex(Eigen::Index n, Engine& engine) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = -std::log(1.0 - engine.uniform());  // Exp(1)
  return v / v.sum();
}

void check_policy_matrix(const TabularMDP& mdp, const Matrix& pi) {
  require(pi.rows() == mdp.num_states && pi.cols() == mdp.num_actions, ErrorKind::DimMismatch, "policy shape");
  require(((pi.rowwise().sum().array() - 1.0).abs() <= 1e-9).all() && (pi.array() >= 0).all(),
          ErrorKind::InvalidArgument, "policy rows must be distributions");
}

int sample_categorical(const Eigen::Ref<const Vector>& p, Engine& engine) {
  const double u = engine.uniform();
  double c = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    c += p(i);
    if (u < c) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

}  // namespace

TabularMDP random_mdp(Eigen::Index num_states, Eigen::Index num_actions, double gamma, Engine& engine) {
  TabularMDP m;
  m.num_states = num_states;
  m.num_actions = num_actions;
  m.gamma = gamma;
  for (Eigen::Index a = 0; a < num_actions; ++a) {
    Matrix t(num_states, num_states);
    for (Eigen::Index s = 0; s < num_states; ++s) t.row(s) = random_simplex(num_states, engine).transpose();
    m.transition.push_back(std::move(t));
  }
  m.reward.resize(num_states, num_actions);
  for (Eigen::Index s = 0; s < num_states; ++s)
    for (Eigen::Index a = 0; a < num_actions; ++a) m.reward(s, a) = engine.uniform();
  m.initial = random_simplex(num_states, engine);
  return m;
}

Matrix random_stochastic_policy(Eigen::Index num_states, Eigen::Index num_actions, Engine& engine) {
  Matrix pi(num_states, num_actions);
  for (Eigen::Index s = 0; s < num_states; ++s) pi.row(s) = random_simplex(num_actions, engine).transpose();
  return pi;
}

TabularEnv::TabularEnv(TabularMDP mdp, int horizon) : mdp_(std::move(mdp)), horizon_(horizon) {
  mdp_.validate();
  require(horizon > 0, ErrorKind::InvalidArgument, "horizon must be positive");
}

PolicyArch TabularEnv::default_arch() const {
  return PolicyArch{PolicyKind::SoftmaxMlp, mdp_.num_states, mdp_.num_actions, {}};
}

Trajectory TabularEnv::run_policy(const Policy& policy, const RngStream& stream) const {
  check_arch(policy.arch());
  Engine engine = stream.engine();
  Trajectory traj;
  traj.stream_id = stream.stream_id();
  int s = sample_categorical(mdp_.initial, engine);
  for (int t = 0; t < horizon_; ++t) {
    Vector state = Vector::Zero(mdp_.num_states);
    state(s) = 1.0;
    Action a = policy.act(state, engine);
    traj.rewards.push_back(mdp_.reward(s, a.index));
    const int next = sample_categorical(mdp_.transition[static_cast<std::size_t>(a.index)].row(s).transpose(), engine);
    traj.states.push_back(std::move(state));
    traj.actions.push_back(std::move(a));
    s = next;
  }
  return traj;
}

Trajectory rollout_tabular(const TabularMDP& mdp, const Matrix& pi, int horizon, const RngStream& stream) {
  check_policy_matrix(mdp, pi);
  Engine engine = stream.engine();
  Trajectory traj;
  traj.stream_id = stream.stream_id();
  int s = sample_categorical(mdp.initial, engine);
  for (int t = 0; t < horizon; ++t) {
    Action a;
    a.index = sample_categorical(pi.row(s).transpose(), engine);
    a.log_prob = std::log(pi(s, a.index));
    Vector state = Vector::Zero(mdp.num_states);
    state(s) = 1.0;
    traj.rewards.push_back(mdp.reward(s, a.index));
    traj.states.push_back(std::move(state));
    const int next = sample_categorical(mdp.transition[static_cast<std::size_t>(a.index)].row(s).transpose(), engine);
    traj.actions.push_back(std::move(a));
    s = next;
  }
  return traj;
}

// --- Linear objective -----------------------------------------------------

LinearObjectiveEnv::LinearObjectiveEnv(Vector slope, double noise_std)
    : slope_(std::move(slope)), noise_std_(noise_std) {
  require(slope_.size() > 0, ErrorKind::InvalidArgument, "slope must be nonempty");
}

PolicyArch LinearObjectiveEnv::default_arch() const {
  return PolicyArch{PolicyKind::Linear, 1, slope_.size(), {}};
}

Trajectory LinearObjectiveEnv::rollout(const PolicyParams& params, const RngStream& stream) const {
  require(params.theta.size() == slope_.size(), ErrorKind::DimMismatch, "linear objective theta size");
  Engine engine = stream.engine();
  Trajectory traj;
  traj.stream_id = stream.stream_id();
  traj.states.push_back(Vector::Ones(1));
  Action a;
  a.value = params.theta;
  traj.actions.push_back(std::move(a));
  traj.rewards.push_back(slope_.dot(params.theta) + (noise_std_ > 0 ? noise_std_ * engine.normal() : 0.0));
  return traj;
}

Trajectory LinearObjectiveEnv::run_policy(const Policy& policy, const RngStream& stream) const {
  // A linear 1-input policy maps the unit state to theta itself.
  Engine engine = stream.engine();
  PolicyParams params{policy.arch(), policy.act(Vector::Ones(1), engine).value};
  return rollout(params, stream);
}

// --- Oracle ----------------------------------------------------------------

InducedChain induced_chain(const TabularMDP& mdp, const Matrix& pi) {
  mdp.validate();
  check_policy_matrix(mdp, pi);
  InducedChain chain;
  chain.transition = Matrix::Zero(mdp.num_states, mdp.num_states);
  chain.reward = Vector::Zero(mdp.num_states);
  for (Eigen::Index a = 0; a < mdp.num_actions; ++a) {
    chain.transition += pi.col(a).asDiagonal() * mdp.transition[static_cast<std::size_t>(a)];
    chain.reward += pi.col(a).cwiseProduct(mdp.reward.col(a));
  }
  return chain;
}

namespace {

Matrix discounted_system(const TabularMDP& mdp, const Matrix& transition) {
  return Matrix::Identity(mdp.num_states, mdp.num_states) - mdp.gamma * transition;
}

Vector solve_general(const Matrix& a, const Vector& rhs) {
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) throw Error(ErrorKind::SingularSystem, "tabular linear system is singular");
  return lu.solve(rhs);
}

}  // namespace

Vector tabular_value(const TabularMDP& mdp, const Matrix& pi) {
  const InducedChain chain = induced_chain(mdp, pi);
  return solve_general(discounted_system(mdp, chain.transition), chain.reward);
}

Vector tabular_state_occupancy(const TabularMDP& mdp, const Matrix& pi) {
  const InducedChain chain = induced_chain(mdp, pi);
  return (1.0 - mdp.gamma) * solve_general(discounted_system(mdp, chain.transition).transpose(), mdp.initial);
}

Matrix tabular_rho(const TabularMDP& mdp, const Matrix& pi) {
  return tabular_state_occupancy(mdp, pi).asDiagonal() * pi;
}

Prop1Result prop1_check(const TabularMDP& mdp, const Matrix& pi) {
  const Vector v = tabular_value(mdp, pi);
  const Vector occupancy = tabular_state_occupancy(mdp, pi);
  return {mdp.initial.dot(v), occupancy.dot(v)};
}

Vector stationary_distribution(const TabularMDP& mdp, const Matrix& pi) {
  const InducedChain chain = induced_chain(mdp, pi);
  const Eigen::Index n = mdp.num_states;
  // (P^T - I) mu = 0 with the last equation replaced by sum(mu) = 1.
  Matrix a = chain.transition.transpose() - Matrix::Identity(n, n);
  a.row(n - 1).setOnes();
  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  return solve_general(a, rhs);
}

StationaryResult stationary_prop1_check(const TabularMDP& mdp, const Matrix& pi) {
  const InducedChain chain = induced_chain(mdp, pi);
  const Vector mu = stationary_distribution(mdp, pi);
  const Vector v = tabular_value(mdp, pi);
  return {mu.dot(chain.reward), mu.dot(v)};
}

double inner_sampling_expectation(const TabularMDP& mdp, const Matrix& pi, int horizon) {
  require(horizon > 0, ErrorKind::InvalidArgument, "horizon must be positive");
  const InducedChain chain = induced_chain(mdp, pi);
  // truncated[k] = k-step value.
  std::vector<Vector> truncated(static_cast<std::size_t>(horizon) + 1, Vector::Zero(mdp.num_states));
  for (int k = 1; k <= horizon; ++k)
    truncated[static_cast<std::size_t>(k)] =
        chain.reward + mdp.gamma * chain.transition * truncated[static_cast<std::size_t>(k - 1)];
  Vector law = mdp.initial;
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    total += law.dot(truncated[static_cast<std::size_t>(horizon - t)]);
    law = chain.transition.transpose() * law;
  }
  return total / horizon;
}

}  // namespace reprl
