#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "reprl/numerics.hpp"
#include "reprl/policy.hpp"

namespace reprl {

/// Time-aligned (state, action, reward) record of one episode.
struct Trajectory {
  std::vector<Vector> states;
  std::vector<Action> actions;
  std::vector<double> rewards;
  std::uint64_t stream_id = 0;
  bool reached_goal = false;

  std::size_t length() const { return rewards.size(); }
  Matrix state_matrix() const;
  std::vector<int> action_indices() const;
};

/// sum_{t >= start} gamma^(t - start) r_t.
double discounted_return(const Trajectory& traj, std::size_t start, double gamma);

struct InnerSample {
  std::size_t start = 0;
  double g_tilde = 0.0;
};

/// Uniform start index along the stored trajectory and its return-to-go.
InnerSample sample_inner(const Trajectory& traj, double gamma, Engine& engine);
InnerSample sample_inner(const Trajectory& traj, double gamma, const RngStream& stream);

/// Stateless environment descriptor; rollouts are pure functions of the policy
/// and the stream.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual Eigen::Index state_dim() const = 0;
  virtual Eigen::Index action_dim() const = 0;
  virtual bool discrete_actions() const = 0;
  virtual int horizon() const = 0;

  virtual Trajectory rollout(const PolicyParams& params, const RngStream& stream) const;
  virtual Trajectory run_policy(const Policy& policy, const RngStream& stream) const = 0;

  /// Default policy architecture for this environment.
  virtual PolicyArch default_arch() const = 0;

 protected:
  void check_arch(const PolicyArch& arch) const;
};

struct GridWorldConfig {
  int width = 8;
  int height = 8;
  int horizon = 20;
  double r1 = 2.5;
  double r2 = 0.3;
  double r3 = 13.0;
  double noise_std = 3.0;
  double a1 = 0.125;
  double a2 = 8.0;
  double x1 = 4, y1 = 2;  // narrow, high bump
  double x2 = 4, y2 = 7;  // broad, low ridge
  int goal_x = 8, goal_y = 8;
  int start_x = 1, start_y = 1;
  bool terminate_at_goal = false;
  std::vector<Eigen::Index> policy_hidden{32, 32};
};

/// Grid with 1-based cells (x, y); actions 0 up, 1 down, 2 left, 3 right.
/// Moving into a wall leaves the agent in place. Each step pays a
/// N(mu(x', y'), noise_std^2) reward for the cell entered.
class GridWorldEnv final : public Environment {
 public:
  explicit GridWorldEnv(GridWorldConfig config = {});

  const GridWorldConfig& config() const { return config_; }

  std::string name() const override { return "gridworld"; }
  Eigen::Index state_dim() const override { return config_.width * config_.height; }
  Eigen::Index action_dim() const override { return 4; }
  bool discrete_actions() const override { return true; }
  int horizon() const override { return config_.horizon; }
  PolicyArch default_arch() const override;

  Trajectory run_policy(const Policy& policy, const RngStream& stream) const override;

  double mean_reward(int x, int y) const;
  Vector encode(int x, int y) const;
  std::pair<int, int> move(int x, int y, int action) const;

 private:
  GridWorldConfig config_;
};

struct SparseLineConfig {
  int horizon = 200;
  double interval = 1.0;
  double control_cost = 0.05;
  double step_scale = 0.1;
  double milestone_reward = 10.0;
};

/// 1-D point mass: x += step_scale * clip(a, -1, 1). Reaching a milestone
/// |x| >= k * interval (k >= 1) for the first time pays milestone_reward;
/// every step pays -control_cost * a^2. State is (x, 1).
class SparseLineEnv final : public Environment {
 public:
  explicit SparseLineEnv(SparseLineConfig config = {});

  const SparseLineConfig& config() const { return config_; }

  std::string name() const override { return "sparseline"; }
  Eigen::Index state_dim() const override { return 2; }
  Eigen::Index action_dim() const override { return 1; }
  bool discrete_actions() const override { return false; }
  int horizon() const override { return config_.horizon; }
  PolicyArch default_arch() const override;

  Trajectory run_policy(const Policy& policy, const RngStream& stream) const override;

 private:
  SparseLineConfig config_;
};

/// Finite MDP (S, A, r, T, beta, gamma). transition[a](s, s') = T(s' | s, a).
struct TabularMDP {
  Eigen::Index num_states = 0;
  Eigen::Index num_actions = 0;
  std::vector<Matrix> transition;
  Matrix reward;  // S x A, entries in [0, 1]
  Vector initial;
  double gamma = 0.9;

  void validate() const;
};

/// Random MDP with Dirichlet(1)-like rows, uniform rewards and initial law.
TabularMDP random_mdp(Eigen::Index num_states, Eigen::Index num_actions, double gamma, Engine& engine);
/// Row-stochastic random policy matrix (S x A).
Matrix random_stochastic_policy(Eigen::Index num_states, Eigen::Index num_actions, Engine& engine);

/// Tabular MDP as a rollout environment with one-hot states. Softmax policies
/// with no hidden layers are exactly tabular logits.
class TabularEnv final : public Environment {
 public:
  TabularEnv(TabularMDP mdp, int horizon);

  const TabularMDP& mdp() const { return mdp_; }

  std::string name() const override { return "tabular"; }
  Eigen::Index state_dim() const override { return mdp_.num_states; }
  Eigen::Index action_dim() const override { return mdp_.num_actions; }
  bool discrete_actions() const override { return true; }
  int horizon() const override { return horizon_; }
  PolicyArch default_arch() const override;

  Trajectory run_policy(const Policy& policy, const RngStream& stream) const override;

 private:
  TabularMDP mdp_;
  int horizon_;
};

/// Rollout of an explicit S x A policy matrix.
Trajectory rollout_tabular(const TabularMDP& mdp, const Matrix& pi, int horizon, const RngStream& stream);

/// Synthetic black-box objective: a single-step episode paying
/// <slope, theta> + noise_std * xi. Useful for checking zero-order estimators.
class LinearObjectiveEnv final : public Environment {
 public:
  LinearObjectiveEnv(Vector slope, double noise_std = 0.0);

  const Vector& slope() const { return slope_; }

  std::string name() const override { return "linear_objective"; }
  Eigen::Index state_dim() const override { return 1; }
  Eigen::Index action_dim() const override { return slope_.size(); }
  bool discrete_actions() const override { return false; }
  int horizon() const override { return 1; }
  PolicyArch default_arch() const override;

  Trajectory rollout(const PolicyParams& params, const RngStream& stream) const override;
  Trajectory run_policy(const Policy& policy, const RngStream& stream) const override;

 private:
  Vector slope_;
  double noise_std_;
};

// ---------------------------------------------------------------------------
// Exact tabular oracle
// ---------------------------------------------------------------------------

struct InducedChain {
  Matrix transition;  // P_pi(s, s')
  Vector reward;      // r_pi(s)
};

InducedChain induced_chain(const TabularMDP& mdp, const Matrix& pi);

/// v(pi, s) from (I - gamma P_pi) v = r_pi.
Vector tabular_value(const TabularMDP& mdp, const Matrix& pi);

/// Normalized discounted state occupancy (1 - gamma) beta^T (I - gamma P_pi)^{-1}.
Vector tabular_state_occupancy(const TabularMDP& mdp, const Matrix& pi);

/// rho(s, a) = occupancy(s) * pi(a | s); sums to one.
Matrix tabular_rho(const TabularMDP& mdp, const Matrix& pi);

struct Prop1Result {
  double v = 0.0;        // sum_s beta(s) v(pi, s)
  double v_tilde = 0.0;  // sum_s occupancy(s) v(pi, s)
};

/// Evaluates both sides of the inner-sampling identity with the discounted
/// occupancy as the start-state law.
Prop1Result prop1_check(const TabularMDP& mdp, const Matrix& pi);

/// Stationary law mu of P_pi (mu P = mu, sum mu = 1); requires a unique one.
Vector stationary_distribution(const TabularMDP& mdp, const Matrix& pi);

struct StationaryResult {
  double average_reward = 0.0;  // <mu, r_pi>
  double v_tilde = 0.0;         // sum_s mu(s) v(pi, s)
};

/// Start states drawn from the stationary law: v_tilde (1 - gamma) equals the
/// average reward exactly.
StationaryResult stationary_prop1_check(const TabularMDP& mdp, const Matrix& pi);

/// Exact mean of sample_inner's g_tilde over horizon-H rollouts from beta:
/// (1/H) sum_t sum_s P(s_t = s) v_{H - t}(s) with v_k the k-step value.
double inner_sampling_expectation(const TabularMDP& mdp, const Matrix& pi, int horizon);

}  // namespace reprl
