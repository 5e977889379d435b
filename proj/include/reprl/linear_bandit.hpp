#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "reprl/numerics.hpp"

namespace reprl {

enum class SelectionMethod { Greedy, Oful, Ts };

struct SelectionRule {
  SelectionMethod method = SelectionMethod::Ts;
  double alpha = 1.0;  // OFUL optimism
  double sigma = 1.0;  // TS posterior scale
};

/// Online ridge regression state: V = lambda I + sum x x^T, b = sum x y,
/// hat_w = V^{-1} b. The Cholesky factor of V is refreshed on every change.
class BanditState {
 public:
  BanditState(Eigen::Index dim, double lambda);

  /// lambda I + X X^T and X y in one pass; X holds one feature per column.
  static BanditState rebuild(const Matrix& features, const Vector& responses, double lambda);
  static BanditState rebuild(const std::vector<std::pair<Vector, double>>& history, Eigen::Index dim,
                             double lambda);

  Eigen::Index dim() const { return b_.size(); }
  double lambda() const { return lambda_; }
  const Matrix& design() const { return v_; }
  const Vector& response() const { return b_; }
  const Vector& estimate() const { return w_hat_; }
  const Matrix& factor() const { return lower_; }
  std::size_t num_updates() const { return updates_; }
  double log_det() const;

  void update(const Vector& x, double y);
  BanditState updated(const Vector& x, double y) const;

  /// <x, hat_w> + alpha sqrt(x^T V^{-1} x).
  double ucb_score(const Vector& x, double alpha) const;
  /// hat_w + sigma L^{-T} xi with V = L L^T, xi ~ N(0, I).
  Vector ts_draw(double sigma, Engine& engine) const;
  Vector ts_draw(double sigma, const RngStream& stream) const;

  /// Value estimates for every column of `features` under `rule`. TS uses one
  /// shared draw for the whole set unless `per_candidate_draws` is set.
  Vector scores(const Matrix& features, const SelectionRule& rule, Engine& engine,
                bool per_candidate_draws = false) const;

  /// Argmax of scores; ties go to the lowest index.
  std::size_t select(const Matrix& features, const SelectionRule& rule, const RngStream& stream) const;
  std::size_t select(const std::vector<Vector>& features, const SelectionRule& rule,
                     const RngStream& stream) const;

 private:
  void refresh();

  double lambda_;
  Matrix v_;
  Vector b_;
  Vector w_hat_;
  Matrix lower_;
  std::size_t updates_ = 0;
};

std::size_t argmax_lowest(const Vector& values);

}  // namespace reprl
