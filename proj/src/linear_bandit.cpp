#include "reprl/linear_bandit.hpp"

#include <cmath>
#include <string>

#include "reprl/error.hpp"

namespace reprl {

BanditState::BanditState(Eigen::Index dim, double lambda) : lambda_(lambda) {
  require(dim >= 1, ErrorKind::InvalidArgument, "bandit dim must be >= 1");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw Error(ErrorKind::InvalidArgument, "InvalidLambda: lambda must be positive, got " + std::to_string(lambda));
  v_ = lambda * Matrix::Identity(dim, dim);
  b_ = Vector::Zero(dim);
  refresh();
}

BanditState BanditState::rebuild(const Matrix& features, const Vector& responses, double lambda) {
  require(features.cols() == responses.size(), ErrorKind::DimMismatch, "rebuild: one response per feature");
  BanditState s(features.rows(), lambda);
  if (features.cols() == 0) return s;
  require(features.allFinite() && responses.allFinite(), ErrorKind::NonFiniteInput, "rebuild: non-finite history");
  s.v_.noalias() += features * features.transpose();
  s.b_.noalias() += features * responses;
  s.updates_ = static_cast<std::size_t>(features.cols());
  s.refresh();
  return s;
}

BanditState BanditState::rebuild(const std::vector<std::pair<Vector, double>>& history, Eigen::Index dim,
                                 double lambda) {
  Matrix x(dim, static_cast<Eigen::Index>(history.size()));
  Vector y(x.cols());
  for (std::size_t i = 0; i < history.size(); ++i) {
    require(history[i].first.size() == dim, ErrorKind::DimMismatch, "rebuild: feature dim");
    x.col(static_cast<Eigen::Index>(i)) = history[i].first;
    y(static_cast<Eigen::Index>(i)) = history[i].second;
  }
  return rebuild(x, y, lambda);
}

double BanditState::log_det() const { return cholesky_log_det(lower_); }

void BanditState::update(const Vector& x, double y) {
  require(x.size() == dim(), ErrorKind::DimMismatch, "bandit_update feature dim");
  require(x.allFinite() && std::isfinite(y), ErrorKind::NonFiniteInput, "bandit_update input");
  v_.noalias() += x * x.transpose();
  b_ += y * x;
  ++updates_;
  refresh();
}

BanditState BanditState::updated(const Vector& x, double y) const {
  BanditState next = *this;
  next.update(x, y);
  return next;
}

double BanditState::ucb_score(const Vector& x, double alpha) const {
  require(x.size() == dim(), ErrorKind::DimMismatch, "ucb_score feature dim");
  const double mean = x.dot(w_hat_);
  if (alpha == 0.0) return mean;
  return mean + alpha * forward_substitute(lower_, x).norm();
}

Vector BanditState::ts_draw(double sigma, Engine& engine) const {
  require(sigma >= 0.0, ErrorKind::InvalidArgument, "ts sigma must be >= 0");
  if (sigma == 0.0) return w_hat_;
  Vector xi(dim());
  fill_gaussian(engine, xi);
  return w_hat_ + sigma * back_substitute_transpose(lower_, xi);
}

Vector BanditState::ts_draw(double sigma, const RngStream& stream) const {
  Engine engine = stream.engine();
  return ts_draw(sigma, engine);
}

Vector BanditState::scores(const Matrix& features, const SelectionRule& rule, Engine& engine,
                           bool per_candidate_draws) const {
  require(features.rows() == dim(), ErrorKind::DimMismatch, "scores feature dim");
  switch (rule.method) {
    case SelectionMethod::Greedy:
      return features.transpose() * w_hat_;
    case SelectionMethod::Oful: {
      Vector out = features.transpose() * w_hat_;
      if (rule.alpha != 0.0) {
        const Matrix whitened = lower_.triangularView<Eigen::Lower>().solve(features);
        out += rule.alpha * whitened.colwise().norm().transpose();
      }
      return out;
    }
    case SelectionMethod::Ts: {
      if (!per_candidate_draws) return features.transpose() * ts_draw(rule.sigma, engine);
      Vector out(features.cols());
      for (Eigen::Index i = 0; i < features.cols(); ++i) out(i) = features.col(i).dot(ts_draw(rule.sigma, engine));
      return out;
    }
  }
  return {};
}

std::size_t BanditState::select(const Matrix& features, const SelectionRule& rule, const RngStream& stream) const {
  if (features.cols() == 0) throw Error(ErrorKind::EmptyDecisionSet, "select on an empty decision set");
  Engine engine = stream.engine();
  return argmax_lowest(scores(features, rule, engine));
}

std::size_t BanditState::select(const std::vector<Vector>& features, const SelectionRule& rule,
                                const RngStream& stream) const {
  if (features.empty()) throw Error(ErrorKind::EmptyDecisionSet, "select on an empty decision set");
  Matrix x(dim(), static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < features.size(); ++i) {
    require(features[i].size() == dim(), ErrorKind::DimMismatch, "select feature dim");
    x.col(static_cast<Eigen::Index>(i)) = features[i];
  }
  return select(x, rule, stream);
}

void BanditState::refresh() {
  lower_ = cholesky(v_);
  w_hat_ = cholesky_solve(lower_, b_);
}

std::size_t argmax_lowest(const Vector& values) {
  if (values.size() == 0) throw Error(ErrorKind::EmptyDecisionSet, "argmax of an empty set");
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < values.size(); ++i)
    if (values(i) > values(best)) best = i;
  return static_cast<std::size_t>(best);
}

}  // namespace reprl
