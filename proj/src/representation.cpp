#include "reprl/representation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <unordered_map>

#include "reprl/error.hpp"

namespace reprl {

NormStats NormStats::fit(const Matrix& samples) {
  require(samples.cols() > 0, ErrorKind::EmptyHistory, "NormStats::fit needs samples");
  NormStats s;
  s.mean = samples.rowwise().mean();
  const Matrix centered = samples.colwise() - s.mean;
  s.std = (centered.rowwise().squaredNorm() / static_cast<double>(samples.cols())).cwiseSqrt().cwiseMax(1e-8);
  return s;
}

Matrix NormStats::apply(const Matrix& raw) const {
  if (empty()) return raw;
  require(raw.rows() == mean.size(), ErrorKind::DimMismatch, "NormStats dim");
  return (raw.colwise() - mean).array().colwise() / std.array();
}

Vector NormStats::apply(const Vector& raw) const {
  if (empty()) return raw;
  require(raw.size() == mean.size(), ErrorKind::DimMismatch, "NormStats dim");
  return (raw - mean).cwiseQuotient(std);
}

EncoderModel EncoderModel::make(Eigen::Index input_dim, const std::vector<Eigen::Index>& hidden,
                                Eigen::Index latent_dim, bool deterministic, Engine& engine) {
  require(input_dim > 0 && latent_dim > 0, ErrorKind::InvalidArgument, "encoder dims must be positive");
  std::vector<Eigen::Index> dims{input_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  EncoderModel enc;
  enc.trunk = DenseNet(dims, Activation::Relu, Activation::Relu);
  enc.mean_head = DenseNet({dims.back(), latent_dim}, Activation::None);
  enc.logvar_head = DenseNet({dims.back(), latent_dim}, Activation::None);
  enc.deterministic = deterministic;
  enc.trunk.init_uniform(engine);
  enc.mean_head.init_uniform(engine);
  enc.logvar_head.init_uniform(engine);
  return enc;
}

Eigen::Index EncoderModel::parameter_count() const {
  return trunk.parameter_count() + mean_head.parameter_count() + logvar_head.parameter_count();
}

Vector EncoderModel::params() const {
  Vector p(parameter_count());
  p << trunk.params(), mean_head.params(), logvar_head.params();
  return p;
}

void EncoderModel::set_params(const Vector& p) {
  require(p.size() == parameter_count(), ErrorKind::DimMismatch, "encoder parameter count");
  const Eigen::Index a = trunk.parameter_count(), b = mean_head.parameter_count();
  trunk.set_params(p.segment(0, a));
  mean_head.set_params(p.segment(a, b));
  logvar_head.set_params(p.segment(a + b, logvar_head.parameter_count()));
}

Encoding encode(const EncoderModel& enc, const Matrix& thetas) {
  require(thetas.rows() == enc.input_dim(), ErrorKind::DimMismatch, "encoder input dim");
  const DenseNet::Pass trunk = enc.trunk.forward(enc.input_norm.apply(thetas));
  Encoding out;
  out.mu = enc.mean_head.forward(trunk.output()).output();
  if (enc.deterministic) {
    out.sigma = Matrix::Zero(out.mu.rows(), out.mu.cols());
  } else {
    out.sigma = (0.5 * enc.logvar_head.forward(trunk.output()).output().array()).exp();
  }
  return out;
}

std::pair<Vector, Vector> encode(const EncoderModel& enc, const Vector& theta) {
  Encoding e = encode(enc, Matrix(theta));
  return {e.mu.col(0), e.sigma.col(0)};
}

Matrix encode_means(const EncoderModel& enc, const Matrix& thetas) {
  require(thetas.rows() == enc.input_dim(), ErrorKind::DimMismatch, "encoder input dim");
  constexpr Eigen::Index kChunk = 256;
  Matrix out(enc.latent_dim(), thetas.cols());
  for (Eigen::Index start = 0; start < thetas.cols(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, thetas.cols() - start);
    const DenseNet::Pass trunk = enc.trunk.forward(enc.input_norm.apply(Matrix(thetas.middleCols(start, n))));
    out.middleCols(start, n) = enc.mean_head.forward(trunk.output()).output();
  }
  return out;
}

std::pair<Matrix, Matrix> encode_means_antithetic(const EncoderModel& enc, const Vector& theta,
                                                 const Matrix& deltas) {
  require(theta.size() == enc.input_dim() && deltas.rows() == enc.input_dim(), ErrorKind::DimMismatch,
          "encoder input dim");
  if (enc.trunk.num_layers() == 0) {
    Matrix plus = deltas, minus = -deltas;
    plus.colwise() += theta;
    minus.colwise() += theta;
    return {encode_means(enc, plus), encode_means(enc, minus)};
  }
  Matrix w = enc.trunk.weight(0);
  Vector center = theta;
  if (!enc.input_norm.empty()) {
    w = w * enc.input_norm.std.cwiseInverse().asDiagonal();
    center -= enc.input_norm.mean;
  }
  const Vector base = w * center + enc.trunk.bias(0);
  Matrix spread(w.rows(), deltas.cols());
  spread.noalias() = w * deltas;
  Matrix plus = spread.colwise() + base;
  Matrix minus = (-spread).colwise() + base;
  plus = enc.mean_head.forward(enc.trunk.forward_from_preactivation(std::move(plus))).output();
  minus = enc.mean_head.forward(enc.trunk.forward_from_preactivation(std::move(minus))).output();
  return {std::move(plus), std::move(minus)};
}

double kl_gauss(const Vector& mu, const Vector& sigma) {
  require(mu.size() == sigma.size(), ErrorKind::DimMismatch, "kl_gauss sizes");
  if (!(sigma.array() > 0.0).all()) throw Error(ErrorKind::InvalidArgument, "NonPositiveSigma: sigma must be > 0");
  const Eigen::ArrayXd s2 = sigma.array().square();
  return 0.5 * (s2 + mu.array().square() - 1.0 - s2.log()).sum();
}

ElboResult elbo_batch(const EncoderModel& enc, const ReturnDecoder& dec, const Matrix& thetas, const Vector& targets,
                      const Matrix& xi) {
  const Eigen::Index batch = thetas.cols();
  const Eigen::Index d = enc.latent_dim();
  require(batch > 0 && targets.size() == batch, ErrorKind::DimMismatch, "one target per theta");
  require(dec.kappa.size() == d, ErrorKind::DimMismatch, "decoder kappa dim");
  require(enc.deterministic || (xi.rows() == d && xi.cols() == batch), ErrorKind::DimMismatch, "noise shape");
  require(targets.allFinite() && thetas.allFinite(), ErrorKind::NonFiniteInput, "elbo inputs must be finite");
  require(dec.noise_var > 0.0, ErrorKind::InvalidArgument, "decoder noise variance must be positive");

  const double inv_b = 1.0 / static_cast<double>(batch);
  const DenseNet::Pass trunk = enc.trunk.forward(enc.input_norm.apply(thetas));
  const DenseNet::Pass mean_pass = enc.mean_head.forward(trunk.output());
  const Matrix& mu = mean_pass.output();

  DenseNet::Pass logvar_pass;
  Matrix z = mu;
  Eigen::ArrayXXd sigma;
  if (!enc.deterministic) {
    logvar_pass = enc.logvar_head.forward(trunk.output());
    sigma = (0.5 * logvar_pass.output().array()).exp();
    z.array() += sigma * xi.array();
  }

  const Eigen::RowVectorXd pred = dec.kappa.transpose() * z;
  const Eigen::RowVectorXd resid = pred - targets.transpose();
  const Eigen::RowVectorXd r = resid / dec.noise_var;

  ElboResult out;
  double loss = 0.5 * std::log(2.0 * std::numbers::pi * dec.noise_var) +
                resid.squaredNorm() / (2.0 * dec.noise_var) * inv_b;
  if (!enc.deterministic) {
    const Eigen::ArrayXXd& lv = logvar_pass.output().array();
    loss += 0.5 * (sigma.square() + mu.array().square() - 1.0 - lv).sum() * inv_b;
  }
  out.loss = loss;
  out.decoder_grad = z * r.transpose() * inv_b;

  const Matrix dz = dec.kappa * r * inv_b;
  Matrix d_mu = dz;
  Matrix d_hidden;
  Vector logvar_grad = Vector::Zero(enc.logvar_head.parameter_count());
  if (!enc.deterministic) {
    d_mu += mu * inv_b;
    const Matrix d_lv = (0.5 * dz.array() * xi.array() * sigma + 0.5 * (sigma.square() - 1.0) * inv_b).matrix();
    logvar_grad = enc.logvar_head.backward(logvar_pass, d_lv, &d_hidden);
  }
  Matrix d_hidden_mean;
  const Vector mean_grad = enc.mean_head.backward(mean_pass, d_mu, &d_hidden_mean);
  if (d_hidden.size() == 0) {
    d_hidden = std::move(d_hidden_mean);
  } else {
    d_hidden += d_hidden_mean;
  }
  const Vector trunk_grad = enc.trunk.backward(trunk, d_hidden);

  out.encoder_grad.resize(enc.parameter_count());
  out.encoder_grad << trunk_grad, mean_grad, logvar_grad;
  return out;
}

ElboResult elbo_loss(const EncoderModel& enc, const ReturnDecoder& dec, const Vector& theta, double target,
                     const Vector& xi) {
  Vector t(1);
  t(0) = target;
  require(std::isfinite(target), ErrorKind::NonFiniteInput, "elbo target must be finite");
  return elbo_batch(enc, dec, Matrix(theta), t, enc.deterministic ? Matrix() : Matrix(xi));
}

ElboResult elbo_loss(const EncoderModel& enc, const ReturnDecoder& dec, const Vector& theta, double target,
                     const RngStream& stream) {
  return elbo_loss(enc, dec, theta, target, gaussian_vector(stream, enc.latent_dim()));
}

double predict_value(const ReturnDecoder& dec, const Vector& z) {
  require(z.size() == dec.kappa.size(), ErrorKind::DimMismatch, "predict_value latent dim");
  return dec.kappa.dot(z);
}

Representation Representation::make(Eigen::Index theta_dim, const RepresentationConfig& config,
                                    const RngStream& stream) {
  Engine engine = stream.engine();
  Representation rep;
  rep.encoder = EncoderModel::make(theta_dim, config.hidden, config.latent_dim, config.deterministic, engine);
  rep.decoder.kappa = Vector::Zero(config.latent_dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.latent_dim));
  for (Eigen::Index i = 0; i < config.latent_dim; ++i) rep.decoder.kappa(i) = bound * (2.0 * engine.uniform() - 1.0);
  rep.decoder.noise_var = config.noise_var;
  rep.adam = AdamState::for_size(rep.encoder.parameter_count() + config.latent_dim, config.learning_rate);
  rep.normalize_inputs = config.normalize_inputs;
  rep.normalize_targets = config.normalize_targets;
  return rep;
}

namespace {

// Unique thetas of the history, in first-appearance order.
Matrix unique_thetas(std::span<const HistoryEntry> history) {
  std::unordered_map<const Vector*, Eigen::Index> seen;
  std::vector<const Vector*> order;
  for (const HistoryEntry& e : history)
    if (seen.emplace(e.theta.get(), static_cast<Eigen::Index>(order.size())).second) order.push_back(e.theta.get());
  Matrix out(order.front()->size(), static_cast<Eigen::Index>(order.size()));
  for (std::size_t i = 0; i < order.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = *order[i];
  return out;
}

}  // namespace

double train_representation(Representation& rep, std::span<const HistoryEntry> history, int epochs,
                            Eigen::Index batch_size, const RngStream& stream) {
  if (history.empty()) throw Error(ErrorKind::EmptyHistory, "train_representation needs history");
  require(epochs >= 0 && batch_size >= 1, ErrorKind::InvalidArgument, "epochs >= 0 and batch_size >= 1");
  const Eigen::Index n = static_cast<Eigen::Index>(history.size());
  const Eigen::Index p = rep.encoder.input_dim();
  const Eigen::Index d = rep.encoder.latent_dim();
  for (const HistoryEntry& e : history)
    require(e.theta && e.theta->size() == p, ErrorKind::DimMismatch, "history theta dim");

  Engine engine = stream.engine();
  if (epochs > 0 && rep.normalize_inputs) {
    const Matrix thetas = unique_thetas(history);
    if (thetas.cols() > 1) rep.encoder.input_norm = NormStats::fit(thetas);
  }
  if (epochs > 0 && rep.normalize_targets) {
    Vector g(n);
    for (Eigen::Index i = 0; i < n; ++i) g(i) = history[static_cast<std::size_t>(i)].g_tilde;
    if (n > 1) {
      rep.decoder.target_mean = g.mean();
      rep.decoder.target_std = std::max(std::sqrt((g.array() - g.mean()).square().mean()), 1e-8);
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;

  auto run_batch = [&](std::size_t begin, std::size_t end, bool update) {
    const Eigen::Index b = static_cast<Eigen::Index>(end - begin);
    Matrix thetas(p, b);
    Vector targets(b);
    for (Eigen::Index j = 0; j < b; ++j) {
      const HistoryEntry& e = history[static_cast<std::size_t>(order[begin + static_cast<std::size_t>(j)])];
      thetas.col(j) = *e.theta;
      targets(j) = rep.decoder.normalize(e.g_tilde);
    }
    Matrix xi;
    if (!rep.encoder.deterministic) {
      xi.resize(d, b);
      fill_gaussian(engine, xi);
    }
    ElboResult res = elbo_batch(rep.encoder, rep.decoder, thetas, targets, xi);
    if (update) {
      Vector params(rep.adam.m.size());
      params << rep.encoder.params(), rep.decoder.kappa;
      Vector grads(params.size());
      grads << res.encoder_grad, res.decoder_grad;
      adam_step(params, grads, rep.adam);
      rep.encoder.set_params(params.head(rep.encoder.parameter_count()));
      rep.decoder.kappa = params.tail(d);
    }
    return res.loss * static_cast<double>(b);
  };

  const std::size_t bs = static_cast<std::size_t>(batch_size);
  if (epochs == 0) {
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += bs)
      total += run_batch(begin, std::min(order.size(), begin + bs), false);
    return total / static_cast<double>(n);
  }

  double last_mean = 0.0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[engine.index(i)]);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += bs)
      total += run_batch(begin, std::min(order.size(), begin + bs), true);
    last_mean = total / static_cast<double>(n);
  }
  return last_mean;
}

void write_embeddings(std::ostream& out, const EncoderModel& enc, std::span<const HistoryEntry> history) {
  out.precision(17);
  out << "episode";
  for (Eigen::Index i = 0; i < enc.latent_dim(); ++i) out << "\tz" << i;
  out << "\tg_tilde\n";
  if (history.empty()) return;
  const Matrix thetas = unique_thetas(history);
  const Matrix features = encode_means(enc, thetas);
  std::unordered_map<const Vector*, Eigen::Index> column;
  Eigen::Index next = 0;
  for (const HistoryEntry& e : history)
    if (column.emplace(e.theta.get(), next).second) ++next;
  for (const HistoryEntry& e : history) {
    out << e.episode;
    const Eigen::Index c = column.at(e.theta.get());
    for (Eigen::Index i = 0; i < features.rows(); ++i) out << '\t' << features(i, c);
    out << '\t' << e.g_tilde << '\n';
  }
}

}  // namespace reprl
