#include "reprl/numerics.hpp"

#include <cmath>
#include <string>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "reprl/error.hpp"

namespace reprl {



double Engine::uniform() {
  // 53 random mantissa bits.
  return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Engine::normal() {
  boost::random::normal_distribution<double> dist;
  return dist(*this);
}

std::size_t Engine::index(std::size_t n) {
  require(n > 0, ErrorKind::InvalidArgument, "index range must be nonempty");
  boost::random::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(*this);
}

RngStream RngStream::split(std::uint64_t child) const {
  return RngStream(seed_, mix64(stream_id_ * kGolden + mix64(child + 0x632BE59BD9B4E019ULL)));
}

Engine RngStream::engine() const {
  return Engine(mix64(mix64(seed_ + kGolden) ^ (stream_id_ * 0xD1B54A32D192ED03ULL + 1)));
}

Vector gaussian_vector(const RngStream& stream, Eigen::Index dim) {
  require(dim >= 1, ErrorKind::InvalidArgument, "gaussian_vector dim must be >= 1");
  Vector out(dim);
  Engine engine = stream.engine();
  fill_gaussian(engine, out);
  return out;
}

void fill_gaussian(Engine& engine, Eigen::Ref<Matrix> out) {
  boost::random::normal_distribution<double> dist;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i) out(i, j) = dist(engine);
}

Matrix cholesky(const Matrix& m) {
  const Eigen::Index n = m.rows();
  require(n == m.cols() && n > 0, ErrorKind::DimMismatch, "cholesky needs a nonempty square matrix");
  const double scale = m.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < i; ++j)
      require(std::abs(m(i, j) - m(j, i)) <= 1e-12 * scale, ErrorKind::NotPositiveDefinite,
              "matrix is not symmetric");

  Matrix lower = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) pivot -= lower(j, k) * lower(j, k);
    if (!(pivot > 0.0))
      throw Error(ErrorKind::NotPositiveDefinite, "pivot " + std::to_string(j) + " is " + std::to_string(pivot));
    const double diag = std::sqrt(pivot);
    lower(j, j) = diag;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= lower(i, k) * lower(j, k);
      lower(i, j) = s / diag;
    }
  }
  return lower;
}

Vector forward_substitute(const Matrix& lower, const Vector& rhs) {
  const Eigen::Index n = lower.rows();
  require(rhs.size() == n, ErrorKind::DimMismatch, "forward_substitute rhs size");
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = rhs(i);
    for (Eigen::Index k = 0; k < i; ++k) s -= lower(i, k) * y(k);
    y(i) = s / lower(i, i);
  }
  return y;
}

Vector back_substitute_transpose(const Matrix& lower, const Vector& rhs) {
  const Eigen::Index n = lower.rows();
  require(rhs.size() == n, ErrorKind::DimMismatch, "back_substitute rhs size");
  Vector x(n);
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    double s = rhs(i);
    for (Eigen::Index k = i + 1; k < n; ++k) s -= lower(k, i) * x(k);
    x(i) = s / lower(i, i);
  }
  return x;
}

Vector cholesky_solve(const Matrix& lower, const Vector& rhs) {
  return back_substitute_transpose(lower, forward_substitute(lower, rhs));
}

Vector solve_spd(const Matrix& m, const Vector& rhs) {
  require(rhs.size() == m.rows(), ErrorKind::DimMismatch, "solve_spd rhs size");
  return cholesky_solve(cholesky(m), rhs);
}

double cholesky_log_det(const Matrix& lower) {
  return 2.0 * lower.diagonal().array().log().sum();
}

}  // namespace reprl
