#pragma once

#include <cstdint>
#include <limits>

#include <Eigen/Dense>

namespace reprl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

/// Counter-based bit generator: output i is a keyed hash of i, so the state is
/// just (key, counter). Satisfies UniformRandomBitGenerator.
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

class Engine {
 public:
  using result_type = std::uint64_t;

  explicit Engine(std::uint64_t key, std::uint64_t counter = 0) : key_(key), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t c = counter_++;
    return mix64(mix64(c * kGolden + key_) ^ key_);
  }

  /// Uniform on [0, 1).
  double uniform();
  double normal();
  /// Uniform integer on [0, n).
  std::size_t index(std::size_t n);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

/// Immutable handle naming an independent random sequence. Child streams are
/// derived with split(); the same (seed, stream_id) always replays the same
/// draws.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0)
      : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  RngStream split(std::uint64_t child) const;
  Engine engine() const;

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
};

/// i.i.d. standard normals, replayable from the stream.
Vector gaussian_vector(const RngStream& stream, Eigen::Index dim);
void fill_gaussian(Engine& engine, Eigen::Ref<Matrix> out);

// ---------------------------------------------------------------------------
// Dense SPD kernels
// ---------------------------------------------------------------------------

/// Lower Cholesky factor L with m = L L^T. Reads the full matrix and checks
/// symmetry (relative 1e-12). Throws NotPositiveDefinite on a pivot <= 0.
Matrix cholesky(const Matrix& m);

/// Solves L y = rhs for lower-triangular L.
Vector forward_substitute(const Matrix& lower, const Vector& rhs);
/// Solves L^T x = rhs for lower-triangular L.
Vector back_substitute_transpose(const Matrix& lower, const Vector& rhs);

/// Solves m x = rhs through the Cholesky factor.
Vector solve_spd(const Matrix& m, const Vector& rhs);

/// Solves (L L^T) x = rhs given the factor.
Vector cholesky_solve(const Matrix& lower, const Vector& rhs);

double cholesky_log_det(const Matrix& lower);

}  // namespace reprl
