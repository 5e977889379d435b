#include <gtest/gtest.h>

#include <cmath>

#include "reprl/error.hpp"
#include "reprl/numerics.hpp"

using namespace reprl;

namespace {

Matrix random_spd(Eigen::Index n, std::uint64_t seed) {
  Engine e(seed);
  Matrix b(n, n);
  fill_gaussian(e, b);
  return b.transpose() * b + Matrix::Identity(n, n);
}

}  // namespace

TEST(Cholesky, IdentityIsItsOwnFactor) {
  const Matrix l = cholesky(Matrix::Identity(3, 3));
  EXPECT_EQ(l, Matrix::Identity(3, 3));
}

TEST(Cholesky, TwoByTwoClosedForm) {
  Matrix m(2, 2);
  m << 4, 2, 2, 3;
  const Matrix l = cholesky(m);
  EXPECT_DOUBLE_EQ(l(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(l(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(l(1, 0), 1.0);
  EXPECT_NEAR(l(1, 1), std::sqrt(2.0), 1e-15);
}

TEST(Cholesky, ReconstructsRandomSpdUpToDim64) {
  for (Eigen::Index n : {1, 2, 5, 8, 17, 32, 64}) {
    const Matrix a = random_spd(n, 100 + static_cast<std::uint64_t>(n));
    const Matrix l = cholesky(a);
    EXPECT_TRUE(l.isLowerTriangular());
    EXPECT_LE((l * l.transpose() - a).cwiseAbs().maxCoeff(), 1e-10 * a.cwiseAbs().maxCoeff()) << "n=" << n;
  }
}

TEST(Cholesky, RejectsIndefiniteAndAsymmetric) {
  Matrix m(2, 2);
  m << 1, 2, 2, 1;
  try {
    cholesky(m);
    FAIL() << "expected NotPositiveDefinite";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotPositiveDefinite);
  }
  EXPECT_THROW(cholesky(Matrix::Zero(3, 3)), Error);
  Matrix asym(2, 2);
  asym << 2, 1, 0, 2;
  EXPECT_THROW(cholesky(asym), Error);
}

TEST(SolveSpd, IdentityAndDiagonal) {
  const Vector v = Vector::LinSpaced(4, -1.0, 2.0);
  EXPECT_EQ(solve_spd(Matrix::Identity(4, 4), v), v);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 2, 4;
  Vector rhs(2);
  rhs << 2, 8;
  const Vector x = solve_spd(d, rhs);
  EXPECT_DOUBLE_EQ(x(0), 1.0);
  EXPECT_DOUBLE_EQ(x(1), 2.0);
}

TEST(SolveSpd, MatchesExplicitInverse) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const Matrix a = random_spd(8, seed);
    const Vector rhs = gaussian_vector(RngStream(seed, 9), 8);
    const Vector x = solve_spd(a, rhs);
    const Vector oracle = a.inverse() * rhs;
    EXPECT_LE((x - oracle).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LE((a * x - rhs).cwiseAbs().maxCoeff(), 1e-9 * rhs.cwiseAbs().maxCoeff());
  }
}

TEST(SolveSpd, DimensionMismatch) {
  EXPECT_THROW(solve_spd(Matrix::Identity(3, 3), Vector::Ones(2)), Error);
}

TEST(Cholesky, LogDetMatchesLu) {
  const Matrix a = random_spd(6, 3);
  EXPECT_NEAR(cholesky_log_det(cholesky(a)), std::log(a.determinant()), 1e-10);
}

TEST(RngStream, ReplaysIdentically) {
  const Vector a = gaussian_vector(RngStream(7, 0), 3);
  const Vector b = gaussian_vector(RngStream(7, 0), 3);
  EXPECT_EQ(a, b);
  Engine e1 = RngStream(7).split(4).engine();
  Engine e2 = RngStream(7).split(4).engine();
  for (int i = 0; i < 100; ++i) {
    EXPECT_EQ(e1.uniform(), e2.uniform());
    EXPECT_EQ(e1.index(17), e2.index(17));
  }
}

TEST(RngStream, DistinctStreamsDiffer) {
  EXPECT_NE(gaussian_vector(RngStream(7, 0), 3), gaussian_vector(RngStream(7, 1), 3));
  EXPECT_NE(gaussian_vector(RngStream(7).split(1), 3), gaussian_vector(RngStream(7).split(2), 3));
  EXPECT_NE(gaussian_vector(RngStream(7), 3), gaussian_vector(RngStream(8), 3));
}

TEST(RngStream, NormalMoments) {
  const Vector x = gaussian_vector(RngStream(11, 0), 100000);
  const double mean = x.mean();
  const double var = (x.array() - mean).square().sum() / (x.size() - 1);
  EXPECT_LE(std::abs(mean), 4.0 / std::sqrt(100000.0));
  EXPECT_GE(var, 0.97);
  EXPECT_LE(var, 1.03);
}

TEST(RngStream, UniformAndIndexRanges) {
  Engine e = RngStream(5).engine();
  double sum = 0.0;
  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) {
    const double u = e.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    ++counts[e.index(5)];
  }
  EXPECT_NEAR(sum / 50000.0, 0.5, 0.01);
  for (int c : counts) EXPECT_NEAR(c / 50000.0, 0.2, 0.01);
  EXPECT_THROW(e.index(0), Error);
}
