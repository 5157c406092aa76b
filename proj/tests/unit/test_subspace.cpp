#include "../oracles/jacobi.hpp"
#include "../support/criteria.hpp"

#include <gtest/gtest.h>

using namespace ssp;

namespace {

RowMatrixD gaussian(Eigen::Index m, Eigen::Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  RowMatrixD x(m, d);
  for (auto& v : x.reshaped()) v = normal(rng);
  return x;
}

}  // namespace

TEST(Subspace, AxisAlignedExample) {
  RowMatrixD x(3, 3);
  x << 3, 0, 0,
       0, 2, 0,
       0, 0, 1e-9;
  const auto s = principal_subspace(x, 3);
  EXPECT_EQ(s.rank(), 2u);  // third direction falls under the relative tolerance
  EXPECT_TRUE(s.clamped());
  EXPECT_NEAR(s.sigma[0], 3.0, 1e-12);
  EXPECT_NEAR(s.sigma[1], 2.0, 1e-12);
  MatrixD expected = MatrixD::Zero(3, 3);
  expected(0, 0) = expected(1, 1) = 1.0;
  EXPECT_LT((s.projector() - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Subspace, RankOneRowsGiveThatLine) {
  RowMatrixD x(4, 5);
  VectorD u(5);
  u << 1, 2, -1, 0, 3;
  for (int i = 0; i < 4; ++i) x.row(i) = (i + 1.0) * (i % 2 ? -1.0 : 1.0) * u.transpose();
  const auto s = principal_subspace(x, 3);
  EXPECT_EQ(s.rank(), 1u);
  const VectorD n = u.normalized();
  EXPECT_LT((s.projector() - n * n.transpose()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Subspace, CanonicalSignLargestEntryPositive) {
  const auto s = principal_subspace(gaussian(20, 6, 5), 4);
  for (Eigen::Index c = 0; c < s.basis.cols(); ++c) {
    Eigen::Index i = 0;
    s.basis.col(c).cwiseAbs().maxCoeff(&i);
    EXPECT_GT(s.basis(i, c), 0.0);
  }
}

TEST(Subspace, OrthonormalBasisBothGramRoutes) {
  for (auto [m, d] : {std::pair{5, 40}, std::pair{60, 12}}) {
    const auto s = principal_subspace(gaussian(m, d, 7), 30);
    const MatrixD g = s.basis.transpose() * s.basis;
    EXPECT_LT((g - MatrixD::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(s.rank(), static_cast<std::size_t>(std::min({m, d, 30})));
  }
}

TEST(Subspace, MatchesJacobiOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Eigen::Index m = 3 + static_cast<Eigen::Index>(seed % 7) * 5, d = 4 + static_cast<Eigen::Index>(seed % 5) * 3;
    const auto x = gaussian(m, d, seed);
    const std::size_t r = 1 + seed % static_cast<std::size_t>(d);
    std::size_t oracle_rank = 0;
    const auto p = oracle::principal_projector(x, r, 1e-6, &oracle_rank);
    const auto s = principal_subspace(x, r);
    EXPECT_EQ(s.rank(), oracle_rank);
    EXPECT_LT((s.projector() - p).norm(), 1e-8) << "seed " << seed;
  }
}

TEST(Subspace, SigmaMatchesSvd) {
  const auto x = gaussian(15, 9, 3);
  Eigen::JacobiSVD<MatrixD> svd(x);
  const auto s = principal_subspace(x, 9);
  for (Eigen::Index i = 0; i < 9; ++i) EXPECT_NEAR(s.sigma[i], svd.singularValues()[i], 1e-10);
}

TEST(Subspace, AlgebraProperties) {
  const auto st = testing_support::projector_algebra(200, 99);
  EXPECT_LE(st.idempotence, 1e-10);
  EXPECT_LE(st.symmetry, 1e-10);
  EXPECT_LE(st.expansion, 1e-10);
  EXPECT_LE(st.pythagoras, 1e-10);
  EXPECT_LE(st.residual, 1e-10);
  EXPECT_LE(st.sign_perm, 1e-8);
}

TEST(Subspace, ResidualIsZeroInsideAndFullOutside) {
  const auto x = gaussian(3, 8, 1);
  const auto s = principal_subspace(x, 3);
  const VectorD inside = x.row(1).transpose();
  EXPECT_NEAR(residual_sq_norm(s, inside), 0.0, 1e-12);
  const MatrixD q = MatrixD::Identity(8, 8) - s.projector();
  const VectorD outside = q * VectorD::Ones(8);
  EXPECT_NEAR(residual_sq_norm(s, outside), outside.squaredNorm(), 1e-12);
  EXPECT_LT(project(s, outside).norm(), 1e-12);
}

TEST(Subspace, IdentityIsExact) {
  const auto s = Subspace::identity(6);
  const VectorD f = gaussian(1, 6, 4).row(0).transpose();
  EXPECT_TRUE((project(s, f).array() == f.array()).all());
}

TEST(Subspace, RejectsBadInput) {
  EXPECT_THROW(principal_subspace(RowMatrixD::Zero(3, 4), 2), NumericError);
  RowMatrixD bad = gaussian(3, 4, 1);
  bad(1, 1) = std::nan("");
  EXPECT_THROW(principal_subspace(bad, 2), NumericError);
  EXPECT_THROW(principal_subspace(gaussian(3, 4, 1), 0), DomainError);
  const auto s = principal_subspace(gaussian(3, 4, 1), 2);
  EXPECT_THROW(project(s, VectorD::Ones(5)), ShapeError);
}

TEST(Subspace, RecordRoundTrip) {
  const auto s = principal_subspace(gaussian(30, 10, 2), 6);
  binio::Writer w;
  write_subspace(w, s);
  const std::string bytes = w.str();
  EXPECT_EQ(bytes.substr(0, 4), "SSPB");
  EXPECT_EQ(bytes.size(), 4 + 16 + 4 * (6 + 60));
  binio::Reader r(bytes);
  const auto back = read_subspace(r);
  EXPECT_EQ(back.rank(), 6u);
  EXPECT_EQ(back.source_rows, 30u);
  EXPECT_LT((back.projector() - s.projector()).cwiseAbs().maxCoeff(), 1e-6);
  binio::Reader truncated(std::string_view(bytes).substr(0, bytes.size() - 3));
  EXPECT_THROW(read_subspace(truncated), IoError);
  std::string bad = bytes;
  bad[0] = 'X';
  binio::Reader bad_reader(bad);
  EXPECT_THROW(read_subspace(bad_reader), IoError);
}
