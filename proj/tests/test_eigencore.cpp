#include <catch2/catch_amalgamated.hpp>

#include "kda/eigencore.hpp"
#include "kda/kernels.hpp"
#include "test_support.hpp"

using kda::Matrix;
using kda::SymmetricMatrix;
using kda::Vector;
namespace ts = testsupport;

TEST_CASE("SymmetricMatrix validates and symmetrizes") {
  Matrix a(2, 2);
  a << 1.0, 2.0, 2.0 + 1e-14, 3.0;
  const SymmetricMatrix s(a);
  CHECK(s.data()(0, 1) == s.data()(1, 0));

  a(1, 0) = 2.5;
  CHECK_THROWS_AS(SymmetricMatrix(a), kda::NumericError);
  CHECK_THROWS_AS(SymmetricMatrix(Matrix::Zero(2, 3)), kda::NumericError);
}

TEST_CASE("sym_eig on small fixed matrices") {
  const auto id = kda::sym_eig(SymmetricMatrix(Matrix::Identity(3, 3)));
  REQUIRE(id.eigenvalues.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(id.eigenvalues(i) == Catch::Approx(1.0));

  Matrix d(2, 2);
  d << 3, 0, 0, 1;
  const auto pairs = kda::sym_eig(SymmetricMatrix(d));
  CHECK(pairs.eigenvalues(0) == Catch::Approx(3.0));
  CHECK(pairs.eigenvalues(1) == Catch::Approx(1.0));
  CHECK(std::abs(pairs.eigenvectors(0, 0)) == Catch::Approx(1.0));
  CHECK(std::abs(pairs.eigenvectors(1, 1)) == Catch::Approx(1.0));
  CHECK(std::abs(pairs.eigenvectors(1, 0)) < 1e-12);
}

TEST_CASE("sym_eig reconstruction, trace and orthonormality on a random 50x50") {
  auto rng = ts::make_rng(17);
  const Matrix a = ts::random_symmetric(rng, 50);
  const auto pairs = kda::sym_eig(SymmetricMatrix(a));

  // oracle: the reconstruction identity itself
  const Matrix rebuilt =
      pairs.eigenvectors * pairs.eigenvalues.asDiagonal() * pairs.eigenvectors.transpose();
  CHECK((a - rebuilt).norm() <= 1e-9 * a.norm());

  CHECK(pairs.eigenvalues.sum() ==
        Catch::Approx(a.trace()).margin(1e-8 * std::abs(a.trace()) + 1e-10));
  const Matrix vtv = pairs.eigenvectors.transpose() * pairs.eigenvectors;
  CHECK((vtv - Matrix::Identity(50, 50)).cwiseAbs().maxCoeff() < 1e-9);
  for (int i = 0; i + 1 < 50; ++i) CHECK(pairs.eigenvalues(i) >= pairs.eigenvalues(i + 1));
  CHECK(pairs.residual_bound <= 1e-8 * a.norm());
}

TEST_CASE("sym_eig rejects non-finite input") {
  Matrix a = Matrix::Zero(2, 2);
  a(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(kda::sym_eig(SymmetricMatrix(a)), kda::NumericError);
}

TEST_CASE("generalized_sym_eig with identity mass matches sym_eig") {
  auto rng = ts::make_rng(3);
  const Matrix a = ts::random_symmetric(rng, 8);
  const auto plain = kda::sym_eig(SymmetricMatrix(a));
  const auto gen = kda::generalized_sym_eig(SymmetricMatrix(a), SymmetricMatrix(Matrix::Identity(8, 8)), 0.0);
  CHECK((plain.eigenvalues - gen.eigenvalues).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("generalized_sym_eig on decoupled diagonal ratios") {
  Matrix a(2, 2), m(2, 2);
  a << 4, 0, 0, 1;
  m << 2, 0, 0, 1;
  const auto pairs = kda::generalized_sym_eig(SymmetricMatrix(a), SymmetricMatrix(m), 0.0);
  CHECK(pairs.eigenvalues(0) == Catch::Approx(2.0));
  CHECK(pairs.eigenvalues(1) == Catch::Approx(1.0));
}

TEST_CASE("generalized_sym_eig residual and M-orthonormality on a random SPD pair") {
  auto rng = ts::make_rng(11);
  const Matrix a = ts::random_symmetric(rng, 20);
  const Matrix m = ts::random_spd(rng, 20);
  const auto pairs = kda::generalized_sym_eig(SymmetricMatrix(a), SymmetricMatrix(m), 0.0);

  const Matrix resid =
      a * pairs.eigenvectors - m * pairs.eigenvectors * pairs.eigenvalues.asDiagonal();
  CHECK(resid.colwise().norm().maxCoeff() <= 1e-8 * (a.norm() + m.norm()));

  const Matrix vmv = pairs.eigenvectors.transpose() * m * pairs.eigenvectors;
  CHECK((vmv - Matrix::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("generalized_sym_eig rejects an indefinite mass matrix") {
  Matrix a = Matrix::Identity(2, 2);
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  CHECK_THROWS_WITH(kda::generalized_sym_eig(SymmetricMatrix(a), SymmetricMatrix(m), 0.0),
                    Catch::Matchers::ContainsSubstring("ridge"));
}

TEST_CASE("gram_matrix gaussian basics") {
  kda::KernelSpec spec;  // gaussian, s = 0.1
  auto rng = ts::make_rng(5);
  const Matrix x = ts::random_matrix(rng, 4, 3);
  const Matrix k = kda::gram_matrix(x, x, spec);
  for (int i = 0; i < 4; ++i) CHECK(k(i, i) == 1.0);  // k(x,x) = exp(0) exactly
  CHECK(k == k.transpose().eval());

  // ||x-y||^2 = 0.1 with s = 0.1 -> exp(-1)
  Matrix p(1, 1), q(1, 1);
  p << 0.0;
  q << std::sqrt(0.1);
  CHECK(kda::gram_matrix(p, q, spec)(0, 0) == Catch::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(kda::gram_matrix(p, q, spec)(0, 0) == Catch::Approx(0.367879).margin(1e-6));
}

TEST_CASE("gram_matrix linear kernel against direct dot products") {
  auto rng = ts::make_rng(7);
  const Matrix x = ts::random_matrix(rng, 5, 3);
  const Matrix y = ts::random_matrix(rng, 4, 3);
  kda::KernelSpec spec;
  spec.family = kda::KernelFamily::linear;
  const Matrix k = kda::gram_matrix(x, y, spec);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) {
      double dot = 0.0;  // oracle: spelled-out dot product
      for (int c = 0; c < 3; ++c) dot += x(i, c) * y(j, c);
      CHECK(k(i, j) == Catch::Approx(dot).margin(1e-12));
    }
  }
}

TEST_CASE("gram_matrix rejects dimension mismatch") {
  kda::KernelSpec spec;
  CHECK_THROWS_AS(kda::gram_matrix(Matrix::Zero(2, 3), Matrix::Zero(2, 4), spec), kda::NumericError);
}

TEST_CASE("gaussian gram matrices are positive semidefinite") {
  auto rng = ts::make_rng(23);
  const Matrix x = ts::random_matrix(rng, 15, 4);
  kda::KernelSpec spec;
  spec.gaussian_s = 0.7;
  const auto pairs = kda::sym_eig(SymmetricMatrix(kda::gram_matrix(x, x, spec)));
  CHECK(pairs.eigenvalues.minCoeff() >= -1e-8 * pairs.eigenvalues.maxCoeff());
}

TEST_CASE("center_kernel zeroes row and column sums and is idempotent") {
  auto rng = ts::make_rng(31);
  const Matrix x = ts::random_matrix(rng, 10, 3);
  kda::KernelSpec spec;
  spec.gaussian_s = 1.0;
  const Matrix k = kda::gram_matrix(x, x, spec);
  const auto [centered, stats] = kda::center_kernel(SymmetricMatrix(k));

  CHECK(centered.rowwise().sum().cwiseAbs().maxCoeff() < 1e-10);
  CHECK(centered.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
  CHECK(stats.grand_mean == Catch::Approx(stats.col_means.mean()).margin(1e-12));

  const auto [twice, stats2] = kda::center_kernel(SymmetricMatrix(centered));
  CHECK((twice - centered).cwiseAbs().maxCoeff() < 1e-8 * 10 * k.cwiseAbs().maxCoeff());
  (void)stats2;
}

TEST_CASE("center_kernel of identical rows is zero") {
  Matrix x(4, 2);
  x << 1, 2, 1, 2, 1, 2, 1, 2;
  kda::KernelSpec spec;
  spec.family = kda::KernelFamily::linear;
  const auto [centered, stats] = kda::center_kernel(SymmetricMatrix(kda::gram_matrix(x, x, spec)));
  CHECK(centered.cwiseAbs().maxCoeff() < 1e-12);
  (void)stats;
}

TEST_CASE("center_test_kernel agrees with training-side centering") {
  auto rng = ts::make_rng(41);
  const Matrix x = ts::random_matrix(rng, 8, 3);
  kda::KernelSpec spec;
  spec.gaussian_s = 0.5;
  const Matrix k = kda::gram_matrix(x, x, spec);
  const auto [centered, stats] = kda::center_kernel(SymmetricMatrix(k));

  // test rows = training rows -> identical centered rows
  const Matrix kt = kda::gram_matrix(x, x, spec);
  const Matrix ct = kda::center_test_kernel(kt, stats);
  CHECK((ct - centered).cwiseAbs().maxCoeff() < 1e-12);

  // oracle: recompute via the stacked (train+test) Gram matrix restricted to
  // the test rows
  Matrix stacked(16, 3);
  stacked << x, x;
  const Matrix big = kda::gram_matrix(stacked, stacked, spec);
  const auto [big_centered, big_stats] = kda::center_kernel(SymmetricMatrix(big));
  (void)big_stats;
  CHECK((big_centered.block(8, 0, 8, 8) - ct).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("center_test_kernel of a flat matrix matching the grand mean is zero") {
  kda::CenteringStats stats;
  stats.col_means = Vector::Constant(5, 0.3);
  stats.grand_mean = 0.3;
  const Matrix kt = Matrix::Constant(2, 5, 0.3);
  CHECK(kda::center_test_kernel(kt, stats).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("center_test_kernel rejects shape mismatch") {
  kda::CenteringStats stats;
  stats.col_means = Vector::Zero(4);
  CHECK_THROWS_AS(kda::center_test_kernel(Matrix::Zero(2, 5), stats), kda::NumericError);
}

TEST_CASE("kernel specs validate their parameters") {
  kda::KernelSpec bad;
  bad.gaussian_s = 0.0;
  CHECK_THROWS_AS(bad.validate(), kda::ConfigError);
  kda::KernelSpec poly;
  poly.family = kda::KernelFamily::polynomial;
  poly.poly_degree = 0;
  CHECK_THROWS_AS(poly.validate(), kda::ConfigError);
}

TEST_CASE("eigencore determinism: identical inputs, identical outputs") {
  auto rng = ts::make_rng(99);
  const Matrix a = ts::random_symmetric(rng, 12);
  const auto first = kda::sym_eig(SymmetricMatrix(a));
  const auto second = kda::sym_eig(SymmetricMatrix(a));
  CHECK(first.eigenvalues == second.eigenvalues);
  CHECK(first.eigenvectors == second.eigenvectors);
}
