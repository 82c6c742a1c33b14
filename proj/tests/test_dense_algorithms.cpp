#include "distla/dense_algorithms.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <mutex>

using namespace distla;

namespace {

/// Diagonally dominant test system: uniform entries plus n on the diagonal.
Matrix dominant(std::int64_t n, std::uint64_t seed) {
  Matrix a = Matrix::uniform(n, n, seed);
  for (std::int64_t k = 0; k < n; ++k) a(k, k) += static_cast<double>(n);
  return a;
}

} // namespace

TEST(DistGemm, MatchesTripleLoopOnEveryGrid) {
  Matrix a = Matrix::uniform(13, 9, 31), b = Matrix::uniform(9, 11, 32), c0 = Matrix::uniform(13, 11, 33);
  Matrix want = check::naive_gemm(a, b);
  for (std::int64_t j = 0; j < 11; ++j)
    for (std::int64_t i = 0; i < 13; ++i) want(i, j) = 1.5 * want(i, j) - 0.5 * c0(i, j);
  for (auto [r, c] : check::grid_shapes())
    for (std::int64_t panel : {1, 4, 32})
      check::on_grid(r, c, [&](const GridPtr& g) {
        auto da = DistMatrix<double>::from_replicated(g, a);
        auto db = DistMatrix<double>::from_replicated(g, b);
        auto dc = DistMatrix<double>::from_replicated(g, c0);
        dist_gemm(1.5, da, db, -0.5, dc, panel);
        EXPECT_LT(check::rel_error(gather(dc), want), 1e-14);
      });
}

TEST(DistGemm, ShapeMismatchAndEmptyInner) {
  check::on_grid(2, 2, [](const GridPtr& g) {
    DistMatrix<double> a(g, 3, 4), b(g, 5, 2), c(g, 3, 2);
    EXPECT_THROW(dist_gemm(1.0, a, b, 0.0, c), UsageError);
    DistMatrix<double> e1(g, 3, 0), e2(g, 0, 2), d(g, 3, 2);
    d.fill_uniform(1);
    Matrix before = gather(d);
    dist_gemm(1.0, e1, e2, 2.0, d);
    Matrix after = gather(d);
    for (std::int64_t j = 0; j < 2; ++j)
      for (std::int64_t i = 0; i < 3; ++i) EXPECT_EQ(after(i, j), 2.0 * before(i, j));
  });
}

TEST(DistGemm, OperandsAndResultAsViews) {
  Matrix big = Matrix::uniform(10, 10, 34);
  Matrix a = Matrix::from(big.cref().block(1, 2, 5, 4));
  Matrix b = Matrix::from(big.cref().block(3, 0, 4, 3));
  Matrix prod = check::naive_gemm(a, b);
  check::on_grid(2, 3, [&](const GridPtr& g) {
    auto src = DistMatrix<double>::from_replicated(g, big);
    DistMatrix<double> out(g, 8, 8);
    auto va = src.view(1, 6, 2, 6);
    auto vb = src.view(3, 7, 0, 3);
    auto vc = out.view(2, 7, 3, 6);
    dist_gemm(1.0, va, vb, 0.0, vc);
    Matrix got = gather(out);
    for (std::int64_t j = 0; j < 3; ++j)
      for (std::int64_t i = 0; i < 5; ++i) EXPECT_NEAR(got(2 + i, 3 + j), prod(i, j), 1e-14);
    EXPECT_EQ(got(0, 0), 0.0);
    EXPECT_EQ(got(7, 7), 0.0);
  });
}

TEST(DistGemm, GridResultsAgree) {
  std::mutex m;
  std::vector<Matrix> results;
  for (auto [r, c] : check::grid_shapes())
    check::on_grid(r, c, [&](const GridPtr& g) {
      DistMatrix<double> a(g, 17, 12), b(g, 12, 9), cc(g, 17, 9);
      a.fill_uniform(35);
      b.fill_uniform(36);
      dist_gemm(1.0, a, b, 0.0, cc);
      Matrix got = gather(cc);
      if (g->rank() == 0) {
        std::lock_guard lock(m);
        results.push_back(std::move(got));
      }
    });
  // Every element is the same k-ordered sum on every grid.
  for (const auto& r : results) EXPECT_TRUE(check::bitwise_equal(r, results.front()));
}

TEST(DistLu, FactorReconstructsPermutedMatrix) {
  for (auto [r, c] : check::grid_shapes())
    check::on_grid(r, c, [&](const GridPtr& g) {
      Matrix a = Matrix::uniform(9, 9, 37);  // not dominant: real pivoting
      auto da = DistMatrix<double>::from_replicated(g, a);
      auto piv = dist_lu_factor(da);
      auto [l, u] = check::split_lu(gather(da));
      Matrix pa = check::apply_pivots(a, piv);
      EXPECT_LT(check::rel_error(check::naive_gemm(l, u), pa), 1e-13);
      for (std::int64_t i = 1; i < 9; ++i)
        for (std::int64_t j = 0; j < i; ++j) EXPECT_LE(std::fabs(l(i, j)), 1.0);
    });
}

TEST(DistLu, PivotChoosesLargestAndFirstOnTies) {
  check::on_grid(2, 1, [](const GridPtr& g) {
    Matrix a(3, 3);
    a(0, 0) = 1;
    a(1, 0) = -4;
    a(2, 0) = 4;
    a(0, 1) = 2;
    a(1, 1) = 1;
    a(2, 2) = 3;
    auto da = DistMatrix<double>::from_replicated(g, a);
    auto piv = dist_lu_factor(da);
    EXPECT_EQ(piv[0], 1);
  });
}

TEST(DistLu, SolveResidual) {
  for (auto [r, c] : check::grid_shapes())
    check::on_grid(r, c, [&](const GridPtr& g) {
      Matrix a = dominant(12, 38), b = Matrix::uniform(12, 5, 39);
      auto da = DistMatrix<double>::from_replicated(g, a);
      auto db = DistMatrix<double>::from_replicated(g, b);
      auto piv = dist_lu_factor(da);
      dist_lu_solve(da, piv, db);
      Matrix x = gather(db);
      double res = check::frobenius_diff(check::naive_gemm(a, x), b);
      EXPECT_LT(res / (check::frobenius(a) * check::frobenius(x)), 1e-14);
    });
}

TEST(DistLu, SingularMatrix) {
  check::on_grid(2, 2, [](const GridPtr& g) {
    DistMatrix<double> a(g, 4, 4);
    EXPECT_THROW(dist_lu_factor(a), SingularMatrixError);
    Matrix r = Matrix::uniform(4, 4, 40);
    for (std::int64_t i = 0; i < 4; ++i) r(i, 3) = 2.0 * r(i, 1);
    auto b = DistMatrix<double>::from_replicated(g, r);
    EXPECT_THROW(dist_lu_factor(b), SingularMatrixError);
    DistMatrix<double> rect(g, 3, 4);
    EXPECT_THROW(dist_lu_factor(rect), UsageError);
  });
}

TEST(Tsqr, RMatchesLocalQr) {
  Matrix a = Matrix::uniform(23, 5, 41);
  Matrix want = local_qr(a.cref(), false).r;
  for (auto [r, c] : check::grid_shapes())
    check::on_grid(r, c, [&](const GridPtr& g) {
      auto da = DistMatrix<double>::from_replicated(g, a);
      Matrix got = tsqr(da);
      // R is unique once its diagonal is non-negative.
      EXPECT_LT(check::rel_error(got, want), 1e-13);
    });
}

TEST(Tsqr, FewerRowsPerRankThanColumns) {
  Matrix a = Matrix::uniform(7, 6, 42);
  Matrix ata = check::naive_gemm(check::transpose(a), a);
  check::on_grid(2, 3, [&](const GridPtr& g) {
    auto da = DistMatrix<double>::from_replicated(g, a);
    Matrix r = tsqr(da);
    EXPECT_LT(check::rel_error(check::naive_gemm(check::transpose(r), r), ata), 1e-13);
    DistMatrix<double> wide(g, 3, 4);
    EXPECT_THROW(tsqr(wide), UsageError);
  });
}

TEST(DistSvd, SingularValuesMatchEigenvaluesOfGram) {
  Matrix a = Matrix::uniform(30, 6, 43);
  auto eig = jacobi_sym_eig(check::naive_gemm(check::transpose(a), a).cref());
  for (auto [r, c] : check::grid_shapes())
    check::on_grid(r, c, [&](const GridPtr& g) {
      auto da = DistMatrix<double>::from_replicated(g, a);
      auto s = dist_svd_values_vt(da);
      ASSERT_EQ(s.sigma.size(), 6u);
      for (int k = 0; k < 6; ++k) EXPECT_NEAR(s.sigma[k], std::sqrt(eig.values[5 - k]), 1e-12);
      EXPECT_LT(check::frobenius_diff(check::naive_gemm(check::transpose(s.v), s.v), Matrix::identity(6)), 1e-13);
    });
}

TEST(HermitianEig, ReadsOnlyTheRequestedTriangle) {
  Matrix sym(3, 3);
  sym(0, 0) = 2;
  sym(1, 1) = 3;
  sym(2, 2) = 5;
  sym(1, 0) = sym(0, 1) = 1;
  Matrix lower_only = Matrix::from(sym.cref());
  lower_only(0, 1) = 99.0;  // garbage in the unused triangle
  check::on_grid(1, 2, [&](const GridPtr& g) {
    auto da = DistMatrix<double>::from_replicated(g, lower_only);
    auto e = hermitian_eig(da, Triangle::Lower);
    auto want = jacobi_sym_eig(sym.cref());
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(e.values[k], want.values[k], 1e-14);
    EXPECT_EQ(e.vectors.scheme(), DistScheme::STAR_STAR);
    Matrix upper = check::transpose(lower_only);
    auto du = DistMatrix<double>::from_replicated(g, upper);
    auto eu = hermitian_eig(du, Triangle::Upper);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(eu.values[k], want.values[k], 1e-14);
  });
}

TEST(HermitianEig, IdentityHasUnitEigenvalues) {
  check::on_grid(2, 2, [](const GridPtr& g) {
    auto da = DistMatrix<double>::from_replicated(g, Matrix::identity(3));
    auto e = hermitian_eig(da);
    for (double v : e.values) EXPECT_EQ(v, 1.0);
  });
}
