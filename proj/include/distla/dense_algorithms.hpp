#pragma once

// Distributed dense kernels over [MC,MR] matrices.  All of them are
// collective over the matrix grid.  Inputs that are unaligned views are
// materialized first; in-out views are written back through the view.

#include "distla/dist_matrix.hpp"

#include <cstdint>
#include <vector>

namespace distla {

inline constexpr std::int64_t kDefaultPanelWidth = 32;

/// C <- alpha * A * B + beta * C, stationary-C: for each k-panel, A's
/// panel is replicated within grid rows and B's within grid columns, then
/// every rank accumulates its own block of C.
void dist_gemm(double alpha, const DistMatrix<double>& a, const DistMatrix<double>& b, double beta,
               DistMatrix<double>& c, std::int64_t panel = kDefaultPanelWidth);

/// p[k] is the row swapped with row k at step k; replicated on all ranks.
using PivotVector = std::vector<std::int64_t>;

inline constexpr double kSingularTolerance = 1e-13;

/// Unblocked right-looking LU with partial pivoting.  A is overwritten
/// with unit-lower L (below the diagonal) and U.  Throws
/// SingularMatrixError when |pivot| < 1e-13 * maxNorm(A).
PivotVector dist_lu_factor(DistMatrix<double>& a);

/// B <- A^{-1} B using the output of dist_lu_factor.
void dist_lu_solve(const DistMatrix<double>& lu, const PivotVector& pivots, DistMatrix<double>& b);

/// R factor of a tall matrix, replicated on every rank; non-negative
/// diagonal.  The input is redistributed to [VC,*] when needed and reduced
/// with a binary tree of local QR factorizations.
Matrix tsqr(const DistMatrix<double>& a);

struct SvdResult {
  std::vector<double> sigma;  // descending
  Matrix v;                   // w x w right singular vectors, replicated
};

/// Singular values and right singular vectors of a tall matrix (h >= w)
/// without forming left vectors: TSQR, then Jacobi SVD of R.
SvdResult dist_svd_values_vt(const DistMatrix<double>& a);

enum class Triangle { Lower, Upper };

struct HermitianEigResult {
  std::vector<double> values;  // ascending, replicated
  DistMatrix<double> vectors;  // [*,*]
};

/// Symmetric eigendecomposition.  Only the `uplo` triangle is read; it is
/// mirrored before solving redundantly on every rank.
HermitianEigResult hermitian_eig(const DistMatrix<double>& a, Triangle uplo = Triangle::Lower);

} // namespace distla
