#pragma once

// Local (single-rank) kernels composed by the distributed algorithms.
//
// Kernels with data-parallel inner loops (gemm, axpy, max norm, scaling)
// have an OpenMP version here and a serial reference in namespace
// `serial`.  Both visit each output element with the same operation
// sequence, so they agree bitwise; the serial versions are kept for tests
// and for the kernel benchmark.

#include "distla/local_matrix.hpp"

#include <cstdint>
#include <vector>

namespace distla {

enum class NormKind { Max, Frobenius };

/// C <- alpha * A * B + beta * C.  Loop order j-k-i; beta == 0 overwrites C.
void local_gemm(double alpha, ConstMatrixRef<double> a, ConstMatrixRef<double> b, double beta,
                MatrixRef<double> c);

/// Y <- alpha * X + Y.
template <typename T>
void local_axpy(T alpha, ConstMatrixRef<T> x, MatrixRef<T> y);

/// Max norm is max |a_ij| (0 for empty); Frobenius sums squares in
/// column-major order.
template <typename T>
double local_norm(NormKind kind, ConstMatrixRef<T> a);

namespace serial {
void local_gemm(double alpha, ConstMatrixRef<double> a, ConstMatrixRef<double> b, double beta,
                MatrixRef<double> c);
template <typename T>
void local_axpy(T alpha, ConstMatrixRef<T> x, MatrixRef<T> y);
template <typename T>
double local_norm(NormKind kind, ConstMatrixRef<T> a);
} // namespace serial

struct QrFactors {
  Matrix q;  // height x width, orthonormal columns; empty unless requested
  Matrix r;  // width x width, upper triangular, non-negative diagonal
};

/// Householder QR of a tall matrix (height >= width).
QrFactors local_qr(ConstMatrixRef<double> a, bool want_q = true);

struct SvdFactors {
  std::vector<double> sigma;  // descending
  Matrix v;                   // right singular vectors as columns
  int sweeps = 0;
};

/// One-sided (Hestenes) Jacobi SVD of a p x q matrix, p >= q.
SvdFactors jacobi_svd(ConstMatrixRef<double> a);

struct EigFactors {
  std::vector<double> values;  // ascending
  Matrix vectors;              // eigenvectors as columns
  int sweeps = 0;
};

/// Cyclic Jacobi eigensolver for a symmetric matrix.
EigFactors jacobi_sym_eig(ConstMatrixRef<double> a);

inline constexpr int kJacobiMaxSweeps = 30;
inline constexpr double kJacobiTolerance = 1e-14;

/// Flips each column so its largest-magnitude entry (first on ties) is
/// positive.
void normalize_column_signs(MatrixRef<double> v);

} // namespace distla
