#include "distla/kernels.hpp"

#include <cmath>
#include <cstdlib>

namespace distla {

namespace {

constexpr std::int64_t kParallelWork = 1 << 14;

void check_gemm(ConstMatrixRef<double> a, ConstMatrixRef<double> b, MatrixRef<double> c) {
  if (a.width() != b.height() || c.height() != a.height() || c.width() != b.width())
    throw UsageError("gemm: dimension mismatch (" + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " * " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + " -> " + std::to_string(c.height()) + "x" +
                     std::to_string(c.width()) + ")");
}

// One output column; shared by the serial and parallel drivers so both
// perform the same operation sequence per element.
inline void gemm_column(double alpha, ConstMatrixRef<double> a, ConstMatrixRef<double> b, double beta,
                        MatrixRef<double> c, std::int64_t j) {
  double* cj = c.col(j);
  const std::int64_t m = c.height();
  if (beta == 0.0) {
    for (std::int64_t i = 0; i < m; ++i) cj[i] = 0.0;
  } else if (beta != 1.0) {
    for (std::int64_t i = 0; i < m; ++i) cj[i] *= beta;
  }
  if (alpha == 0.0) return;
  for (std::int64_t k = 0; k < a.width(); ++k) {
    const double t = alpha * b(k, j);
    const double* ak = a.col(k);
    for (std::int64_t i = 0; i < m; ++i) cj[i] += t * ak[i];
  }
}

template <typename T>
double abs_value(T v) {
  return std::fabs(static_cast<double>(v));
}

} // namespace

void local_gemm(double alpha, ConstMatrixRef<double> a, ConstMatrixRef<double> b, double beta,
                MatrixRef<double> c) {
  check_gemm(a, b, c);
  const std::int64_t n = c.width();
  const bool big = c.height() * n * std::max<std::int64_t>(a.width(), 1) >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::int64_t j = 0; j < n; ++j) gemm_column(alpha, a, b, beta, c, j);
}

template <typename T>
void local_axpy(T alpha, ConstMatrixRef<T> x, MatrixRef<T> y) {
  if (x.height() != y.height() || x.width() != y.width()) throw UsageError("axpy: dimension mismatch");
  const std::int64_t n = y.width();
  const bool big = y.height() * n >= kParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (std::int64_t j = 0; j < n; ++j) {
    const T* xj = x.col(j);
    T* yj = y.col(j);
    for (std::int64_t i = 0; i < y.height(); ++i) yj[i] += alpha * xj[i];
  }
}

template <typename T>
double local_norm(NormKind kind, ConstMatrixRef<T> a) {
  if (kind == NormKind::Frobenius) return serial::local_norm(kind, a);
  double result = 0.0;
  const std::int64_t n = a.width();
  const bool big = a.height() * n >= kParallelWork;
#pragma omp parallel for schedule(static) reduction(max : result) if (big)
  for (std::int64_t j = 0; j < n; ++j)
    for (std::int64_t i = 0; i < a.height(); ++i) result = std::max(result, abs_value(a(i, j)));
  return result;
}

namespace serial {

void local_gemm(double alpha, ConstMatrixRef<double> a, ConstMatrixRef<double> b, double beta,
                MatrixRef<double> c) {
  check_gemm(a, b, c);
  for (std::int64_t j = 0; j < c.width(); ++j) gemm_column(alpha, a, b, beta, c, j);
}

template <typename T>
void local_axpy(T alpha, ConstMatrixRef<T> x, MatrixRef<T> y) {
  if (x.height() != y.height() || x.width() != y.width()) throw UsageError("axpy: dimension mismatch");
  for (std::int64_t j = 0; j < y.width(); ++j)
    for (std::int64_t i = 0; i < y.height(); ++i) y(i, j) += alpha * x(i, j);
}

template <typename T>
double local_norm(NormKind kind, ConstMatrixRef<T> a) {
  double acc = 0.0;
  for (std::int64_t j = 0; j < a.width(); ++j)
    for (std::int64_t i = 0; i < a.height(); ++i) {
      double v = static_cast<double>(a(i, j));
      if (kind == NormKind::Max)
        acc = std::max(acc, std::fabs(v));
      else
        acc += v * v;
    }
  return kind == NormKind::Max ? acc : std::sqrt(acc);
}

template void local_axpy<double>(double, ConstMatrixRef<double>, MatrixRef<double>);
template void local_axpy<std::int64_t>(std::int64_t, ConstMatrixRef<std::int64_t>, MatrixRef<std::int64_t>);
template double local_norm<double>(NormKind, ConstMatrixRef<double>);
template double local_norm<std::int64_t>(NormKind, ConstMatrixRef<std::int64_t>);

} // namespace serial

template void local_axpy<double>(double, ConstMatrixRef<double>, MatrixRef<double>);
template void local_axpy<std::int64_t>(std::int64_t, ConstMatrixRef<std::int64_t>, MatrixRef<std::int64_t>);
template double local_norm<double>(NormKind, ConstMatrixRef<double>);
template double local_norm<std::int64_t>(NormKind, ConstMatrixRef<std::int64_t>);

} // namespace distla
