#include "distla/kernels.hpp"

#include <cmath>

namespace distla {

QrFactors local_qr(ConstMatrixRef<double> a, bool want_q) {
  const std::int64_t m = a.height();
  const std::int64_t n = a.width();
  if (m < n) throw UsageError("local_qr: matrix must be tall (height >= width)");

  // Householder vectors are stored below the diagonal of w with an
  // implicit unit leading entry.
  Matrix w = Matrix::from(a);
  std::vector<double> tau(static_cast<std::size_t>(n), 0.0);

  for (std::int64_t k = 0; k < n; ++k) {
    double* x = w.data() + k + k * w.ldim();
    const std::int64_t len = m - k;
    double tail = 0.0;
    for (std::int64_t i = 1; i < len; ++i) tail = std::hypot(tail, x[i]);
    if (tail == 0.0) continue;  // already upper triangular in this column

    const double alpha = x[0];
    const double beta = -std::copysign(std::hypot(alpha, tail), alpha);
    const double v0 = alpha - beta;
    for (std::int64_t i = 1; i < len; ++i) x[i] /= v0;
    x[0] = beta;
    const double t = (beta - alpha) / beta;
    tau[static_cast<std::size_t>(k)] = t;

    for (std::int64_t j = k + 1; j < n; ++j) {
      double* y = w.data() + k + j * w.ldim();
      double s = y[0];
      for (std::int64_t i = 1; i < len; ++i) s += x[i] * y[i];
      s *= t;
      y[0] -= s;
      for (std::int64_t i = 1; i < len; ++i) y[i] -= s * x[i];
    }
  }

  QrFactors out;
  out.r = Matrix(n, n);
  for (std::int64_t j = 0; j < n; ++j)
    for (std::int64_t i = 0; i <= j; ++i) out.r(i, j) = w(i, j);

  if (want_q) {
    out.q = Matrix(m, n);
    for (std::int64_t k = 0; k < n; ++k) out.q(k, k) = 1.0;
    for (std::int64_t k = n - 1; k >= 0; --k) {
      const double t = tau[static_cast<std::size_t>(k)];
      if (t == 0.0) continue;
      const double* v = w.data() + k + k * w.ldim();
      const std::int64_t len = m - k;
      for (std::int64_t j = k; j < n; ++j) {
        double* y = out.q.data() + k + j * out.q.ldim();
        double s = y[0];
        for (std::int64_t i = 1; i < len; ++i) s += v[i] * y[i];
        s *= t;
        y[0] -= s;
        for (std::int64_t i = 1; i < len; ++i) y[i] -= s * v[i];
      }
    }
  }

  for (std::int64_t k = 0; k < n; ++k) {
    if (!(out.r(k, k) < 0.0)) continue;
    for (std::int64_t j = k; j < n; ++j) out.r(k, j) = -out.r(k, j);
    if (want_q)
      for (std::int64_t i = 0; i < m; ++i) out.q(i, k) = -out.q(i, k);
  }
  return out;
}

} // namespace distla
