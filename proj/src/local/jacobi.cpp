#include "distla/kernels.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace distla {

void normalize_column_signs(MatrixRef<double> v) {
  for (std::int64_t j = 0; j < v.width(); ++j) {
    std::int64_t pivot = 0;
    for (std::int64_t i = 1; i < v.height(); ++i)
      if (std::fabs(v(i, j)) > std::fabs(v(pivot, j))) pivot = i;
    if (v.height() > 0 && v(pivot, j) < 0.0)
      for (std::int64_t i = 0; i < v.height(); ++i) v(i, j) = -v(i, j);
  }
}

namespace {

double dot(const double* x, const double* y, std::int64_t n) {
  double s = 0.0;
  for (std::int64_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void rotate(double* x, double* y, std::int64_t n, double c, double s) {
  for (std::int64_t i = 0; i < n; ++i) {
    const double xi = x[i];
    const double yi = y[i];
    x[i] = c * xi - s * yi;
    y[i] = s * xi + c * yi;
  }
}

Matrix permute_columns(const Matrix& m, const std::vector<std::int64_t>& order) {
  Matrix out(m.height(), m.width());
  for (std::size_t j = 0; j < order.size(); ++j)
    for (std::int64_t i = 0; i < m.height(); ++i)
      out(i, static_cast<std::int64_t>(j)) = m(i, order[j]);
  return out;
}

} // namespace

SvdFactors jacobi_svd(ConstMatrixRef<double> a) {
  const std::int64_t p = a.height();
  const std::int64_t q = a.width();
  if (p < q) throw UsageError("jacobi_svd: matrix must satisfy height >= width");

  Matrix u = Matrix::from(a);
  Matrix v = Matrix::identity(q);
  const double frob2 = std::pow(local_norm(NormKind::Frobenius, a), 2);
  const double converged_below = kJacobiTolerance * frob2;
  // Pairs whose cosine is already at rounding level are skipped.
  const double cosine_floor = static_cast<double>(std::max<std::int64_t>(p, 1)) *
                              std::numeric_limits<double>::epsilon();

  int sweeps = 0;
  for (; sweeps < kJacobiMaxSweeps; ++sweeps) {
    bool rotated = false;
    for (std::int64_t i = 0; i + 1 < q; ++i) {
      for (std::int64_t j = i + 1; j < q; ++j) {
        double* ui = u.data() + i * u.ldim();
        double* uj = u.data() + j * u.ldim();
        const double alpha = dot(ui, ui, p);
        const double beta = dot(uj, uj, p);
        const double gamma = dot(ui, uj, p);
        if (gamma == 0.0 || std::fabs(gamma) <= cosine_floor * std::sqrt(alpha * beta)) continue;

        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::fabs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        rotate(ui, uj, p, c, s);
        rotate(v.data() + i * v.ldim(), v.data() + j * v.ldim(), q, c, s);
        rotated = true;
      }
    }
    if (!rotated) break;
  }

  for (std::int64_t i = 0; i + 1 < q; ++i)
    for (std::int64_t j = i + 1; j < q; ++j) {
      const double gamma = dot(u.data() + i * u.ldim(), u.data() + j * u.ldim(), p);
      if (std::fabs(gamma) > converged_below)
        throw ConvergenceError("jacobi_svd: no convergence after " + std::to_string(kJacobiMaxSweeps) +
                               " sweeps");
    }

  std::vector<double> norms(static_cast<std::size_t>(q));
  for (std::int64_t j = 0; j < q; ++j) {
    const double* uj = u.data() + j * u.ldim();
    norms[static_cast<std::size_t>(j)] = std::sqrt(dot(uj, uj, p));
  }
  std::vector<std::int64_t> order(static_cast<std::size_t>(q));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::int64_t x, std::int64_t y) {
    return norms[static_cast<std::size_t>(x)] > norms[static_cast<std::size_t>(y)];
  });

  SvdFactors out;
  out.sweeps = sweeps;
  for (auto k : order) out.sigma.push_back(norms[static_cast<std::size_t>(k)]);
  out.v = permute_columns(v, order);
  normalize_column_signs(out.v.ref());
  return out;
}

EigFactors jacobi_sym_eig(ConstMatrixRef<double> sym) {
  const std::int64_t n = sym.height();
  if (sym.width() != n) throw UsageError("jacobi_sym_eig: matrix must be square");

  Matrix a = Matrix::from(sym);
  Matrix v = Matrix::identity(n);
  const double converged_below = kJacobiTolerance * local_norm(NormKind::Frobenius, sym);

  int sweeps = 0;
  for (; sweeps < kJacobiMaxSweeps; ++sweeps) {
    double off = 0.0;
    for (std::int64_t p = 0; p < n; ++p)
      for (std::int64_t q = p + 1; q < n; ++q) off += std::fabs(a(p, q));
    if (off == 0.0) break;

    for (std::int64_t p = 0; p < n; ++p) {
      for (std::int64_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        const double g = 100.0 * std::fabs(apq);
        // Once past the first sweeps, drop entries that no longer affect
        // either diagonal element.
        if (sweeps > 3 && std::fabs(a(p, p)) + g == std::fabs(a(p, p)) &&
            std::fabs(a(q, q)) + g == std::fabs(a(q, q))) {
          a(p, q) = 0.0;
          a(q, p) = 0.0;
          continue;
        }
        if (apq == 0.0) continue;

        const double h = a(q, q) - a(p, p);
        double t;
        if (std::fabs(h) + g == std::fabs(h)) {
          t = apq / h;
        } else {
          const double theta = 0.5 * h / apq;
          t = 1.0 / (std::fabs(theta) + std::hypot(1.0, theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        rotate(a.data() + p * a.ldim(), a.data() + q * a.ldim(), n, c, s);
        for (std::int64_t k = 0; k < n; ++k) {
          const double akp = a(p, k);
          const double akq = a(q, k);
          a(p, k) = c * akp - s * akq;
          a(q, k) = s * akp + c * akq;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        rotate(v.data() + p * v.ldim(), v.data() + q * v.ldim(), n, c, s);
      }
    }
  }

  for (std::int64_t p = 0; p < n; ++p)
    for (std::int64_t q = p + 1; q < n; ++q)
      if (std::fabs(a(p, q)) > converged_below)
        throw ConvergenceError("jacobi_sym_eig: no convergence after " +
                               std::to_string(kJacobiMaxSweeps) + " sweeps");

  std::vector<std::int64_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int64_t x, std::int64_t y) { return a(x, x) < a(y, y); });

  EigFactors out;
  out.sweeps = sweeps;
  for (auto k : order) out.values.push_back(a(k, k));
  out.vectors = permute_columns(v, order);
  normalize_column_signs(out.vectors.ref());
  return out;
}

} // namespace distla
