#include "distla/stats.hpp"

#include "distla/dense_algorithms.hpp"

#include <cmath>

namespace distla {

namespace {

/// Per-column sums of f(local value, global column) over all rows,
/// replicated on every rank.  Partial sums are combined over the grid
/// column in rank order and then assembled along the grid row.
template <typename F>
std::vector<double> column_sums(const DistMatrix<double>& a, F&& f) {
  const Grid& grid = a.grid();
  auto loc = a.local();
  std::vector<double> partial(static_cast<std::size_t>(loc.width()), 0.0);
  for (std::int64_t jl = 0; jl < loc.width(); ++jl) {
    const std::int64_t j = a.global_col(jl);
    double s = 0.0;
    for (std::int64_t il = 0; il < loc.height(); ++il) s += f(loc(il, jl), j);
    partial[static_cast<std::size_t>(jl)] = s;
  }
  auto mine = grid.col_comm().allreduce(ReduceOp::Sum, partial);
  auto parts = grid.row_comm().allgather_parts(wire::encode(std::span<const double>(mine)));
  std::vector<double> out(static_cast<std::size_t>(a.width()), 0.0);
  for (int s = 0; s < grid.width(); ++s) {
    auto values = wire::decode_f64(parts[static_cast<std::size_t>(s)]);
    CyclicAxis axis{grid.width(), s, 0};
    for (std::size_t l = 0; l < values.size(); ++l)
      out[static_cast<std::size_t>(axis.to_global(static_cast<std::int64_t>(l)))] = values[l];
  }
  return out;
}

const DistMatrix<double>& as_plain(const DistMatrix<double>& a, std::optional<DistMatrix<double>>& holder) {
  if (a.scheme() == DistScheme::MC_MR && a.aligned()) return a;
  holder.emplace(a.scheme() == DistScheme::MC_MR ? a.copy() : redistribute(a, DistScheme::MC_MR));
  return *holder;
}

} // namespace

std::vector<double> column_means(const DistMatrix<double>& a) {
  if (a.height() == 0) throw UsageError("column statistics of a matrix with no rows");
  std::optional<DistMatrix<double>> holder;
  const auto& p = as_plain(a, holder);
  auto sums = column_sums(p, [](double x, std::int64_t) { return x; });
  for (auto& s : sums) s /= static_cast<double>(a.height());
  return sums;
}

ColumnMoments column_moments(const DistMatrix<double>& a) {
  if (a.height() < 2) throw UsageError("sample standard deviation needs at least 2 rows");
  std::optional<DistMatrix<double>> holder;
  const auto& p = as_plain(a, holder);
  ColumnMoments m;
  m.means = column_means(p);
  auto squares = column_sums(p, [&](double x, std::int64_t j) {
    double d = x - m.means[static_cast<std::size_t>(j)];
    return d * d;
  });
  for (auto& s : squares) m.std_devs.push_back(std::sqrt(s / static_cast<double>(a.height() - 1)));
  return m;
}

ScaledMatrix center_scale(const DistMatrix<double>& a, bool center, bool scale) {
  DistMatrix<double> x = a.scheme() == DistScheme::MC_MR ? a.copy() : redistribute(a, DistScheme::MC_MR);
  ScaledMatrix out{std::move(x), {}, {}};
  if (!center && !scale) return out;
  const std::int64_t h = a.height();
  if (center) out.center = column_means(out.matrix);
  if (scale) {
    if (h < 2) throw UsageError("scaling needs at least 2 rows");
    auto squares = column_sums(out.matrix, [&](double v, std::int64_t j) {
      double d = center ? v - out.center[static_cast<std::size_t>(j)] : v;
      return d * d;
    });
    for (std::size_t j = 0; j < squares.size(); ++j) {
      double s = std::sqrt(squares[j] / static_cast<double>(h - 1));
      if (!(s > 0.0)) throw UsageError("cannot scale column " + std::to_string(j) + ": zero variance");
      out.scale.push_back(s);
    }
  }
  auto loc = out.matrix.local();
  for (std::int64_t jl = 0; jl < loc.width(); ++jl) {
    const auto j = static_cast<std::size_t>(out.matrix.global_col(jl));
    const double c = center ? out.center[j] : 0.0;
    for (std::int64_t il = 0; il < loc.height(); ++il) {
      double v = loc(il, jl) - c;
      if (scale) v /= out.scale[j];
      loc(il, jl) = v;
    }
  }
  return out;
}

PcaResult prcomp(const DistMatrix<double>& a, const PcaOptions& options) {
  if (a.height() < 2) throw UsageError("prcomp needs at least 2 observations");
  if (a.height() < a.width()) throw UsageError("prcomp needs at least as many observations as variables");
  ScaledMatrix x = center_scale(a, options.center, options.scale);
  SvdResult s = dist_svd_values_vt(x.matrix);
  const double factor = 1.0 / std::sqrt(static_cast<double>(a.height() - 1));
  for (auto& v : s.sigma) v = factor * v;
  return {std::move(s.sigma), std::move(s.v), std::move(x.center)};
}

} // namespace distla
