#include "distla/dense_algorithms.hpp"

#include <cmath>
#include <optional>

namespace distla {

namespace {

constexpr int kSwapTag = 7101;
constexpr int kTsqrTag = 7102;

bool is_plain_mcmr(const DistMatrix<double>& a) {
  return a.scheme() == DistScheme::MC_MR && a.aligned();
}

/// `a` itself when it is an aligned [MC,MR] matrix, else an aligned copy
/// held in `holder`.
const DistMatrix<double>& plain_mcmr(const DistMatrix<double>& a, std::optional<DistMatrix<double>>& holder) {
  if (is_plain_mcmr(a)) return a;
  if (a.scheme() == DistScheme::MC_MR)
    holder.emplace(a.copy());
  else
    holder.emplace(redistribute(a, DistScheme::MC_MR));
  return *holder;
}

/// Runs `body` on an aligned [MC,MR] version of the in-out matrix `a` and
/// writes the result back when a copy was needed.
template <typename Body>
auto with_plain_mcmr(DistMatrix<double>& a, Body&& body) {
  if (is_plain_mcmr(a)) return body(a);
  std::optional<DistMatrix<double>> holder;
  plain_mcmr(a, holder);
  if constexpr (std::is_void_v<decltype(body(*holder))>) {
    body(*holder);
    redistribute_into(*holder, a);
  } else {
    auto result = body(*holder);
    redistribute_into(*holder, a);
    return result;
  }
}

void check_grid(const DistMatrix<double>& a, const DistMatrix<double>& b) {
  if (&a.grid() != &b.grid() && a.grid().world().group_id() != b.grid().world().group_id())
    throw UsageError("matrices live on different grids");
}

std::vector<double> receive_doubles(const Communicator& comm, int root, const std::vector<double>& mine) {
  return broadcast_values<double>(comm, root, comm.rank() == root ? std::span<const double>(mine)
                                                                  : std::span<const double>());
}

void gemm_plain(double alpha, const DistMatrix<double>& a, const DistMatrix<double>& b, double beta,
                DistMatrix<double>& c, std::int64_t panel) {
  const Grid& grid = c.grid();
  auto cl = c.local();
  const std::int64_t mloc = cl.height();
  const std::int64_t nloc = cl.width();
  const std::int64_t depth = a.width();

  if (depth == 0) {
    Matrix none_a(mloc, 0);
    Matrix none_b(0, nloc);
    local_gemm(alpha, none_a.cref(), none_b.cref(), beta, cl);
    return;
  }

  auto al = a.local();
  auto bl = b.local();
  const auto& acols = a.distribution().cols;
  const auto& brows = b.distribution().rows;

  for (std::int64_t k0 = 0; k0 < depth; k0 += panel) {
    const std::int64_t kb = std::min(panel, depth - k0);

    // A(myRows, k0:k0+kb) assembled from the grid row.
    std::vector<double> slab;
    for (std::int64_t jl = acols.count(k0); jl < acols.count(k0 + kb); ++jl)
      slab.insert(slab.end(), al.col(jl), al.col(jl) + mloc);
    auto parts = grid.row_comm().allgather_parts(wire::encode(std::span<const double>(slab)));
    Matrix apanel(mloc, kb);
    for (int s = 0; s < grid.width(); ++s) {
      auto values = wire::decode_f64(parts[static_cast<std::size_t>(s)]);
      CyclicAxis axis{grid.width(), s, 0};
      std::size_t off = 0;
      for (std::int64_t l = axis.count(k0); l < axis.count(k0 + kb); ++l, off += static_cast<std::size_t>(mloc))
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(off), mloc,
                    apanel.data() + (axis.to_global(l) - k0) * apanel.ldim());
    }

    // B(k0:k0+kb, myCols) assembled from the grid column.
    slab.clear();
    const std::int64_t r0 = brows.count(k0);
    const std::int64_t r1 = brows.count(k0 + kb);
    for (std::int64_t jl = 0; jl < nloc; ++jl)
      for (std::int64_t il = r0; il < r1; ++il) slab.push_back(bl(il, jl));
    parts = grid.col_comm().allgather_parts(wire::encode(std::span<const double>(slab)));
    Matrix bpanel(kb, nloc);
    for (int s = 0; s < grid.height(); ++s) {
      auto values = wire::decode_f64(parts[static_cast<std::size_t>(s)]);
      CyclicAxis axis{grid.height(), s, 0};
      const std::int64_t first = axis.count(k0);
      const std::int64_t rows = axis.count(k0 + kb) - first;
      for (std::int64_t jl = 0; jl < nloc; ++jl)
        for (std::int64_t t = 0; t < rows; ++t)
          bpanel(axis.to_global(first + t) - k0, jl) = values[static_cast<std::size_t>(t + jl * rows)];
    }

    local_gemm(alpha, apanel.cref(), bpanel.cref(), k0 == 0 ? beta : 1.0, cl);
  }
}

/// Swaps global rows k and p of an aligned [MC,MR] matrix across all of
/// its local columns.
void swap_rows(DistMatrix<double>& a, std::int64_t k, std::int64_t p) {
  if (k == p) return;
  const Grid& grid = a.grid();
  const auto& rows = a.distribution().rows;
  const int rk = rows.owner_of(k);
  const int rp = rows.owner_of(p);
  auto loc = a.local();
  if (rk == rp) {
    if (grid.row() != rk) return;
    const std::int64_t ik = rows.to_local(k);
    const std::int64_t ip = rows.to_local(p);
    for (std::int64_t jl = 0; jl < loc.width(); ++jl) std::swap(loc(ik, jl), loc(ip, jl));
    return;
  }
  if (grid.row() != rk && grid.row() != rp) return;
  const std::int64_t mine = grid.row() == rk ? k : p;
  const int partner = grid.row() == rk ? rp : rk;
  const std::int64_t il = rows.to_local(mine);
  std::vector<double> out(static_cast<std::size_t>(loc.width()));
  for (std::int64_t jl = 0; jl < loc.width(); ++jl) out[static_cast<std::size_t>(jl)] = loc(il, jl);
  grid.col_comm().send(partner, kSwapTag, wire::encode(std::span<const double>(out)));
  auto in = wire::decode_f64(grid.col_comm().recv(partner, kSwapTag));
  for (std::int64_t jl = 0; jl < loc.width(); ++jl) loc(il, jl) = in[static_cast<std::size_t>(jl)];
}

PivotVector lu_plain(DistMatrix<double>& a) {
  const Grid& grid = a.grid();
  const std::int64_t n = a.height();
  const auto& rows = a.distribution().rows;
  const auto& cols = a.distribution().cols;
  auto loc = a.local();
  const double tolerance = kSingularTolerance * dist_norm(NormKind::Max, a);

  PivotVector pivots(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    const int kr = rows.owner_of(k);
    const int kc = cols.owner_of(k);
    const bool own_col = grid.col() == kc;
    const std::int64_t below = rows.count(k + 1);  // first local row with global index > k

    // Pivot search in column k; smallest global row wins ties.
    std::vector<double> found;
    if (own_col) {
      const std::int64_t jl = cols.to_local(k);
      MaxLoc best;
      for (std::int64_t il = rows.count(k); il < loc.height(); ++il) {
        double v = std::fabs(loc(il, jl));
        if (best.index < 0 || v > best.value) best = {v, rows.to_global(il)};
      }
      MaxLoc winner = grid.col_comm().allreduce_maxloc(std::span(&best, 1))[0];
      found = {winner.value, static_cast<double>(winner.index)};
    }
    found = receive_doubles(grid.row_comm(), kc, found);
    const double magnitude = found[0];
    const auto p = static_cast<std::int64_t>(found[1]);
    if (!(magnitude > tolerance))
      throw SingularMatrixError("singular matrix: pivot " + format_roundtrip(magnitude) + " at step " +
                                std::to_string(k));
    pivots[static_cast<std::size_t>(k)] = p;
    swap_rows(a, k, p);

    if (own_col) {
      const std::int64_t jl = cols.to_local(k);
      std::vector<double> mine;
      if (grid.row() == kr) mine.push_back(loc(rows.to_local(k), jl));
      const double pivot = receive_doubles(grid.col_comm(), kr, mine)[0];
      const double inverse = 1.0 / pivot;
      for (std::int64_t il = below; il < loc.height(); ++il) loc(il, jl) *= inverse;
    }

    // Rank-1 update of the trailing matrix.
    const std::int64_t right = cols.count(k + 1);
    std::vector<double> lcol;
    if (own_col) {
      const std::int64_t jl = cols.to_local(k);
      for (std::int64_t il = below; il < loc.height(); ++il) lcol.push_back(loc(il, jl));
    }
    lcol = receive_doubles(grid.row_comm(), kc, lcol);
    std::vector<double> urow;
    if (grid.row() == kr) {
      const std::int64_t il = rows.to_local(k);
      for (std::int64_t jl = right; jl < loc.width(); ++jl) urow.push_back(loc(il, jl));
    }
    urow = receive_doubles(grid.col_comm(), kr, urow);

#pragma omp parallel for schedule(static) if ((loc.height() - below) * (loc.width() - right) > 16384)
    for (std::int64_t jl = right; jl < loc.width(); ++jl) {
      const double u = urow[static_cast<std::size_t>(jl - right)];
      for (std::int64_t il = below; il < loc.height(); ++il)
        loc(il, jl) -= lcol[static_cast<std::size_t>(il - below)] * u;
    }
  }
  return pivots;
}

void lu_solve_plain(const DistMatrix<double>& lu, const PivotVector& pivots, DistMatrix<double>& b) {
  const Grid& grid = lu.grid();
  const std::int64_t n = lu.height();
  const auto& rows = lu.distribution().rows;
  const auto& cols = lu.distribution().cols;
  auto f = lu.local();
  auto x = b.local();

  for (std::int64_t k = 0; k < n; ++k) swap_rows(b, k, pivots[static_cast<std::size_t>(k)]);

  auto row_of_b = [&](std::int64_t k, int kr) {
    std::vector<double> mine;
    if (grid.row() == kr) {
      const std::int64_t il = rows.to_local(k);
      for (std::int64_t jl = 0; jl < x.width(); ++jl) mine.push_back(x(il, jl));
    }
    return receive_doubles(grid.col_comm(), kr, mine);
  };
  auto column_of_factor = [&](std::int64_t k, int kc, std::int64_t il0, std::int64_t il1) {
    std::vector<double> mine;
    if (grid.col() == kc) {
      const std::int64_t jl = cols.to_local(k);
      for (std::int64_t il = il0; il < il1; ++il) mine.push_back(f(il, jl));
    }
    return receive_doubles(grid.row_comm(), kc, mine);
  };

  // Forward substitution with unit L.
  for (std::int64_t k = 0; k < n; ++k) {
    const int kr = rows.owner_of(k);
    const int kc = cols.owner_of(k);
    const std::int64_t below = rows.count(k + 1);
    auto xk = row_of_b(k, kr);
    auto lk = column_of_factor(k, kc, below, f.height());
    for (std::int64_t jl = 0; jl < x.width(); ++jl)
      for (std::int64_t il = below; il < x.height(); ++il)
        x(il, jl) -= lk[static_cast<std::size_t>(il - below)] * xk[static_cast<std::size_t>(jl)];
  }

  // Back substitution with U.
  for (std::int64_t k = n - 1; k >= 0; --k) {
    const int kr = rows.owner_of(k);
    const int kc = cols.owner_of(k);
    if (grid.row() == kr) {
      std::vector<double> mine;
      if (grid.col() == kc) mine.push_back(f(rows.to_local(k), cols.to_local(k)));
      const double ukk = receive_doubles(grid.row_comm(), kc, mine)[0];
      const std::int64_t il = rows.to_local(k);
      for (std::int64_t jl = 0; jl < x.width(); ++jl) x(il, jl) /= ukk;
    }
    const std::int64_t above = rows.count(k);
    auto xk = row_of_b(k, kr);
    auto uk = column_of_factor(k, kc, 0, above);
    for (std::int64_t jl = 0; jl < x.width(); ++jl)
      for (std::int64_t il = 0; il < above; ++il)
        x(il, jl) -= uk[static_cast<std::size_t>(il)] * xk[static_cast<std::size_t>(jl)];
  }
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.height() + bottom.height(), top.width());
  for (std::int64_t j = 0; j < top.width(); ++j) {
    for (std::int64_t i = 0; i < top.height(); ++i) out(i, j) = top(i, j);
    for (std::int64_t i = 0; i < bottom.height(); ++i) out(top.height() + i, j) = bottom(i, j);
  }
  return out;
}

} // namespace

void dist_gemm(double alpha, const DistMatrix<double>& a, const DistMatrix<double>& b, double beta,
               DistMatrix<double>& c, std::int64_t panel) {
  check_grid(a, b);
  check_grid(a, c);
  if (a.width() != b.height() || c.height() != a.height() || c.width() != b.width())
    throw UsageError("dist_gemm: dimension mismatch (" + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " * " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()) + " -> " + std::to_string(c.height()) + "x" +
                     std::to_string(c.width()) + ")");
  if (panel < 1) throw UsageError("dist_gemm: panel width must be positive");
  std::optional<DistMatrix<double>> ha;
  std::optional<DistMatrix<double>> hb;
  const auto& pa = plain_mcmr(a, ha);
  const auto& pb = plain_mcmr(b, hb);
  with_plain_mcmr(c, [&](DistMatrix<double>& pc) { gemm_plain(alpha, pa, pb, beta, pc, panel); });
}

PivotVector dist_lu_factor(DistMatrix<double>& a) {
  if (a.height() != a.width()) throw UsageError("dist_lu_factor: matrix must be square");
  return with_plain_mcmr(a, [](DistMatrix<double>& pa) { return lu_plain(pa); });
}

void dist_lu_solve(const DistMatrix<double>& lu, const PivotVector& pivots, DistMatrix<double>& b) {
  check_grid(lu, b);
  if (lu.height() != lu.width() || b.height() != lu.height() ||
      static_cast<std::int64_t>(pivots.size()) != lu.height())
    throw UsageError("dist_lu_solve: shape mismatch");
  std::optional<DistMatrix<double>> hlu;
  const auto& plu = plain_mcmr(lu, hlu);
  with_plain_mcmr(b, [&](DistMatrix<double>& pb) { lu_solve_plain(plu, pivots, pb); });
}

Matrix tsqr(const DistMatrix<double>& a) {
  const std::int64_t w = a.width();
  if (w > a.height()) throw UsageError("tsqr: matrix must be tall (height >= width)");
  std::optional<DistMatrix<double>> holder;
  const DistMatrix<double>* src = &a;
  if (a.scheme() != DistScheme::VC_STAR || !a.aligned()) {
    holder.emplace(redistribute(a, DistScheme::VC_STAR));
    src = &*holder;
  }
  const Communicator& world = a.grid().world();

  // Local blocks shorter than w are padded with zero rows; this leaves
  // R^T R = A^T A unchanged.
  auto loc = src->local();
  Matrix block(std::max(loc.height(), w), w);
  for (std::int64_t j = 0; j < w; ++j)
    for (std::int64_t i = 0; i < loc.height(); ++i) block(i, j) = loc(i, j);
  Matrix r = local_qr(block.cref(), false).r;

  // Binary reduction tree.  A rank without a partner at some level simply
  // carries its R up to the next level.
  const int me = world.rank();
  for (int step = 1; step < world.size(); step *= 2) {
    if (me % (2 * step) == 0) {
      const int partner = me + step;
      if (partner >= world.size()) continue;
      auto values = wire::decode_f64(world.recv(partner, kTsqrTag));
      Matrix other(w, w);
      std::copy(values.begin(), values.end(), other.data());
      r = local_qr(stack(r, other).cref(), false).r;
    } else if (me % (2 * step) == step) {
      world.send(me - step, kTsqrTag,
                 wire::encode(std::span<const double>(r.data(), static_cast<std::size_t>(w * w))));
      break;
    }
  }

  auto root_r = broadcast_values<double>(
      world, 0,
      me == 0 ? std::span<const double>(r.data(), static_cast<std::size_t>(w * w)) : std::span<const double>());
  Matrix out(w, w);
  std::copy(root_r.begin(), root_r.end(), out.data());
  return out;
}

SvdResult dist_svd_values_vt(const DistMatrix<double>& a) {
  if (a.height() < a.width())
    throw UsageError("dist_svd_values_vt: matrix must satisfy height >= width (transpose a copy first)");
  Matrix r = tsqr(a);
  SvdFactors f = jacobi_svd(r.cref());
  return {std::move(f.sigma), std::move(f.v)};
}

HermitianEigResult hermitian_eig(const DistMatrix<double>& a, Triangle uplo) {
  if (a.height() != a.width()) throw UsageError("hermitian_eig: matrix must be square");
  Matrix full = gather(a);
  const std::int64_t n = full.height();
  for (std::int64_t j = 0; j < n; ++j)
    for (std::int64_t i = 0; i < j; ++i) {
      if (uplo == Triangle::Lower)
        full(i, j) = full(j, i);
      else
        full(j, i) = full(i, j);
    }
  EigFactors f = jacobi_sym_eig(full.cref());
  return {std::move(f.values),
          DistMatrix<double>::from_replicated(a.grid_ptr(), f.vectors, DistScheme::STAR_STAR)};
}

} // namespace distla
