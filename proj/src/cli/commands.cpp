#include "distla/cli.hpp"

#include "distla/c_api.h"
#include "distla/dense_algorithms.hpp"
#include "distla/stats.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>

namespace distla::cli {

namespace {

using Clock = std::chrono::steady_clock;

GridPtr make_grid(const RunConfig& config, const Communicator& world) {
  auto shape = parse_grid_spec(config.grid);
  if (shape) return Grid::make(world, shape->first, shape->second);
  return Grid::make(world);
}

/// Wall time of `kernel` on the slowest rank; the minimum over --repeat runs.
/// `prepare` runs untimed before every repetition.
template <typename Prepare, typename Kernel>
double timed(const RunConfig& config, const Communicator& world, Prepare&& prepare, Kernel&& kernel) {
  double best = std::numeric_limits<double>::infinity();
  for (int rep = 0; rep < config.repeat; ++rep) {
    prepare();
    world.barrier();
    auto t0 = Clock::now();
    kernel();
    double mine = std::chrono::duration<double>(Clock::now() - t0).count();
    best = std::min(best, world.allreduce(ReduceOp::Max, std::vector<double>{mine})[0]);
  }
  return best;
}

std::string seconds_field(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", s);
  return buf;
}

void bench_row(std::ostream& out, const Grid& grid, const std::string& op, std::int64_t n, double seconds,
               double check) {
  if (grid.rank() != 0) return;
  out << kBenchHeader << '\n'
      << op << ',' << n << ',' << grid.size() << ',' << grid.shape_string() << ',' << seconds_field(seconds) << ','
      << format_roundtrip(check) << '\n'
      << std::flush;
}

/// The check value is computed on rank 0 and shared so every rank agrees.
double share(const Communicator& world, double value) {
  return broadcast_values<double>(world, 0,
                                  world.rank() == 0 ? std::span<const double>(&value, 1) : std::span<const double>())[0];
}

Matrix triple_loop(const Matrix& a, const Matrix& b) {
  Matrix c(a.height(), b.width());
  for (std::int64_t i = 0; i < a.height(); ++i)
    for (std::int64_t j = 0; j < b.width(); ++j) {
      double s = 0.0;
      for (std::int64_t k = 0; k < a.width(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

double frobenius(const Matrix& a) { return local_norm(NormKind::Frobenius, a.cref()); }

double frobenius_diff(const Matrix& a, const Matrix& b) {
  Matrix d = Matrix::from(a.cref());
  local_axpy(-1.0, b.cref(), d.ref());
  return frobenius(d);
}

void bench_gemm(const RunConfig& config, const GridPtr& grid, std::ostream& out) {
  const std::int64_t n = config.command.n;
  DistMatrix<double> a(grid, n, n), b(grid, n, n), c(grid, n, n);
  a.fill_uniform(config.seed);
  b.fill_uniform(config.seed + 1);
  double seconds = timed(config, grid->world(), [] {}, [&] { dist_gemm(1.0, a, b, 0.0, c, config.command.panel); });
  Matrix ga = gather(a), gb = gather(b), gc = gather(c);
  double check = 0.0;
  if (grid->rank() == 0) {
    Matrix want = triple_loop(ga, gb);
    double norm = frobenius(want);
    check = norm == 0.0 ? frobenius_diff(gc, want) : frobenius_diff(gc, want) / norm;
  }
  bench_row(out, *grid, "gemm", n, seconds, share(grid->world(), check));
}

void bench_solve(const RunConfig& config, const GridPtr& grid, std::ostream& out) {
  const std::int64_t n = config.command.n;
  DistMatrix<double> a0(grid, n, n), b0(grid, n, config.command.nrhs);
  a0.fill_uniform(config.seed);
  for (std::int64_t k = 0; k < n; ++k)
    if (a0.is_local(k, k)) a0.local()(a0.distribution().rows.to_local(k), a0.distribution().cols.to_local(k)) += static_cast<double>(n);
  b0.fill_uniform(config.seed + 1);
  std::optional<DistMatrix<double>> lu, x;
  double seconds = timed(
      config, grid->world(),
      [&] {
        lu.emplace(a0.copy());
        x.emplace(b0.copy());
      },
      [&] {
        auto piv = dist_lu_factor(*lu);
        dist_lu_solve(*lu, piv, *x);
      });
  Matrix ga = gather(a0), gb = gather(b0), gx = gather(*x);
  double check = 0.0;
  if (grid->rank() == 0)
    check = frobenius_diff(triple_loop(ga, gx), gb) / (frobenius(ga) * frobenius(gx));
  bench_row(out, *grid, "solve", n, seconds, share(grid->world(), check));
}

/// Largest relative difference between sdev and the square roots of the
/// covariance eigenvalues, both computed here from the gathered data.
double pca_check(const Matrix& x, const std::vector<double>& sdev, bool center, bool scale) {
  const std::int64_t h = x.height(), w = x.width();
  Matrix y = Matrix::from(x.cref());
  for (std::int64_t j = 0; j < w; ++j) {
    double mean = 0.0;
    if (center) {
      for (std::int64_t i = 0; i < h; ++i) mean += x(i, j);
      mean /= static_cast<double>(h);
    }
    double sq = 0.0;
    for (std::int64_t i = 0; i < h; ++i) {
      y(i, j) = x(i, j) - mean;
      sq += y(i, j) * y(i, j);
    }
    if (scale)
      for (std::int64_t i = 0; i < h; ++i) y(i, j) /= std::sqrt(sq / static_cast<double>(h - 1));
  }
  Matrix cov(w, w);
  for (std::int64_t p = 0; p < w; ++p)
    for (std::int64_t q = 0; q < w; ++q) {
      double s = 0.0;
      for (std::int64_t i = 0; i < h; ++i) s += y(i, p) * y(i, q);
      cov(p, q) = s / static_cast<double>(h - 1);
    }
  auto eig = jacobi_sym_eig(cov.cref());
  double worst = 0.0;
  for (std::int64_t k = 0; k < w; ++k) {
    double want = std::sqrt(std::max(0.0, eig.values[static_cast<std::size_t>(w - 1 - k)]));
    double diff = std::fabs(sdev[static_cast<std::size_t>(k)] - want);
    worst = std::max(worst, want > 0.0 ? diff / want : diff);
  }
  return worst;
}

DistMatrix<double> load_double(const RunConfig& config, const GridPtr& grid) {
  TableFormat format = config.command.format;
  AnyDistMatrix any = read_table_dist(config.command.file, grid, format);
  if (any.datatype() == DataType::Double) return std::move(any.as<double>());
  auto& src = any.as<std::int64_t>();
  DistMatrix<double> out(grid, src.height(), src.width());
  auto s = src.local();
  auto d = out.local();
  for (std::int64_t j = 0; j < s.width(); ++j)
    for (std::int64_t i = 0; i < s.height(); ++i) d(i, j) = static_cast<double>(s(i, j));
  return out;
}

void bench_pca(const RunConfig& config, const GridPtr& grid, std::ostream& out) {
  const auto& c = config.command;
  std::optional<DistMatrix<double>> x;
  if (c.file.empty()) {
    x.emplace(grid, c.rows, c.cols);
    x->fill_uniform(config.seed);
  } else {
    x.emplace(load_double(config, grid));
  }
  PcaResult result;
  PcaOptions options;
  double seconds = timed(config, grid->world(), [] {}, [&] { result = prcomp(*x, options); });
  Matrix gx = gather(*x);
  double check = grid->rank() == 0 ? pca_check(gx, result.sdev, true, false) : 0.0;
  bench_row(out, *grid, "pca", x->height(), seconds, share(grid->world(), check));
}

void write_block(std::ostream& out, const std::string& label, const Matrix& m, bool exact) {
  out << label << '\n' << m.height() << " x " << m.width() << " [d]\n";
  for (std::int64_t i = 0; i < m.height(); ++i) {
    for (std::int64_t j = 0; j < m.width(); ++j) {
      if (j) out << ' ';
      out << (exact ? format_roundtrip(m(i, j)) : format_display(m(i, j)));
    }
    out << '\n';
  }
}

Matrix row_of(const std::vector<double>& v) {
  Matrix m(1, static_cast<std::int64_t>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) m(0, static_cast<std::int64_t>(k)) = v[k];
  return m;
}

void eigen_file(const RunConfig& config, const GridPtr& grid, std::ostream& out) {
  auto a = load_double(config, grid);
  auto e = hermitian_eig(a, Triangle::Lower);
  Matrix vectors = gather(e.vectors);
  if (grid->rank() != 0) return;
  write_block(out, "values", row_of(e.values), config.command.exact);
  write_block(out, "vectors", vectors, config.command.exact);
  out << std::flush;
}

void pca_file(const RunConfig& config, const GridPtr& grid, std::ostream& out) {
  auto a = load_double(config, grid);
  PcaOptions options;
  options.center = config.command.center;
  options.scale = config.command.scale;
  auto p = prcomp(a, options);
  if (grid->rank() != 0) return;
  write_block(out, "sdev", row_of(p.sdev), config.command.exact);
  write_block(out, "rotation", p.rotation, config.command.exact);
  write_block(out, "center", row_of(p.center), config.command.exact);
  out << std::flush;
}

void print_file(const RunConfig& config, const GridPtr& grid, std::ostream& out) {
  AnyDistMatrix a = read_table_dist(config.command.file, grid, config.command.format);
  print(a, out);
  if (grid->rank() == 0) out << std::flush;
}

double resident_megabytes() {
  std::ifstream status("/proc/self/status");
  std::string key;
  while (status >> key) {
    if (key == "VmRSS:") {
      double kb = 0;
      status >> kb;
      return kb / 1024.0;
    }
    status.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  }
  return 0.0;
}

void overhead(const RunConfig& config, const GridPtr& grid, std::ostream& out) {
  const std::int64_t calls = config.command.calls;
  distla_matrix* handle = nullptr;
  if (distla_create_d(8, 8, &handle) != DISTLA_OK) throw Error(distla_last_error());
  DistMatrix<double> direct(grid, 8, 8);

  // Both loops feed a sink so the calls cannot be dropped.
  std::int64_t sink = 0;
  const Communicator& world = grid->world();
  double wrapped = timed(config, world, [] {}, [&] {
    for (std::int64_t k = 0; k < calls; ++k) {
      std::int64_t w = 0;
      distla_width(handle, &w);
      sink += w;
    }
  });
  double plain = timed(config, world, [] {}, [&] {
    for (std::int64_t k = 0; k < calls; ++k) {
      sink += direct.width();
      asm volatile("" : "+r"(sink));
    }
  });
  distla_destroy(handle);
  double rss = world.allreduce(ReduceOp::Max, std::vector<double>{resident_megabytes()})[0];
  if (sink != 16 * calls * config.repeat) throw Error("overhead loop miscounted");
  if (grid->rank() != 0) return;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", rss);
  out << kOverheadHeader << '\n'
      << "width," << calls << ',' << grid->size() << ',' << grid->shape_string() << ','
      << format_roundtrip(wrapped / static_cast<double>(calls)) << ','
      << format_roundtrip(plain / static_cast<double>(calls)) << ',' << buf << ",0.6,30\n"
      << std::flush;
}

} // namespace

void run_command(const RunConfig& config, const Communicator& world, std::ostream& out) {
  GridPtr grid = make_grid(config, world);
  const std::string& name = config.command.name;
  if (name == "bench gemm")
    bench_gemm(config, grid, out);
  else if (name == "bench solve")
    bench_solve(config, grid, out);
  else if (name == "bench pca")
    bench_pca(config, grid, out);
  else if (name == "eigen")
    eigen_file(config, grid, out);
  else if (name == "pca")
    pca_file(config, grid, out);
  else if (name == "print")
    print_file(config, grid, out);
  else if (name == "overhead")
    overhead(config, grid, out);
  else
    throw UsageError("unknown command '" + name + "'");
}

} // namespace distla::cli
