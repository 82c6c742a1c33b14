// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.  Every expected value comes from an oracle computed here
// on gathered data (triple loops, two-pass covariance, local Jacobi).

#include "distla/dense_algorithms.hpp"
#include "distla/stats.hpp"
#include "distla/table_io.hpp"
#include "test_support.hpp"
#include "tool_runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <mutex>
#include <random>
#include <sstream>

using namespace distla;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

/// Collects the first few failure descriptions of one criterion.
struct Verdict {
  int checks = 0;
  int failures = 0;
  std::vector<std::string> notes;
  std::mutex m;

  void expect(bool ok, const std::string& what) {
    std::lock_guard lock(m);
    ++checks;
    if (ok) return;
    ++failures;
    if (notes.size() < 5) notes.push_back(what);
  }
  bool passed() const { return failures == 0 && checks > 0; }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

std::pair<int, int> pick_grid(std::mt19937_64& rng) {
  const auto& shapes = check::grid_shapes();
  return shapes[std::uniform_int_distribution<std::size_t>(0, shapes.size() - 1)(rng)];
}

std::int64_t pick(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

double rel(double got, double want) { return want == 0.0 ? std::fabs(got) : std::fabs(got - want) / std::fabs(want); }

/// Matrix equality up to the sign of each column.
double column_sign_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::int64_t j = 0; j < a.width(); ++j) {
    double plus = 0.0, minus = 0.0;
    for (std::int64_t i = 0; i < a.height(); ++i) {
      plus = std::max(plus, std::fabs(a(i, j) - b(i, j)));
      minus = std::max(minus, std::fabs(a(i, j) + b(i, j)));
    }
    worst = std::max(worst, std::min(plus, minus));
  }
  return worst;
}

// ---------------------------------------------------------------------------

struct GridResults {
  Matrix gemm, axpy, table;
  double max_norm = 0, fro_norm = 0;
  std::vector<double> sdev;
  Matrix rotation;
};

void criterion_grid_invariance(Verdict& v, const fs::path& dir) {
  const std::string table = (dir / "grid_table.txt").string();
  check::on_grid(1, 1, [&](const GridPtr& g) {
    DistMatrix<double> t(g, 19, 7);
    t.fill_uniform(105);
    write_table(t, table);
  });

  for (std::uint64_t seed : {101u, 202u, 303u}) {
    std::vector<GridResults> results;
    std::mutex m;
    for (auto [r, c] : check::grid_shapes())
      check::on_grid(r, c, [&](const GridPtr& g) {
        GridResults out;
        DistMatrix<double> a(g, 37, 23), b(g, 23, 29), cc(g, 37, 29);
        a.fill_uniform(seed);
        b.fill_uniform(seed + 1);
        cc.fill_uniform(seed + 2);
        dist_gemm(0.5, a, b, 1.25, cc);
        out.gemm = gather(cc);

        DistMatrix<double> x(g, 37, 23), y(g, 37, 23);
        x.fill_uniform(seed + 3);
        y.fill_uniform(seed + 4);
        axpy(-0.75, x, y);
        out.axpy = gather(y);
        out.max_norm = dist_norm(NormKind::Max, y);
        out.fro_norm = dist_norm(NormKind::Frobenius, y);

        out.table = gather(read_table_dist(table, g).as<double>());

        DistMatrix<double> d(g, 60, 6);
        d.fill_uniform(seed + 5);
        auto p = prcomp(d);
        out.sdev = p.sdev;
        out.rotation = std::move(p.rotation);
        if (g->rank() == 0) {
          std::lock_guard lock(m);
          results.push_back(std::move(out));
        }
      });

    const GridResults& base = results.front();
    for (std::size_t k = 1; k < results.size(); ++k) {
      const GridResults& o = results[k];
      auto [r, c] = check::grid_shapes()[k];
      std::string where = " on " + std::to_string(r) + "x" + std::to_string(c) + " seed " + std::to_string(seed);
      v.expect(check::bitwise_equal(o.gemm, base.gemm), "gemm differs" + where);
      v.expect(check::bitwise_equal(o.axpy, base.axpy), "axpy differs" + where);
      v.expect(o.max_norm == base.max_norm, "max norm differs" + where);
      v.expect(rel(o.fro_norm, base.fro_norm) <= 1e-12, "frobenius differs" + where);
      v.expect(check::bitwise_equal(o.table, base.table), "table differs" + where);
      for (std::size_t i = 0; i < base.sdev.size(); ++i)
        v.expect(rel(o.sdev[i], base.sdev[i]) <= 1e-12, "sdev differs" + where);
      v.expect(check::rel_error(o.rotation, base.rotation) <= 1e-12,
               "rotation differs by " + fmt(check::rel_error(o.rotation, base.rotation)) + where);
    }
  }
}

void criterion_gemm(Verdict& v) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::int64_t m = pick(rng, 1, 64), k = pick(rng, 1, 64), n = pick(rng, 1, 64);
    const std::int64_t panel = pick(rng, 1, 40);
    const double alpha = std::uniform_real_distribution<double>(-2, 2)(rng);
    const double beta = t % 4 == 0 ? 0.0 : std::uniform_real_distribution<double>(-2, 2)(rng);
    Matrix a = Matrix::uniform(m, k, 1000 + t), b = Matrix::uniform(k, n, 2000 + t), c = Matrix::uniform(m, n, 3000 + t);
    Matrix want = check::naive_gemm(a, b);
    for (std::int64_t j = 0; j < n; ++j)
      for (std::int64_t i = 0; i < m; ++i) want(i, j) = alpha * want(i, j) + beta * c(i, j);
    auto [r, cc] = pick_grid(rng);
    check::on_grid(r, cc, [&](const GridPtr& g) {
      auto da = DistMatrix<double>::from_replicated(g, a);
      auto db = DistMatrix<double>::from_replicated(g, b);
      auto dc = DistMatrix<double>::from_replicated(g, c);
      dist_gemm(alpha, da, db, beta, dc, panel);
      Matrix got = gather(dc);
      if (g->rank() != 0) return;
      double err = check::rel_error(got, want);
      v.expect(err <= 1e-13, "instance " + std::to_string(t) + " (" + std::to_string(m) + "x" + std::to_string(k) +
                                 "x" + std::to_string(n) + ") error " + fmt(err));
    });
  }
}

void criterion_lu(Verdict& v) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 100; ++t) {
    const std::int64_t n = pick(rng, 1, 32), nrhs = pick(rng, 1, 8);
    Matrix a = Matrix::uniform(n, n, 4000 + t);
    for (std::int64_t i = 0; i < n; ++i) {
      double off = 0.0;
      for (std::int64_t j = 0; j < n; ++j)
        if (j != i) off += std::fabs(a(i, j));
      a(i, i) = (a(i, i) < 0 ? -1.0 : 1.0) * (off + 1.0);  // strictly dominant rows
    }
    Matrix b = Matrix::uniform(n, nrhs, 5000 + t);
    auto [r, c] = pick_grid(rng);
    check::on_grid(r, c, [&](const GridPtr& g) {
      auto da = DistMatrix<double>::from_replicated(g, a);
      auto db = DistMatrix<double>::from_replicated(g, b);
      auto piv = dist_lu_factor(da);
      dist_lu_solve(da, piv, db);
      Matrix f = gather(da), x = gather(db);
      if (g->rank() != 0) return;
      double res = check::frobenius_diff(check::naive_gemm(a, x), b) / (check::frobenius(a) * check::frobenius(x));
      auto [l, u] = check::split_lu(f);
      double rec = check::rel_error(check::naive_gemm(l, u), check::apply_pivots(a, piv));
      std::string tag = "system " + std::to_string(t) + " n=" + std::to_string(n);
      v.expect(res <= 1e-12, tag + " residual " + fmt(res));
      v.expect(rec <= 1e-12, tag + " PA-LU " + fmt(rec));
    });
  }
}

void criterion_pca(Verdict& v) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const std::int64_t w = pick(rng, 1, 8);
    const std::int64_t h = pick(rng, 2 * w + 2, 200);
    Matrix x = Matrix::uniform(h, w, 6000 + t);
    // Unequal column spreads give a spectrum with distinct gaps.
    for (std::int64_t j = 0; j < w; ++j)
      for (std::int64_t i = 0; i < h; ++i) x(i, j) *= 1.0 + 0.5 * static_cast<double>(j);
    auto oracle = jacobi_sym_eig(check::covariance(x).cref());
    auto [r, c] = pick_grid(rng);
    check::on_grid(r, c, [&](const GridPtr& g) {
      auto dx = DistMatrix<double>::from_replicated(g, x);
      auto p = prcomp(dx);
      auto s = dist_svd_values_vt(center_scale(dx, true, false).matrix);
      if (g->rank() != 0) return;
      std::string tag = "dataset " + std::to_string(t) + " " + std::to_string(h) + "x" + std::to_string(w);
      const double lmax = oracle.values.back();
      for (std::int64_t k = 0; k < w; ++k) {
        const double lambda = oracle.values[static_cast<std::size_t>(w - 1 - k)];
        const double want = std::sqrt(std::max(0.0, lambda));
        v.expect(rel(p.sdev[k], want) <= 1e-8, tag + " sdev[" + std::to_string(k) + "] rel " + fmt(rel(p.sdev[k], want)));
        v.expect(p.sdev[k] == (1.0 / std::sqrt(static_cast<double>(h) - 1.0)) * s.sigma[k],
                 tag + " sdev is not sigma/sqrt(h-1)");
        double gap = std::numeric_limits<double>::infinity();
        if (k > 0) gap = std::min(gap, oracle.values[w - k] - lambda);
        if (k + 1 < w) gap = std::min(gap, lambda - oracle.values[w - 2 - k]);
        if (gap <= 1e-6) continue;
        Matrix got(w, 1), ref(w, 1);
        for (std::int64_t i = 0; i < w; ++i) {
          got(i, 0) = p.rotation(i, k);
          ref(i, 0) = oracle.vectors(i, w - 1 - k);
        }
        // Eigenvector perturbation scales like (rounding in C) / gap.
        double tol = 1e-12 * lmax / gap + 1e-10;
        double d = column_sign_diff(got, ref);
        v.expect(d <= tol, tag + " rotation[" + std::to_string(k) + "] off by " + fmt(d));
      }
    });
  }
}

void criterion_eigen(Verdict& v) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 100; ++t) {
    const std::int64_t n = pick(rng, 1, 12);
    Matrix a = Matrix::uniform(n, n, 7000 + t);
    for (std::int64_t j = 0; j < n; ++j)
      for (std::int64_t i = 0; i < j; ++i) a(i, j) = a(j, i);
    Matrix lower = Matrix::from(a.cref());
    for (std::int64_t j = 0; j < n; ++j)
      for (std::int64_t i = 0; i < j; ++i) lower(i, j) = 1e6;  // never read
    auto [r, c] = pick_grid(rng);
    check::on_grid(r, c, [&](const GridPtr& g) {
      auto e = hermitian_eig(DistMatrix<double>::from_replicated(g, lower), Triangle::Lower);
      Matrix x = gather(e.vectors);
      if (g->rank() != 0) return;
      Matrix xl = Matrix::from(x.cref());
      double trace = 0.0, sum = 0.0, scale = 0.0;
      for (std::int64_t k = 0; k < n; ++k) {
        for (std::int64_t i = 0; i < n; ++i) xl(i, k) *= e.values[k];
        trace += a(k, k);
        sum += e.values[k];
        scale += std::fabs(e.values[k]);
      }
      const double fro = check::frobenius(a);
      double residual = check::frobenius_diff(check::naive_gemm(a, x), xl);
      double orth = check::frobenius_diff(check::naive_gemm(check::transpose(x), x), Matrix::identity(n));
      double tr = scale == 0.0 ? std::fabs(sum - trace) : std::fabs(sum - trace) / scale;
      std::string tag = "matrix " + std::to_string(t) + " n=" + std::to_string(n);
      v.expect(residual <= 1e-10 * fro, tag + " residual " + fmt(residual / fro));
      v.expect(orth <= 1e-12, tag + " orthogonality " + fmt(orth));
      v.expect(tr <= 1e-12, tag + " trace " + fmt(tr));
      v.expect(std::is_sorted(e.values.begin(), e.values.end()), tag + " values not ascending");
    });
  }
}

void criterion_views(Verdict& v) {
  // 5 grids x 100 rectangles.  Every rank draws the same rectangles.
  int grid_index = 0;
  for (auto [r, c] : check::grid_shapes()) {
    const std::uint64_t seed = 600 + grid_index++;
    check::on_grid(r, c, [&](const GridPtr& g) {
      std::mt19937_64 rng(seed);
      for (int t = 0; t < 100; ++t) {
        const std::int64_t h = pick(rng, 1, 12), w = pick(rng, 1, 12);
        DistMatrix<double> parent(g, h, w);
        parent.fill_uniform(seed * 1000 + t);
        Matrix shadow = Matrix::uniform(h, w, seed * 1000 + t);
        std::int64_t r0 = pick(rng, 0, h), r1 = pick(rng, r0, h);
        std::int64_t c0 = pick(rng, 0, w), c1 = pick(rng, c0, w);
        auto view = parent.view(r0, r1, c0, c1);
        const std::string tag = "rect " + std::to_string(t) + " on " + g->shape_string();

        // Single-element write through the view.
        if (r1 > r0 && c1 > c0) {
          std::int64_t i = pick(rng, 0, r1 - r0 - 1), j = pick(rng, 0, c1 - c0 - 1);
          double value = static_cast<double>(t) + 0.5;
          view.set(i, j, value);
          shadow(r0 + i, c0 + j) = value;
          if (g->rank() == 0) v.expect(parent.get(r0 + i, c0 + j) == value, tag + " set not visible");
          else parent.get(r0 + i, c0 + j);
        }
        // Bulk write through the view: axpy of a fresh matrix.
        DistMatrix<double> delta(g, r1 - r0, c1 - c0);
        delta.fill_uniform(seed + 77 + t);
        axpy(2.0, delta, view);
        Matrix d = Matrix::uniform(r1 - r0, c1 - c0, seed + 77 + t);
        for (std::int64_t j = 0; j < c1 - c0; ++j)
          for (std::int64_t i = 0; i < r1 - r0; ++i) shadow(r0 + i, c0 + j) += 2.0 * d(i, j);
        // A nested view sees the same data.
        auto inner = view.view(0, (r1 - r0) / 2, 0, (c1 - c0 + 1) / 2);
        Matrix got = gather(parent), inner_got = gather(inner), view_got = gather(view);
        if (g->rank() != 0) continue;
        v.expect(check::bitwise_equal(got, shadow), tag + " parent differs from shadow");
        v.expect(check::bitwise_equal(view_got, Matrix::from(shadow.cref().block(r0, c0, r1 - r0, c1 - c0))),
                 tag + " view differs from shadow");
        v.expect(check::bitwise_equal(inner_got, Matrix::from(shadow.cref().block(r0, c0, inner.height(), inner.width()))),
                 tag + " nested view differs");
      }
    });
  }
}

std::string check_field(const check::Outcome& o) {
  auto text = check::lines(o.out);
  if (o.status != 0 || text.size() != 2) return "<failed>";
  auto f = check::fields(text[1]);
  return f.size() == 6 ? f[5] : "<malformed>";
}

void criterion_determinism(Verdict& v) {
  const char* commands[] = {"bench gemm --n 48", "bench solve --n 40 --nrhs 4", "bench pca --rows 150 --cols 6"};
  for (int ranks = 1; ranks <= 4; ++ranks)
    for (const char* cmd : commands) {
      std::string base = "--ranks " + std::to_string(ranks) + " --seed 17 " + cmd;
      std::string first = check_field(check::run_tool(base));
      std::string again = check_field(check::run_tool(base));
      std::string tcp = check_field(check::run_tool("--backend tcp " + base));
      std::string tcp_again = check_field(check::run_tool("--backend tcp " + base));
      v.expect(first.front() != '<', base + " failed");
      v.expect(first == again, base + " repeat differs: " + first + " vs " + again);
      v.expect(tcp == tcp_again, base + " tcp repeat differs");
      v.expect(first == tcp, base + " local " + first + " vs tcp " + tcp);
    }
}

bool valid_bench_csv(const check::Outcome& o, const std::string& op, int ranks) {
  auto text = check::lines(o.out);
  if (o.status != 0 || text.size() != 2 || text[0] != "op,n,ranks,grid,seconds,check") return false;
  auto f = check::fields(text[1]);
  if (f.size() != 6 || f[0] != op || f[2] != std::to_string(ranks)) return false;
  try {
    std::stod(f[4]);
    std::stod(f[5]);
  } catch (...) {
    return false;
  }
  return true;
}

void criterion_cli(Verdict& v, std::string& report) {
  std::ostringstream rep;
  auto timed = [](const std::string& args) {
    auto t0 = Clock::now();
    auto o = check::run_tool(args);
    return std::make_pair(o, std::chrono::duration<double>(Clock::now() - t0).count());
  };
  for (int ranks : {1, 2, 4}) {
    auto [o, secs] = timed("--ranks " + std::to_string(ranks) + " bench gemm --n 256");
    v.expect(valid_bench_csv(o, "gemm", ranks), "gemm ranks " + std::to_string(ranks) + " bad CSV: " + o.out);
    v.expect(secs < 60.0, "gemm ranks " + std::to_string(ranks) + " took " + fmt(secs) + " s");
    if (valid_bench_csv(o, "gemm", ranks)) v.expect(std::stod(check::fields(check::lines(o.out)[1])[5]) <= 1e-13, "gemm check");
    rep << "\n    gemm n=256 ranks=" << ranks << ": " << fmt(secs) << " s wall";
  }
  auto [pca, pca_secs] = timed("bench pca --rows 2000 --cols 50");
  v.expect(valid_bench_csv(pca, "pca", 1), "pca bad CSV: " + pca.out);
  v.expect(pca_secs < 60.0, "pca took " + fmt(pca_secs) + " s");
  rep << "\n    pca 2000x50: " << fmt(pca_secs) << " s wall";
  auto [ov, ov_secs] = timed("overhead");
  auto text = check::lines(ov.out);
  bool ok = ov.status == 0 && text.size() == 2 && check::fields(text[1]).size() == 9;
  v.expect(ok, "overhead output malformed: " + ov.out);
  if (ok) {
    auto f = check::fields(text[1]);
    rep << "\n    overhead: " << fmt(std::stod(f[4]) * 1e3) << " ms per call (reference 0.6 ms), rss " << f[6]
        << " MB (reference about 30 MB per process)";
  }
  report = rep.str();
}

} // namespace

int main() {
  const fs::path dir = fs::temp_directory_path() / ("distla_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);

  struct Criterion {
    int number;
    const char* name;
    std::function<void(Verdict&, std::string&)> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "grid invariance", [&](Verdict& v, std::string&) { criterion_grid_invariance(v, dir); }},
      {2, "gemm vs triple-loop oracle", [](Verdict& v, std::string&) { criterion_gemm(v); }},
      {3, "LU solve and PA = LU", [](Verdict& v, std::string&) { criterion_lu(v); }},
      {4, "PCA vs covariance eigen oracle", [](Verdict& v, std::string&) { criterion_pca(v); }},
      {5, "symmetric eigensolver", [](Verdict& v, std::string&) { criterion_eigen(v); }},
      {6, "view aliasing vs shadow copy", [](Verdict& v, std::string&) { criterion_views(v); }},
      {7, "determinism across runs and backends", [](Verdict& v, std::string&) { criterion_determinism(v); }},
      {8, "CLI smoke and report-only timings", [](Verdict& v, std::string& r) { criterion_cli(v, r); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    Verdict v;
    std::string report;
    auto t0 = Clock::now();
    try {
      c.run(v, report);
    } catch (const std::exception& e) {
      v.expect(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("criterion %d %s: %s (%d checks, %.2f s)%s\n", c.number, c.name, v.passed() ? "PASS" : "FAIL",
                v.checks, secs, report.c_str());
    for (const auto& note : v.notes) std::printf("    %s\n", note.c_str());
    std::fflush(stdout);
    if (!v.passed()) ++failed;
  }
  fs::remove_all(dir);
  return failed == 0 ? 0 : 1;
}
