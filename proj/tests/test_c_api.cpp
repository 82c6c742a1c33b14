#include "distla/c_api.h"
#include "distla/dense_algorithms.hpp"
#include "distla/stats.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <dlfcn.h>

using namespace distla;

namespace {

struct Handle {
  distla_matrix* p = nullptr;
  ~Handle() {
    if (p) distla_destroy(p);
  }
};

Handle make_d(std::int64_t h, std::int64_t w, std::uint64_t seed) {
  Handle m;
  EXPECT_EQ(distla_create_d(h, w, &m.p), DISTLA_OK);
  EXPECT_EQ(distla_fill_uniform_d(m.p, seed), DISTLA_OK);
  return m;
}

Matrix to_local(const distla_matrix* m) {
  std::int64_t h = 0, w = 0;
  distla_height(m, &h);
  distla_width(m, &w);
  Matrix out(h, w);
  for (std::int64_t j = 0; j < w; ++j)
    for (std::int64_t i = 0; i < h; ++i) EXPECT_EQ(distla_get_d(m, i, j, &out(i, j)), DISTLA_OK);
  return out;
}

GridPtr single() { return Grid::make(self_world(), 1, 1); }

} // namespace

TEST(CApi, CreateQueryDestroy) {
  std::int64_t before = distla_live_objects();
  distla_matrix* m = nullptr;
  ASSERT_EQ(distla_create_d(3, 5, &m), DISTLA_OK);
  EXPECT_EQ(distla_live_objects(), before + 1);
  std::int64_t h = 0, w = 0, ld = 0;
  char tag = 0;
  distla_height(m, &h);
  distla_width(m, &w);
  distla_ldim(m, &ld);
  distla_datatype(m, &tag);
  EXPECT_EQ(h, 3);
  EXPECT_EQ(w, 5);
  EXPECT_EQ(ld, 3);
  EXPECT_EQ(tag, 'd');
  EXPECT_EQ(distla_destroy(m), DISTLA_OK);
  EXPECT_EQ(distla_live_objects(), before);
}

TEST(CApi, IntegerHandles) {
  Handle m;
  ASSERT_EQ(distla_create_i(2, 2, &m.p), DISTLA_OK);
  char tag = 0;
  distla_datatype(m.p, &tag);
  EXPECT_EQ(tag, 'i');
  EXPECT_EQ(distla_set_i(m.p, 1, 0, -5), DISTLA_OK);
  std::int64_t v = 0;
  EXPECT_EQ(distla_get_i(m.p, 1, 0, &v), DISTLA_OK);
  EXPECT_EQ(v, -5);
  double d = 0;
  EXPECT_EQ(distla_get_d(m.p, 1, 0, &d), DISTLA_USAGE_ERROR);
  EXPECT_NE(std::string(distla_last_error()).find("'i'"), std::string::npos);
}

TEST(CApi, ErrorsReportStatusAndMessage) {
  Handle m = make_d(2, 2, 1);
  double v = 0;
  EXPECT_EQ(distla_get_d(m.p, 2, 0, &v), DISTLA_USAGE_ERROR);
  EXPECT_NE(std::string(distla_last_error()).find("out of bounds"), std::string::npos);
  EXPECT_EQ(distla_get_d(m.p, 0, 0, &v), DISTLA_OK);
  EXPECT_STREQ(distla_last_error(), "");
  EXPECT_EQ(distla_create_d(-1, 2, nullptr), DISTLA_USAGE_ERROR);
  EXPECT_EQ(distla_height(nullptr, nullptr), DISTLA_USAGE_ERROR);
}

TEST(CApi, AxpyMessagesAreExact) {
  Handle a = make_d(2, 2, 2), b = make_d(2, 3, 3), c = make_d(3, 2, 4);
  Handle n;
  ASSERT_EQ(distla_create_i(2, 2, &n.p), DISTLA_OK);
  EXPECT_EQ(distla_axpy_d(1.0, n.p, a.p), DISTLA_USAGE_ERROR);
  EXPECT_STREQ(distla_last_error(), "Matrices must have the same datatype");
  EXPECT_EQ(distla_axpy_d(1.0, b.p, a.p), DISTLA_USAGE_ERROR);
  EXPECT_STREQ(distla_last_error(), "Matrices must have the same size");
  EXPECT_EQ(distla_axpy_d(1.0, c.p, a.p), DISTLA_USAGE_ERROR);
  EXPECT_STREQ(distla_last_error(), "Matrices must have the same size");
}

TEST(CApi, AddRecipeMatchesCoreBitwise) {
  // fresh matrix, copy(e1), axpy(1.0, e2)
  Handle e1 = make_d(4, 3, 5), e2 = make_d(4, 3, 6), sum;
  ASSERT_EQ(distla_create_d(4, 3, &sum.p), DISTLA_OK);
  ASSERT_EQ(distla_copy_d(e1.p, sum.p), DISTLA_OK);
  ASSERT_EQ(distla_axpy_d(1.0, e2.p, sum.p), DISTLA_OK);

  auto g = single();
  DistMatrix<double> x(g, 4, 3), y(g, 4, 3);
  x.fill_uniform(5);
  y.fill_uniform(6);
  DistMatrix<double> s(g, 4, 3);
  copy(x, s);
  axpy(1.0, y, s);
  EXPECT_TRUE(check::bitwise_equal(to_local(sum.p), gather(s)));
}

TEST(CApi, ViewAliasesAndOutlivesParent) {
  Handle a = make_d(6, 6, 7);
  Matrix shadow = to_local(a.p);
  distla_matrix* v = nullptr;
  ASSERT_EQ(distla_view(a.p, 1, 4, 0, 3, &v), DISTLA_OK);
  ASSERT_EQ(distla_set_d(v, 2, 2, 9.5), DISTLA_OK);
  shadow(3, 2) = 9.5;
  EXPECT_TRUE(check::bitwise_equal(to_local(a.p), shadow));
  distla_destroy(a.p);
  a.p = nullptr;
  double got = 0;
  EXPECT_EQ(distla_get_d(v, 2, 2, &got), DISTLA_OK);
  EXPECT_EQ(got, 9.5);
  distla_destroy(v);
}

TEST(CApi, GemmNormsMatchCore) {
  Handle a = make_d(5, 4, 8), b = make_d(4, 3, 9), c = make_d(5, 3, 10);
  ASSERT_EQ(distla_gemm_d(2.0, a.p, b.p, 0.5, c.p), DISTLA_OK);
  auto g = single();
  DistMatrix<double> x(g, 5, 4), y(g, 4, 3), z(g, 5, 3);
  x.fill_uniform(8);
  y.fill_uniform(9);
  z.fill_uniform(10);
  dist_gemm(2.0, x, y, 0.5, z);
  EXPECT_TRUE(check::bitwise_equal(to_local(c.p), gather(z)));
  double mx = 0, fro = 0;
  ASSERT_EQ(distla_maxnorm_d(c.p, &mx), DISTLA_OK);
  ASSERT_EQ(distla_frobenius_d(c.p, &fro), DISTLA_OK);
  EXPECT_EQ(mx, dist_norm(NormKind::Max, z));
  EXPECT_EQ(fro, dist_norm(NormKind::Frobenius, z));
  Handle n;
  ASSERT_EQ(distla_create_i(2, 2, &n.p), DISTLA_OK);
  distla_set_i(n.p, 0, 1, -3);
  ASSERT_EQ(distla_maxnorm_i(n.p, &mx), DISTLA_OK);
  EXPECT_EQ(mx, 3.0);
  EXPECT_EQ(distla_gemm_d(1.0, a.p, a.p, 0.0, c.p), DISTLA_USAGE_ERROR);
}

TEST(CApi, SvdEigPrcompScaleMatchCore) {
  Handle a = make_d(12, 4, 11);
  auto g = single();
  DistMatrix<double> x(g, 12, 4);
  x.fill_uniform(11);

  double sigma[4];
  Handle v;
  ASSERT_EQ(distla_svd_d(a.p, sigma, &v.p), DISTLA_OK);
  auto s = dist_svd_values_vt(x);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(sigma[k], s.sigma[k]);
  EXPECT_TRUE(check::bitwise_equal(to_local(v.p), s.v));

  double sdev[4], centers[4];
  Handle rot;
  ASSERT_EQ(distla_prcomp_d(a.p, 1, 0, sdev, &rot.p, centers), DISTLA_OK);
  auto p = prcomp(x);
  for (int k = 0; k < 4; ++k) {
    EXPECT_EQ(sdev[k], p.sdev[k]);
    EXPECT_EQ(centers[k], p.center[k]);
  }
  EXPECT_TRUE(check::bitwise_equal(to_local(rot.p), p.rotation));

  Handle scaled;
  double sc[4];
  ASSERT_EQ(distla_scale_d(a.p, 1, 1, &scaled.p, centers, sc), DISTLA_OK);
  auto cs = center_scale(x, true, true);
  EXPECT_TRUE(check::bitwise_equal(to_local(scaled.p), gather(cs.matrix)));
  for (int k = 0; k < 4; ++k) EXPECT_EQ(sc[k], cs.scale[k]);

  Handle sym;
  ASSERT_EQ(distla_create_d(3, 3, &sym.p), DISTLA_OK);
  for (int k = 0; k < 3; ++k) distla_set_d(sym.p, k, k, 1.0);
  double values[3];
  Handle vec;
  ASSERT_EQ(distla_eig_d(sym.p, values, &vec.p), DISTLA_OK);
  for (double e : values) EXPECT_EQ(e, 1.0);
}

TEST(CApi, PrintMatchesCore) {
  Handle id;
  ASSERT_EQ(distla_create_d(2, 2, &id.p), DISTLA_OK);
  distla_set_d(id.p, 0, 0, 1.0);
  distla_set_d(id.p, 1, 1, 1.0);
  const char* text = nullptr;
  ASSERT_EQ(distla_print_d(id.p, &text), DISTLA_OK);
  EXPECT_STREQ(text, "2 x 2 [d]\n1 0\n0 1\n");
  EXPECT_EQ(distla_print_i(id.p, &text), DISTLA_USAGE_ERROR);
}

TEST(CApi, ConstructDropCyclesLeaveNoLiveObjects) {
  std::int64_t before = distla_live_objects();
  for (int k = 0; k < 10000; ++k) {
    distla_matrix* m = nullptr;
    ASSERT_EQ((k % 2 ? distla_create_i : distla_create_d)(2, 2, &m), DISTLA_OK);
    distla_destroy(m);
  }
  EXPECT_EQ(distla_live_objects(), before);
}

TEST(CApi, SharedLibraryExportsSuffixedNames) {
  void* lib = dlopen(DISTLA_C_LIBRARY, RTLD_NOW | RTLD_LOCAL);
  ASSERT_NE(lib, nullptr) << dlerror();
  for (const char* base : {"create", "get", "set", "axpy", "copy", "maxnorm", "frobenius", "print", "fill_uniform"})
    for (const char* tag : {"d", "i"}) {
      std::string name = std::string("distla_") + base + "_" + tag;
      EXPECT_NE(dlsym(lib, name.c_str()), nullptr) << name;
    }
  for (const char* name : {"distla_gemm_d", "distla_svd_d", "distla_eig_d", "distla_prcomp_d", "distla_scale_d",
                           "distla_destroy", "distla_height", "distla_width", "distla_view", "distla_last_error",
                           "distla_live_objects"})
    EXPECT_NE(dlsym(lib, name), nullptr) << name;
  using create_fn = int (*)(std::int64_t, std::int64_t, distla_matrix**);
  using destroy_fn = int (*)(distla_matrix*);
  using live_fn = std::int64_t (*)();
  auto create = reinterpret_cast<create_fn>(dlsym(lib, "distla_create_d"));
  auto destroy = reinterpret_cast<destroy_fn>(dlsym(lib, "distla_destroy"));
  auto live = reinterpret_cast<live_fn>(dlsym(lib, "distla_live_objects"));
  std::int64_t before = live();
  distla_matrix* m = nullptr;
  ASSERT_EQ(create(2, 2, &m), DISTLA_OK);
  EXPECT_EQ(live(), before + 1);
  destroy(m);
  EXPECT_EQ(live(), before);
  dlclose(lib);
}
