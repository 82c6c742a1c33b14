#include "distla/c_api.h"

#include "distla/dense_algorithms.hpp"
#include "distla/stats.hpp"

#include <atomic>
#include <cstring>

using namespace distla;

struct distla_matrix {
  explicit distla_matrix(AnyDistMatrix matrix) : m(std::move(matrix)) { live.fetch_add(1); }
  ~distla_matrix() { live.fetch_sub(1); }
  distla_matrix(const distla_matrix&) = delete;
  distla_matrix& operator=(const distla_matrix&) = delete;

  AnyDistMatrix m;
  static inline std::atomic<std::int64_t> live{0};
};

namespace {

thread_local std::string last_error;
thread_local std::string print_buffer;

const GridPtr& self_grid() {
  static const GridPtr grid = Grid::make(self_world(), 1, 1);
  return grid;
}

template <typename Body>
int guarded(Body&& body) {
  try {
    body();
    last_error.clear();
    return DISTLA_OK;
  } catch (const UsageError& e) {
    last_error = e.what();
    return DISTLA_USAGE_ERROR;
  } catch (const SingularMatrixError& e) {
    last_error = e.what();
    return DISTLA_SINGULAR;
  } catch (const ConvergenceError& e) {
    last_error = e.what();
    return DISTLA_NO_CONVERGENCE;
  } catch (const ParseError& e) {
    last_error = e.what();
    return DISTLA_PARSE_ERROR;
  } catch (const std::exception& e) {
    last_error = e.what();
    return DISTLA_ERROR;
  } catch (...) {
    last_error = "unknown error";
    return DISTLA_ERROR;
  }
}

template <typename H>
H* require(H* handle) {
  if (handle == nullptr) throw UsageError("null matrix handle");
  return handle;
}

void require_out(const void* p) {
  if (p == nullptr) throw UsageError("null output pointer");
}

/// The handle's matrix as DistMatrix<T>, or an error naming both tags.
template <typename T>
DistMatrix<T>& typed(const distla_matrix* h) {
  auto* m = const_cast<distla_matrix*>(require(h));
  if (m->m.datatype() != datatype_v<T>)
    throw UsageError(std::string("matrix has datatype '") + tag_char(m->m.datatype()) +
                     "' but the entry point expects '" + tag_char(datatype_v<T>) + "'");
  return m->m.as<T>();
}

/// Datatype check for two-operand entry points: the suffix type is checked
/// on y, then the pair is checked with the message the operators use.
template <typename T>
void check_pair(const distla_matrix* x, const distla_matrix* y) {
  typed<T>(y);
  check_same_type_and_size(require(x)->m, y->m);
}

template <typename T>
distla_matrix* wrap(DistMatrix<T> m) {
  return new distla_matrix(AnyDistMatrix(std::move(m)));
}

template <typename T>
int create(std::int64_t h, std::int64_t w, distla_matrix** out) {
  return guarded([&] {
    require_out(out);
    *out = wrap(DistMatrix<T>(self_grid(), h, w));
  });
}

} // namespace

extern "C" {

const char* distla_last_error(void) { return last_error.c_str(); }
int64_t distla_live_objects(void) { return distla_matrix::live.load(); }

int distla_create_d(int64_t height, int64_t width, distla_matrix** out) { return create<double>(height, width, out); }
int distla_create_i(int64_t height, int64_t width, distla_matrix** out) {
  return create<std::int64_t>(height, width, out);
}

int distla_destroy(distla_matrix* m) {
  return guarded([&] { delete require(m); });
}

int distla_datatype(const distla_matrix* m, char* tag) {
  return guarded([&] {
    require_out(tag);
    *tag = tag_char(require(m)->m.datatype());
  });
}

int distla_height(const distla_matrix* m, int64_t* out) {
  return guarded([&] {
    require_out(out);
    *out = require(m)->m.height();
  });
}

int distla_width(const distla_matrix* m, int64_t* out) {
  return guarded([&] {
    require_out(out);
    *out = require(m)->m.width();
  });
}

int distla_ldim(const distla_matrix* m, int64_t* out) {
  return guarded([&] {
    require_out(out);
    *out = require(m)->m.ldim();
  });
}

int distla_get_d(const distla_matrix* m, int64_t i, int64_t j, double* out) {
  return guarded([&] {
    require_out(out);
    *out = typed<double>(m).get(i, j);
  });
}

int distla_get_i(const distla_matrix* m, int64_t i, int64_t j, int64_t* out) {
  return guarded([&] {
    require_out(out);
    *out = typed<std::int64_t>(m).get(i, j);
  });
}

int distla_set_d(distla_matrix* m, int64_t i, int64_t j, double value) {
  return guarded([&] { typed<double>(m).set(i, j, value); });
}

int distla_set_i(distla_matrix* m, int64_t i, int64_t j, int64_t value) {
  return guarded([&] { typed<std::int64_t>(m).set(i, j, value); });
}

int distla_fill_uniform_d(distla_matrix* m, uint64_t seed) {
  return guarded([&] { typed<double>(m).fill_uniform(seed); });
}

int distla_fill_uniform_i(distla_matrix* m, uint64_t seed) {
  return guarded([&] { typed<std::int64_t>(m).fill_uniform(seed); });
}

int distla_view(distla_matrix* m, int64_t row_begin, int64_t row_end, int64_t col_begin, int64_t col_end,
                distla_matrix** out) {
  return guarded([&] {
    require_out(out);
    *out = new distla_matrix(require(m)->m.view(row_begin, row_end, col_begin, col_end));
  });
}

int distla_axpy_d(double alpha, const distla_matrix* x, distla_matrix* y) {
  return guarded([&] {
    check_pair<double>(x, y);
    axpy(alpha, x->m.as<double>(), y->m.as<double>());
  });
}

int distla_axpy_i(int64_t alpha, const distla_matrix* x, distla_matrix* y) {
  return guarded([&] {
    check_pair<std::int64_t>(x, y);
    axpy<std::int64_t>(alpha, x->m.as<std::int64_t>(), y->m.as<std::int64_t>());
  });
}

int distla_copy_d(const distla_matrix* src, distla_matrix* dst) {
  return guarded([&] {
    check_pair<double>(src, dst);
    redistribute_into(src->m.as<double>(), dst->m.as<double>());
  });
}

int distla_copy_i(const distla_matrix* src, distla_matrix* dst) {
  return guarded([&] {
    check_pair<std::int64_t>(src, dst);
    redistribute_into(src->m.as<std::int64_t>(), dst->m.as<std::int64_t>());
  });
}

int distla_gemm_d(double alpha, const distla_matrix* a, const distla_matrix* b, double beta, distla_matrix* c) {
  return guarded([&] { dist_gemm(alpha, typed<double>(a), typed<double>(b), beta, typed<double>(c)); });
}

int distla_maxnorm_d(const distla_matrix* m, double* out) {
  return guarded([&] {
    require_out(out);
    *out = dist_norm(NormKind::Max, typed<double>(m));
  });
}

int distla_maxnorm_i(const distla_matrix* m, double* out) {
  return guarded([&] {
    require_out(out);
    *out = dist_norm(NormKind::Max, typed<std::int64_t>(m));
  });
}

int distla_frobenius_d(const distla_matrix* m, double* out) {
  return guarded([&] {
    require_out(out);
    *out = dist_norm(NormKind::Frobenius, typed<double>(m));
  });
}

int distla_frobenius_i(const distla_matrix* m, double* out) {
  return guarded([&] {
    require_out(out);
    *out = dist_norm(NormKind::Frobenius, typed<std::int64_t>(m));
  });
}

int distla_svd_d(const distla_matrix* a, double* sigma, distla_matrix** v) {
  return guarded([&] {
    require_out(sigma);
    require_out(v);
    auto s = dist_svd_values_vt(typed<double>(a));
    std::copy(s.sigma.begin(), s.sigma.end(), sigma);
    *v = wrap(DistMatrix<double>::from_replicated(self_grid(), s.v));
  });
}

int distla_eig_d(const distla_matrix* a, double* values, distla_matrix** vectors) {
  return guarded([&] {
    require_out(values);
    require_out(vectors);
    auto e = hermitian_eig(typed<double>(a), Triangle::Lower);
    std::copy(e.values.begin(), e.values.end(), values);
    *vectors = wrap(redistribute(e.vectors, DistScheme::MC_MR));
  });
}

int distla_scale_d(const distla_matrix* a, int center, int scale, distla_matrix** out, double* centers,
                   double* scales) {
  return guarded([&] {
    require_out(out);
    auto s = center_scale(typed<double>(a), center != 0, scale != 0);
    if (centers) std::copy(s.center.begin(), s.center.end(), centers);
    if (scales) std::copy(s.scale.begin(), s.scale.end(), scales);
    *out = wrap(std::move(s.matrix));
  });
}

int distla_prcomp_d(const distla_matrix* a, int center, int scale, double* sdev, distla_matrix** rotation,
                    double* centers) {
  return guarded([&] {
    require_out(sdev);
    require_out(rotation);
    PcaOptions options;
    options.center = center != 0;
    options.scale = scale != 0;
    auto p = prcomp(typed<double>(a), options);
    std::copy(p.sdev.begin(), p.sdev.end(), sdev);
    if (centers) std::copy(p.center.begin(), p.center.end(), centers);
    *rotation = wrap(DistMatrix<double>::from_replicated(self_grid(), p.rotation));
  });
}

int distla_print_d(const distla_matrix* m, const char** text) {
  return guarded([&] {
    require_out(text);
    print_buffer = print_to_string(typed<double>(m));
    *text = print_buffer.c_str();
  });
}

int distla_print_i(const distla_matrix* m, const char** text) {
  return guarded([&] {
    require_out(text);
    print_buffer = print_to_string(typed<std::int64_t>(m));
    *text = print_buffer.c_str();
  });
}

} // extern "C"
