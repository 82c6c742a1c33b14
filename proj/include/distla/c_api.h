#ifndef DISTLA_C_API_H
#define DISTLA_C_API_H

/* Flat C entry points for foreign-language front ends.  Matrices live on a
 * single-rank 1x1 grid owned by the library.  Type-dependent entry points
 * carry a datatype suffix (_d for double, _i for int64) and reject handles
 * of the other type.  Every function returns a status code; on failure the
 * message is available from distla_last_error() on the same thread.
 * Indices are 0-based and ranges half-open. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct distla_matrix distla_matrix;

enum {
  DISTLA_OK = 0,
  DISTLA_USAGE_ERROR = 1,
  DISTLA_SINGULAR = 2,
  DISTLA_NO_CONVERGENCE = 3,
  DISTLA_PARSE_ERROR = 4,
  DISTLA_ERROR = 5
};

const char* distla_last_error(void);
/* Number of handles created and not yet destroyed. */
int64_t distla_live_objects(void);

int distla_create_d(int64_t height, int64_t width, distla_matrix** out);
int distla_create_i(int64_t height, int64_t width, distla_matrix** out);
int distla_destroy(distla_matrix* m);

int distla_datatype(const distla_matrix* m, char* tag);
int distla_height(const distla_matrix* m, int64_t* out);
int distla_width(const distla_matrix* m, int64_t* out);
int distla_ldim(const distla_matrix* m, int64_t* out);

int distla_get_d(const distla_matrix* m, int64_t i, int64_t j, double* out);
int distla_get_i(const distla_matrix* m, int64_t i, int64_t j, int64_t* out);
int distla_set_d(distla_matrix* m, int64_t i, int64_t j, double value);
int distla_set_i(distla_matrix* m, int64_t i, int64_t j, int64_t value);
int distla_fill_uniform_d(distla_matrix* m, uint64_t seed);
int distla_fill_uniform_i(distla_matrix* m, uint64_t seed);

/* New handle aliasing [row_begin, row_end) x [col_begin, col_end). */
int distla_view(distla_matrix* m, int64_t row_begin, int64_t row_end, int64_t col_begin, int64_t col_end,
                distla_matrix** out);

/* y <- alpha * x + y.  Datatype is checked before size. */
int distla_axpy_d(double alpha, const distla_matrix* x, distla_matrix* y);
int distla_axpy_i(int64_t alpha, const distla_matrix* x, distla_matrix* y);
/* dst <- src, same datatype and size. */
int distla_copy_d(const distla_matrix* src, distla_matrix* dst);
int distla_copy_i(const distla_matrix* src, distla_matrix* dst);

/* C <- alpha * A * B + beta * C. */
int distla_gemm_d(double alpha, const distla_matrix* a, const distla_matrix* b, double beta, distla_matrix* c);

int distla_maxnorm_d(const distla_matrix* m, double* out);
int distla_maxnorm_i(const distla_matrix* m, double* out);
int distla_frobenius_d(const distla_matrix* m, double* out);
int distla_frobenius_i(const distla_matrix* m, double* out);

/* Tall matrix (height >= width): sigma receives width values, *v a new
 * width x width handle. */
int distla_svd_d(const distla_matrix* a, double* sigma, distla_matrix** v);
/* Symmetric matrix, lower triangle read: values ascending, *vectors new. */
int distla_eig_d(const distla_matrix* a, double* values, distla_matrix** vectors);
/* center/scale outputs receive width values each and may be NULL; they are
 * left untouched when the corresponding flag is off. */
int distla_scale_d(const distla_matrix* a, int center, int scale, distla_matrix** out, double* centers,
                   double* scales);
int distla_prcomp_d(const distla_matrix* a, int center, int scale, double* sdev, distla_matrix** rotation,
                    double* centers);

/* The print text; valid until the next print call on the same thread. */
int distla_print_d(const distla_matrix* m, const char** text);
int distla_print_i(const distla_matrix* m, const char** text);

#ifdef __cplusplus
}
#endif

#endif
