#pragma once

// Distributed matrix: global shape, datatype, distribution scheme and the
// calling rank's local piece.
//
// Alignments are always zero for matrices created here.  A view
// [rowBegin, rowEnd) x [colBegin, colEnd) aliases its parent's storage:
// under element-cyclic distributions the parent-local rows/columns that
// fall inside the range are contiguous, so a view's local piece is a
// strided block of the parent's buffer.  The view keeps the parent's
// owners, which amounts to an alignment of rowBegin (colBegin) along each
// axis.

#include "distla/kernels.hpp"
#include "distla/local_matrix.hpp"
#include "distla/process_grid.hpp"

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <variant>

namespace distla {

template <typename T>
class DistMatrix {
public:
  using value_type = T;

  /// Zero-filled h x w matrix.  Collective only in the sense that every
  /// rank must construct it with the same arguments.
  DistMatrix(GridPtr grid, std::int64_t height, std::int64_t width,
             DistScheme scheme = DistScheme::MC_MR);

  DistMatrix(const DistMatrix&) = delete;
  DistMatrix& operator=(const DistMatrix&) = delete;
  DistMatrix(DistMatrix&&) noexcept = default;
  DistMatrix& operator=(DistMatrix&&) noexcept = default;

  /// Every rank passes the full matrix; each keeps what it owns.
  static DistMatrix from_replicated(GridPtr grid, const LocalMatrix<T>& full,
                                    DistScheme scheme = DistScheme::MC_MR);

  DataType datatype() const { return datatype_v<T>; }
  std::int64_t height() const { return height_; }
  std::int64_t width() const { return width_; }
  DistScheme scheme() const { return dist_.scheme; }
  const Grid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const { return grid_; }
  const Distribution& distribution() const { return dist_; }
  bool is_view() const { return view_; }
  bool aligned() const { return dist_.rows.align == 0 && dist_.cols.align == 0; }

  std::int64_t local_height() const { return local_height_; }
  std::int64_t local_width() const { return local_width_; }
  std::int64_t ldim() const { return storage_->ldim(); }
  MatrixRef<T> local();
  ConstMatrixRef<T> local() const;

  bool is_local(std::int64_t i, std::int64_t j) const {
    return dist_.rows.is_local(i) && dist_.cols.is_local(j);
  }
  std::int64_t global_row(std::int64_t i_local) const { return dist_.rows.to_global(i_local); }
  std::int64_t global_col(std::int64_t j_local) const { return dist_.cols.to_global(j_local); }
  /// World rank that owns (i, j); for [*,*] the calling rank.
  int owner_of(std::int64_t i, std::int64_t j) const;

  /// Collective: the owner broadcasts, every rank returns the same value.
  T get(std::int64_t i, std::int64_t j) const;
  /// Every rank passes the same value; owners store it.
  void set(std::int64_t i, std::int64_t j, T value);

  /// Element (i, j) of this matrix gets element_uniform(seed, i, j), so the
  /// global content does not depend on the grid.
  void fill_uniform(std::uint64_t seed);

  /// Aliasing view over [row_begin, row_end) x [col_begin, col_end).
  DistMatrix view(std::int64_t row_begin, std::int64_t row_end, std::int64_t col_begin,
                  std::int64_t col_end);

  /// Deep copy with the same scheme and zero alignment.
  DistMatrix copy() const;

  /// Collective: throws UsageError unless every rank agrees on shape,
  /// datatype and scheme.
  void check_consistent() const;

private:
  DistMatrix() = default;

  GridPtr grid_;
  std::int64_t height_ = 0;
  std::int64_t width_ = 0;
  Distribution dist_;
  std::shared_ptr<LocalMatrix<T>> storage_;
  std::int64_t local_row0_ = 0;
  std::int64_t local_col0_ = 0;
  std::int64_t local_height_ = 0;
  std::int64_t local_width_ = 0;
  bool view_ = false;
};

/// Collective.  Copies src's content into dst (same global shape, same
/// grid); dst may use any scheme and may be a view.
template <typename T>
void redistribute_into(const DistMatrix<T>& src, DistMatrix<T>& dst);

/// Collective.  Same content under `target`.
template <typename T>
DistMatrix<T> redistribute(const DistMatrix<T>& a, DistScheme target);

/// Collective.  Full replica of `a` on every rank.
template <typename T>
LocalMatrix<T> gather(const DistMatrix<T>& a);

/// Collective.  dst becomes a deep copy of src (shape, scheme, content).
template <typename T>
void copy(const DistMatrix<T>& src, DistMatrix<T>& dst);

/// Collective.  y <- alpha * x + y.  Purely local when the distributions
/// line up; otherwise x is first redistributed onto y's layout.
template <typename T>
void axpy(T alpha, const DistMatrix<T>& x, DistMatrix<T>& y);

/// Collective.  Same value on every rank.
template <typename T>
double dist_norm(NormKind kind, const DistMatrix<T>& a);

/// Collective.  World rank 0 writes "h x w [tag]" and then one line per
/// row, values in %.6g separated by single spaces.
template <typename T>
void print(const DistMatrix<T>& a, std::ostream& sink);

/// The text print() would write, on every rank.
template <typename T>
std::string print_to_string(const DistMatrix<T>& a);

std::string format_display(double v);
std::string format_display(std::int64_t v);

/// Shortest decimal that reads back to the same double.
std::string format_roundtrip(double v);
std::string format_roundtrip(std::int64_t v);

// ---------------------------------------------------------------------------
// Runtime-tagged matrix for layers that pick the datatype at run time.

class AnyDistMatrix {
public:
  using Variant = std::variant<DistMatrix<double>, DistMatrix<std::int64_t>>;

  AnyDistMatrix(DistMatrix<double> m) : m_(std::move(m)) {}
  AnyDistMatrix(DistMatrix<std::int64_t> m) : m_(std::move(m)) {}

  static AnyDistMatrix create(GridPtr grid, std::int64_t height, std::int64_t width, DataType tag,
                              DistScheme scheme = DistScheme::MC_MR);

  DataType datatype() const;
  std::int64_t height() const;
  std::int64_t width() const;
  std::int64_t ldim() const;
  DistScheme scheme() const;
  const GridPtr& grid_ptr() const;

  /// Integer matrices convert to double; set rejects non-integral values
  /// on an integer matrix.
  double get(std::int64_t i, std::int64_t j) const;
  void set(std::int64_t i, std::int64_t j, double value);

  AnyDistMatrix view(std::int64_t row_begin, std::int64_t row_end, std::int64_t col_begin,
                     std::int64_t col_end);
  AnyDistMatrix copy() const;
  void fill_uniform(std::uint64_t seed);

  Variant& variant() { return m_; }
  const Variant& variant() const { return m_; }
  template <typename T> DistMatrix<T>& as();
  template <typename T> const DistMatrix<T>& as() const;

private:
  Variant m_;
};

inline constexpr const char* kDatatypeMismatch = "Matrices must have the same datatype";
inline constexpr const char* kSizeMismatch = "Matrices must have the same size";

/// Datatype first, then both dimensions.
void check_same_type_and_size(const AnyDistMatrix& a, const AnyDistMatrix& b);

void axpy(double alpha, const AnyDistMatrix& x, AnyDistMatrix& y);
void copy(const AnyDistMatrix& src, AnyDistMatrix& dst);
double dist_norm(NormKind kind, const AnyDistMatrix& a);
void print(const AnyDistMatrix& a, std::ostream& sink);
std::string print_to_string(const AnyDistMatrix& a);

extern template class DistMatrix<double>;
extern template class DistMatrix<std::int64_t>;

} // namespace distla
