#pragma once

// Column-major dense matrix owned by one rank, plus the non-owning
// MatrixRef used by every local kernel.  Element (i, j) lives at
// data[i + j * ldim].

#include "distla/error.hpp"
#include "distla/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

namespace distla {

/// Datatype tag: 64-bit float ("d") or signed 64-bit integer ("i").
enum class DataType : char { Double = 'd', Integer = 'i' };

template <typename T> struct datatype_of;
template <> struct datatype_of<double> { static constexpr DataType value = DataType::Double; };
template <> struct datatype_of<std::int64_t> { static constexpr DataType value = DataType::Integer; };
template <typename T> inline constexpr DataType datatype_v = datatype_of<std::remove_const_t<T>>::value;

inline char tag_char(DataType t) { return static_cast<char>(t); }

/// Throws UsageError naming the tag for anything but "d" or "i".
DataType parse_datatype(std::string_view tag);

template <typename T>
class MatrixRef {
public:
  MatrixRef() = default;
  MatrixRef(T* data, std::int64_t height, std::int64_t width, std::int64_t ldim)
      : data_(data), height_(height), width_(width), ldim_(ldim) {}
  // MatrixRef<T> converts to MatrixRef<const T>.
  template <typename U, typename = std::enable_if_t<std::is_same_v<const U, T>>>
  MatrixRef(const MatrixRef<U>& other)
      : data_(other.data()), height_(other.height()), width_(other.width()), ldim_(other.ldim()) {}

  T* data() const { return data_; }
  std::int64_t height() const { return height_; }
  std::int64_t width() const { return width_; }
  std::int64_t ldim() const { return ldim_; }
  bool empty() const { return height_ == 0 || width_ == 0; }

  T& operator()(std::int64_t i, std::int64_t j) const { return data_[i + j * ldim_]; }
  T* col(std::int64_t j) const { return data_ + j * ldim_; }

  MatrixRef block(std::int64_t i0, std::int64_t j0, std::int64_t h, std::int64_t w) const {
    return {data_ + i0 + j0 * ldim_, h, w, ldim_};
  }

private:
  T* data_ = nullptr;
  std::int64_t height_ = 0;
  std::int64_t width_ = 0;
  std::int64_t ldim_ = 1;
};

template <typename T>
using ConstMatrixRef = MatrixRef<const T>;

template <typename T>
class LocalMatrix {
public:
  using value_type = T;

  LocalMatrix() = default;
  LocalMatrix(std::int64_t height, std::int64_t width) : LocalMatrix(height, width, height) {}
  LocalMatrix(std::int64_t height, std::int64_t width, std::int64_t ldim)
      : height_(height), width_(width), ldim_(std::max<std::int64_t>({1, height, ldim})) {
    if (height < 0 || width < 0) throw UsageError("matrix dimensions must be non-negative");
    data_.assign(static_cast<std::size_t>(ldim_ * width_), T{});
  }

  static LocalMatrix identity(std::int64_t n) {
    LocalMatrix m(n, n);
    for (std::int64_t k = 0; k < n; ++k) m(k, k) = T{1};
    return m;
  }

  /// Deep copy of any (possibly strided) view.
  static LocalMatrix from(ConstMatrixRef<T> src) {
    LocalMatrix m(src.height(), src.width());
    for (std::int64_t j = 0; j < src.width(); ++j)
      std::copy_n(src.col(j), src.height(), m.data_.data() + j * m.ldim_);
    return m;
  }

  static LocalMatrix uniform(std::int64_t height, std::int64_t width, std::uint64_t seed) {
    LocalMatrix m(height, width);
    m.fill_uniform(seed);
    return m;
  }

  DataType datatype() const { return datatype_v<T>; }
  std::int64_t height() const { return height_; }
  std::int64_t width() const { return width_; }
  std::int64_t ldim() const { return ldim_; }
  bool empty() const { return height_ == 0 || width_ == 0; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator()(std::int64_t i, std::int64_t j) { return data_[static_cast<std::size_t>(i + j * ldim_)]; }
  const T& operator()(std::int64_t i, std::int64_t j) const {
    return data_[static_cast<std::size_t>(i + j * ldim_)];
  }

  T get(std::int64_t i, std::int64_t j) const {
    check(i, j);
    return (*this)(i, j);
  }
  void set(std::int64_t i, std::int64_t j, T value) {
    check(i, j);
    (*this)(i, j) = value;
  }

  MatrixRef<T> ref() { return {data_.data(), height_, width_, ldim_}; }
  ConstMatrixRef<T> ref() const { return {data_.data(), height_, width_, ldim_}; }
  ConstMatrixRef<T> cref() const { return ref(); }

  /// Element (i, j) gets element_uniform(seed, i, j); integer matrices get
  /// that value scaled to [-100, 100).
  void fill_uniform(std::uint64_t seed) {
    for (std::int64_t j = 0; j < width_; ++j)
      for (std::int64_t i = 0; i < height_; ++i) {
        double u = element_uniform(seed, i, j);
        if constexpr (std::is_floating_point_v<T>)
          (*this)(i, j) = u;
        else
          (*this)(i, j) = static_cast<T>(std::floor(u * 100.0));
      }
  }

private:
  void check(std::int64_t i, std::int64_t j) const {
    if (i < 0 || i >= height_ || j < 0 || j >= width_)
      throw UsageError("index (" + std::to_string(i) + "," + std::to_string(j) + ") out of bounds for " +
                       std::to_string(height_) + "x" + std::to_string(width_) + " matrix");
  }

  std::vector<T> data_;
  std::int64_t height_ = 0;
  std::int64_t width_ = 0;
  std::int64_t ldim_ = 1;
};

using Matrix = LocalMatrix<double>;
using IntMatrix = LocalMatrix<std::int64_t>;

} // namespace distla
