#include "distla/dist_matrix.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

namespace distla {

namespace {

constexpr int kRedistributeTag = 7001;

template <typename T>
Bytes encode_values(std::span<const T> values) {
  return wire::encode(values);
}

template <typename T>
std::vector<T> decode_values(std::span<const std::byte> bytes) {
  if constexpr (std::is_same_v<T, double>)
    return wire::decode_f64(bytes);
  else
    return wire::decode_i64(bytes);
}

template <typename T>
std::vector<T> pack_local(ConstMatrixRef<T> local) {
  std::vector<T> out;
  out.reserve(static_cast<std::size_t>(local.height() * local.width()));
  for (std::int64_t j = 0; j < local.width(); ++j)
    for (std::int64_t i = 0; i < local.height(); ++i) out.push_back(local(i, j));
  return out;
}

/// World rank owning (i, j) under `d`; -1 when every rank holds a replica.
int owner_rank(const Grid& grid, const Distribution& d, std::int64_t i, std::int64_t j) {
  switch (d.scheme) {
  case DistScheme::MC_MR: return grid.rank_of(d.rows.owner_of(i), d.cols.owner_of(j));
  case DistScheme::VC_STAR: return d.rows.owner_of(i);
  case DistScheme::STAR_STAR: return -1;
  }
  return -1;
}

Distribution distribution_on(const Grid& grid, const Distribution& d, int rank) {
  return Distribution::of_rank(grid, d.scheme, rank, d.rows.align, d.cols.align);
}

bool same_layout(const Distribution& a, const Distribution& b) {
  return a.scheme == b.scheme && a.rows.align == b.rows.align && a.cols.align == b.cols.align;
}

void check_same_grid(const Grid& a, const Grid& b) {
  if (&a != &b && (a.world().group_id() != b.world().group_id() || a.height() != b.height() ||
                   a.width() != b.width()))
    throw UsageError("matrices live on different grids");
}

template <typename T>
void copy_local(ConstMatrixRef<T> src, MatrixRef<T> dst) {
  for (std::int64_t j = 0; j < src.width(); ++j)
    for (std::int64_t i = 0; i < src.height(); ++i) dst(i, j) = src(i, j);
}

/// Fresh storage whose layout matches `like` (scheme and alignment), so a
/// local kernel can combine the two without communication.
template <typename T>
DistMatrix<T> make_like(const DistMatrix<T>& like) {
  const auto& d = like.distribution();
  const std::int64_t ra = d.rows.replicated() ? 0 : d.rows.align;
  const std::int64_t ca = d.cols.replicated() ? 0 : d.cols.align;
  DistMatrix<T> root(like.grid_ptr(), like.height() + ra, like.width() + ca, like.scheme());
  return root.view(ra, ra + like.height(), ca, ca + like.width());
}

} // namespace

// ---------------------------------------------------------------------------
// DistMatrix

template <typename T>
DistMatrix<T>::DistMatrix(GridPtr grid, std::int64_t height, std::int64_t width, DistScheme scheme)
    : grid_(std::move(grid)), height_(height), width_(width) {
  if (!grid_) throw UsageError("matrix needs a grid");
  if (height < 0 || width < 0) throw UsageError("matrix dimensions must be non-negative");
  dist_ = Distribution::of(*grid_, scheme);
  auto [lh, lw] = dist_.local_extent(height, width);
  local_height_ = lh;
  local_width_ = lw;
  storage_ = std::make_shared<LocalMatrix<T>>(lh, lw);
}

template <typename T>
DistMatrix<T> DistMatrix<T>::from_replicated(GridPtr grid, const LocalMatrix<T>& full, DistScheme scheme) {
  DistMatrix<T> m(std::move(grid), full.height(), full.width(), scheme);
  auto loc = m.local();
  for (std::int64_t jl = 0; jl < loc.width(); ++jl)
    for (std::int64_t il = 0; il < loc.height(); ++il)
      loc(il, jl) = full(m.global_row(il), m.global_col(jl));
  return m;
}

template <typename T>
MatrixRef<T> DistMatrix<T>::local() {
  return {storage_->data() + local_row0_ + local_col0_ * storage_->ldim(), local_height_, local_width_,
          storage_->ldim()};
}

template <typename T>
ConstMatrixRef<T> DistMatrix<T>::local() const {
  return {storage_->data() + local_row0_ + local_col0_ * storage_->ldim(), local_height_, local_width_,
          storage_->ldim()};
}

template <typename T>
int DistMatrix<T>::owner_of(std::int64_t i, std::int64_t j) const {
  int r = owner_rank(*grid_, dist_, i, j);
  return r < 0 ? grid_->rank() : r;
}

template <typename T>
T DistMatrix<T>::get(std::int64_t i, std::int64_t j) const {
  if (i < 0 || i >= height_ || j < 0 || j >= width_)
    throw UsageError("index (" + std::to_string(i) + "," + std::to_string(j) + ") out of bounds for " +
                     std::to_string(height_) + "x" + std::to_string(width_) + " matrix");
  if (dist_.scheme == DistScheme::STAR_STAR) return local()(i, j);
  const int root = owner_of(i, j);
  std::vector<T> mine;
  if (root == grid_->rank()) mine.push_back(local()(dist_.rows.to_local(i), dist_.cols.to_local(j)));
  Bytes got = grid_->world().broadcast(root, encode_values<T>(mine));
  return decode_values<T>(got).at(0);
}

template <typename T>
void DistMatrix<T>::set(std::int64_t i, std::int64_t j, T value) {
  if (i < 0 || i >= height_ || j < 0 || j >= width_)
    throw UsageError("index (" + std::to_string(i) + "," + std::to_string(j) + ") out of bounds for " +
                     std::to_string(height_) + "x" + std::to_string(width_) + " matrix");
  if (is_local(i, j)) local()(dist_.rows.to_local(i), dist_.cols.to_local(j)) = value;
}

template <typename T>
void DistMatrix<T>::fill_uniform(std::uint64_t seed) {
  auto loc = local();
  for (std::int64_t jl = 0; jl < loc.width(); ++jl)
    for (std::int64_t il = 0; il < loc.height(); ++il) {
      double u = element_uniform(seed, global_row(il), global_col(jl));
      if constexpr (std::is_floating_point_v<T>)
        loc(il, jl) = u;
      else
        loc(il, jl) = static_cast<T>(std::floor(u * 100.0));
    }
}

template <typename T>
DistMatrix<T> DistMatrix<T>::view(std::int64_t row_begin, std::int64_t row_end, std::int64_t col_begin,
                                  std::int64_t col_end) {
  if (row_begin < 0 || row_begin > row_end || row_end > height_ || col_begin < 0 || col_begin > col_end ||
      col_end > width_)
    throw UsageError("view range [" + std::to_string(row_begin) + "," + std::to_string(row_end) + ") x [" +
                     std::to_string(col_begin) + "," + std::to_string(col_end) + ") invalid for " +
                     std::to_string(height_) + "x" + std::to_string(width_) + " matrix");
  DistMatrix<T> v;
  v.grid_ = grid_;
  v.height_ = row_end - row_begin;
  v.width_ = col_end - col_begin;
  v.storage_ = storage_;
  v.view_ = true;
  v.dist_ = dist_;
  if (!dist_.rows.replicated())
    v.dist_.rows.align = static_cast<int>((dist_.rows.align + row_begin) % dist_.rows.stride);
  if (!dist_.cols.replicated())
    v.dist_.cols.align = static_cast<int>((dist_.cols.align + col_begin) % dist_.cols.stride);
  v.local_row0_ = local_row0_ + dist_.rows.count(row_begin);
  v.local_col0_ = local_col0_ + dist_.cols.count(col_begin);
  v.local_height_ = v.dist_.rows.count(v.height_);
  v.local_width_ = v.dist_.cols.count(v.width_);
  return v;
}

template <typename T>
DistMatrix<T> DistMatrix<T>::copy() const {
  DistMatrix<T> out(grid_, height_, width_, dist_.scheme);
  if (aligned())
    copy_local<T>(local(), out.local());
  else
    redistribute_into(*this, out);
  return out;
}

template <typename T>
void DistMatrix<T>::check_consistent() const {
  std::vector<std::int64_t> mine{height_, width_, static_cast<std::int64_t>(datatype()),
                                 static_cast<std::int64_t>(dist_.scheme)};
  auto all = allgatherv_values<std::int64_t>(grid_->world(), mine);
  for (std::size_t k = 0; k < all.size(); ++k)
    if (all[k] != mine[k % mine.size()])
      throw UsageError("ranks disagree on matrix shape, datatype or scheme");
}

template class DistMatrix<double>;
template class DistMatrix<std::int64_t>;

// ---------------------------------------------------------------------------
// Redistribution

template <typename T>
void redistribute_into(const DistMatrix<T>& src, DistMatrix<T>& dst) {
  check_same_grid(src.grid(), dst.grid());
  if (src.height() != dst.height() || src.width() != dst.width())
    throw UsageError("redistribute: shape mismatch");
  const Grid& grid = src.grid();
  const auto& sd = src.distribution();
  const auto& dd = dst.distribution();
  auto out = dst.local();

  if (src.scheme() == DistScheme::STAR_STAR || same_layout(sd, dd)) {
    auto in = src.local();
    if (src.scheme() == DistScheme::STAR_STAR) {
      for (std::int64_t jl = 0; jl < out.width(); ++jl)
        for (std::int64_t il = 0; il < out.height(); ++il)
          out(il, jl) = in(dst.global_row(il), dst.global_col(jl));
    } else {
      copy_local<T>(in, out);
    }
    return;
  }

  const Communicator& world = grid.world();

  if (dst.scheme() == DistScheme::STAR_STAR) {
    auto parts = world.allgather_parts(encode_values<T>(pack_local<T>(src.local())));
    for (int s = 0; s < world.size(); ++s) {
      auto values = decode_values<T>(parts[static_cast<std::size_t>(s)]);
      Distribution ds = distribution_on(grid, sd, s);
      auto [lh, lw] = ds.local_extent(src.height(), src.width());
      std::size_t k = 0;
      for (std::int64_t jl = 0; jl < lw; ++jl)
        for (std::int64_t il = 0; il < lh; ++il) out(ds.rows.to_global(il), ds.cols.to_global(jl)) = values[k++];
    }
    return;
  }

  // Point-to-point: one message per (source, destination) pair that has
  // elements to move.  Both sides enumerate the source's local elements in
  // column-major order, which fixes the payload order without indices.
  std::vector<std::vector<T>> outgoing(static_cast<std::size_t>(world.size()));
  auto in = src.local();
  for (std::int64_t jl = 0; jl < in.width(); ++jl)
    for (std::int64_t il = 0; il < in.height(); ++il) {
      int d = owner_rank(grid, dd, src.global_row(il), src.global_col(jl));
      outgoing[static_cast<std::size_t>(d)].push_back(in(il, jl));
    }
  for (int d = 0; d < world.size(); ++d)
    if (!outgoing[static_cast<std::size_t>(d)].empty())
      world.send(d, kRedistributeTag, encode_values<T>(outgoing[static_cast<std::size_t>(d)]));

  const int me = world.rank();
  for (int s = 0; s < world.size(); ++s) {
    Distribution ds = distribution_on(grid, sd, s);
    auto [lh, lw] = ds.local_extent(src.height(), src.width());
    std::vector<std::pair<std::int64_t, std::int64_t>> targets;
    for (std::int64_t jl = 0; jl < lw; ++jl)
      for (std::int64_t il = 0; il < lh; ++il) {
        std::int64_t gi = ds.rows.to_global(il);
        std::int64_t gj = ds.cols.to_global(jl);
        if (owner_rank(grid, dd, gi, gj) == me) targets.emplace_back(gi, gj);
      }
    if (targets.empty()) continue;
    auto values = decode_values<T>(world.recv(s, kRedistributeTag));
    if (values.size() != targets.size()) throw TransportError("redistribute: unexpected payload size");
    for (std::size_t k = 0; k < targets.size(); ++k)
      out(dd.rows.to_local(targets[k].first), dd.cols.to_local(targets[k].second)) = values[k];
  }
}

template <typename T>
DistMatrix<T> redistribute(const DistMatrix<T>& a, DistScheme target) {
  DistMatrix<T> out(a.grid_ptr(), a.height(), a.width(), target);
  redistribute_into(a, out);
  return out;
}

template <typename T>
LocalMatrix<T> gather(const DistMatrix<T>& a) {
  if (a.scheme() == DistScheme::STAR_STAR) return LocalMatrix<T>::from(a.local());
  DistMatrix<T> all = redistribute(a, DistScheme::STAR_STAR);
  return LocalMatrix<T>::from(all.local());
}

template <typename T>
void copy(const DistMatrix<T>& src, DistMatrix<T>& dst) {
  dst = src.copy();
}

template <typename T>
void axpy(T alpha, const DistMatrix<T>& x, DistMatrix<T>& y) {
  check_same_grid(x.grid(), y.grid());
  if (x.height() != y.height() || x.width() != y.width()) throw UsageError(kSizeMismatch);
  if (same_layout(x.distribution(), y.distribution())) {
    local_axpy<T>(alpha, x.local(), y.local());
    return;
  }
  DistMatrix<T> moved = make_like(y);
  redistribute_into(x, moved);
  local_axpy<T>(alpha, std::as_const(moved).local(), y.local());
}

template <typename T>
double dist_norm(NormKind kind, const DistMatrix<T>& a) {
  auto loc = a.local();
  if (a.scheme() == DistScheme::STAR_STAR) return local_norm<T>(kind, loc);
  const Communicator& world = a.grid().world();
  if (kind == NormKind::Max) {
    double mine = local_norm<T>(NormKind::Max, loc);
    return world.allreduce(ReduceOp::Max, std::span(&mine, 1))[0];
  }
  double sum = 0.0;
  for (std::int64_t j = 0; j < loc.width(); ++j)
    for (std::int64_t i = 0; i < loc.height(); ++i) {
      double v = static_cast<double>(loc(i, j));
      sum += v * v;
    }
  return std::sqrt(world.allreduce(ReduceOp::Sum, std::span(&sum, 1))[0]);
}

// ---------------------------------------------------------------------------
// Formatting

std::string format_display(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string format_display(std::int64_t v) { return std::to_string(v); }

std::string format_roundtrip(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_roundtrip(std::int64_t v) { return std::to_string(v); }

template <typename T>
std::string print_to_string(const DistMatrix<T>& a) {
  LocalMatrix<T> full = gather(a);
  std::string out = std::to_string(a.height()) + " x " + std::to_string(a.width()) + " [" +
                    tag_char(a.datatype()) + "]\n";
  for (std::int64_t i = 0; i < full.height(); ++i) {
    for (std::int64_t j = 0; j < full.width(); ++j) {
      if (j > 0) out += ' ';
      out += format_display(full(i, j));
    }
    out += '\n';
  }
  return out;
}

template <typename T>
void print(const DistMatrix<T>& a, std::ostream& sink) {
  std::string text = print_to_string(a);
  if (a.grid().rank() != 0) return;
  sink << text;
  sink.flush();
  if (!sink) throw Error("print: write to sink failed");
}

#define DISTLA_INSTANTIATE(T)                                                                  \
  template void redistribute_into<T>(const DistMatrix<T>&, DistMatrix<T>&);                    \
  template DistMatrix<T> redistribute<T>(const DistMatrix<T>&, DistScheme);                    \
  template LocalMatrix<T> gather<T>(const DistMatrix<T>&);                                     \
  template void copy<T>(const DistMatrix<T>&, DistMatrix<T>&);                                 \
  template void axpy<T>(T, const DistMatrix<T>&, DistMatrix<T>&);                              \
  template double dist_norm<T>(NormKind, const DistMatrix<T>&);                                \
  template std::string print_to_string<T>(const DistMatrix<T>&);                               \
  template void print<T>(const DistMatrix<T>&, std::ostream&);

DISTLA_INSTANTIATE(double)
DISTLA_INSTANTIATE(std::int64_t)
#undef DISTLA_INSTANTIATE

// ---------------------------------------------------------------------------
// AnyDistMatrix

namespace {

std::int64_t to_integer_value(double v) {
  if (!(std::trunc(v) == v) || std::fabs(v) > 9.2e18)
    throw UsageError("value " + format_roundtrip(v) + " is not representable in an integer matrix");
  return static_cast<std::int64_t>(v);
}

} // namespace

AnyDistMatrix AnyDistMatrix::create(GridPtr grid, std::int64_t height, std::int64_t width, DataType tag,
                                    DistScheme scheme) {
  switch (tag) {
  case DataType::Double: return AnyDistMatrix(DistMatrix<double>(std::move(grid), height, width, scheme));
  case DataType::Integer:
    return AnyDistMatrix(DistMatrix<std::int64_t>(std::move(grid), height, width, scheme));
  }
  throw UsageError("unknown datatype tag");
}

DataType AnyDistMatrix::datatype() const {
  return std::holds_alternative<DistMatrix<double>>(m_) ? DataType::Double : DataType::Integer;
}
std::int64_t AnyDistMatrix::height() const {
  return std::visit([](const auto& m) { return m.height(); }, m_);
}
std::int64_t AnyDistMatrix::width() const {
  return std::visit([](const auto& m) { return m.width(); }, m_);
}
std::int64_t AnyDistMatrix::ldim() const {
  return std::visit([](const auto& m) { return m.ldim(); }, m_);
}
DistScheme AnyDistMatrix::scheme() const {
  return std::visit([](const auto& m) { return m.scheme(); }, m_);
}
const GridPtr& AnyDistMatrix::grid_ptr() const {
  return std::visit([](const auto& m) -> const GridPtr& { return m.grid_ptr(); }, m_);
}

double AnyDistMatrix::get(std::int64_t i, std::int64_t j) const {
  return std::visit([&](const auto& m) { return static_cast<double>(m.get(i, j)); }, m_);
}

void AnyDistMatrix::set(std::int64_t i, std::int64_t j, double value) {
  if (auto* d = std::get_if<DistMatrix<double>>(&m_))
    d->set(i, j, value);
  else
    std::get<DistMatrix<std::int64_t>>(m_).set(i, j, to_integer_value(value));
}

AnyDistMatrix AnyDistMatrix::view(std::int64_t row_begin, std::int64_t row_end, std::int64_t col_begin,
                                  std::int64_t col_end) {
  return std::visit(
      [&](auto& m) { return AnyDistMatrix(m.view(row_begin, row_end, col_begin, col_end)); }, m_);
}

AnyDistMatrix AnyDistMatrix::copy() const {
  return std::visit([](const auto& m) { return AnyDistMatrix(m.copy()); }, m_);
}

void AnyDistMatrix::fill_uniform(std::uint64_t seed) {
  std::visit([&](auto& m) { m.fill_uniform(seed); }, m_);
}

template <typename T>
DistMatrix<T>& AnyDistMatrix::as() {
  if (auto* p = std::get_if<DistMatrix<T>>(&m_)) return *p;
  throw UsageError(std::string("expected a matrix with datatype '") + tag_char(datatype_v<T>) + "'");
}

template <typename T>
const DistMatrix<T>& AnyDistMatrix::as() const {
  if (auto* p = std::get_if<DistMatrix<T>>(&m_)) return *p;
  throw UsageError(std::string("expected a matrix with datatype '") + tag_char(datatype_v<T>) + "'");
}

template DistMatrix<double>& AnyDistMatrix::as<double>();
template DistMatrix<std::int64_t>& AnyDistMatrix::as<std::int64_t>();
template const DistMatrix<double>& AnyDistMatrix::as<double>() const;
template const DistMatrix<std::int64_t>& AnyDistMatrix::as<std::int64_t>() const;

void check_same_type_and_size(const AnyDistMatrix& a, const AnyDistMatrix& b) {
  if (a.datatype() != b.datatype()) throw UsageError(kDatatypeMismatch);
  if (a.height() != b.height() || a.width() != b.width()) throw UsageError(kSizeMismatch);
}

void axpy(double alpha, const AnyDistMatrix& x, AnyDistMatrix& y) {
  check_same_type_and_size(x, y);
  if (x.datatype() == DataType::Double)
    axpy<double>(alpha, x.as<double>(), y.as<double>());
  else
    axpy<std::int64_t>(to_integer_value(alpha), x.as<std::int64_t>(), y.as<std::int64_t>());
}

void copy(const AnyDistMatrix& src, AnyDistMatrix& dst) { dst = src.copy(); }

double dist_norm(NormKind kind, const AnyDistMatrix& a) {
  return std::visit([&](const auto& m) { return dist_norm(kind, m); }, a.variant());
}

void print(const AnyDistMatrix& a, std::ostream& sink) {
  std::visit([&](const auto& m) { print(m, sink); }, a.variant());
}

std::string print_to_string(const AnyDistMatrix& a) {
  return std::visit([](const auto& m) { return print_to_string(m); }, a.variant());
}

} // namespace distla
