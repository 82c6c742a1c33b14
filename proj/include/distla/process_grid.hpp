#pragma once

// r x c arrangement of the world's ranks and the element-cyclic
// data-to-rank mappings built on it.
//
// Ranks are laid out column-major over the grid: rank = row + col * r.
// Under [MC,MR] global element (i, j) lives on grid coordinates
// (i mod r, j mod c); under [VC,*] row i lives on rank i mod (r * c); under
// [*,*] every rank holds a replica.

#include "distla/transport.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace distla {

enum class DistScheme { MC_MR, VC_STAR, STAR_STAR };

std::string to_string(DistScheme scheme);

class Grid {
public:
  /// Collective over `world`.  Either give both dimensions or neither; the
  /// automatic shape picks the largest r <= sqrt(size) dividing size.
  static std::shared_ptr<const Grid> make(const Communicator& world, std::optional<int> height = {},
                                          std::optional<int> width = {});

  int height() const { return height_; }
  int width() const { return width_; }
  int size() const { return height_ * width_; }
  int row() const { return row_; }
  int col() const { return col_; }
  int rank() const { return world_.rank(); }

  const Communicator& world() const { return world_; }
  /// Ranks in my grid row (size = width), ordered by grid column.
  const Communicator& row_comm() const { return row_comm_; }
  /// Ranks in my grid column (size = height), ordered by grid row.
  const Communicator& col_comm() const { return col_comm_; }

  int rank_of(int grid_row, int grid_col) const { return grid_row + grid_col * height_; }
  std::pair<int, int> coords_of(int rank) const { return {rank % height_, rank / height_}; }

  /// "RxC", e.g. "2x3".
  std::string shape_string() const;

private:
  Grid() = default;

  int height_ = 1;
  int width_ = 1;
  int row_ = 0;
  int col_ = 0;
  Communicator world_;
  Communicator row_comm_;
  Communicator col_comm_;
};

using GridPtr = std::shared_ptr<const Grid>;

/// Largest divisor r of n with r * r <= n.
int auto_grid_height(int n);

/// Parses "RxC" or "auto"; nullopt for auto.
std::optional<std::pair<int, int>> parse_grid_spec(const std::string& spec);

/// Cyclic map of one matrix dimension onto `stride` owners.  A global index
/// i (relative to the matrix) belongs to owner (i + align) mod stride.
struct CyclicAxis {
  int stride = 1;
  int owner = 0;  // my coordinate along this axis, or -1 for replicated
  int align = 0;

  bool replicated() const { return owner < 0; }
  /// First global index I own.
  std::int64_t shift() const {
    if (replicated()) return 0;
    return ((owner - align) % stride + stride) % stride;
  }
  int owner_of(std::int64_t i) const {
    return replicated() ? owner : static_cast<int>((i + align) % stride);
  }
  bool is_local(std::int64_t i) const { return replicated() || (i - shift()) % stride == 0; }
  std::int64_t count(std::int64_t n) const {
    if (replicated()) return n;
    std::int64_t s = shift();
    return n > s ? (n - s + stride - 1) / stride : 0;
  }
  std::int64_t to_local(std::int64_t i) const { return replicated() ? i : (i - shift()) / stride; }
  std::int64_t to_global(std::int64_t local) const {
    return replicated() ? local : shift() + local * stride;
  }
};

/// Row and column axes of one scheme on one grid, seen from `rank`.
struct Distribution {
  CyclicAxis rows;
  CyclicAxis cols;
  DistScheme scheme = DistScheme::MC_MR;

  static Distribution of(const Grid& grid, DistScheme scheme, int row_align = 0, int col_align = 0);
  /// The same distribution as seen by another rank of the grid.
  static Distribution of_rank(const Grid& grid, DistScheme scheme, int rank, int row_align = 0,
                              int col_align = 0);

  std::pair<std::int64_t, std::int64_t> local_extent(std::int64_t h, std::int64_t w) const {
    return {rows.count(h), cols.count(w)};
  }
};

/// World rank owning (i, j).  For STAR_STAR this is the calling rank.
int owner(const Grid& grid, DistScheme scheme, std::int64_t i, std::int64_t j);

/// Local (height, width) of an h x w matrix on the calling rank.
std::pair<std::int64_t, std::int64_t> local_extent(const Grid& grid, DistScheme scheme, std::int64_t h,
                                                   std::int64_t w);

/// Global -> local index maps.  Throws UsageError for indices the calling
/// rank does not own.
std::pair<std::int64_t, std::int64_t> global_to_local(const Grid& grid, DistScheme scheme,
                                                      std::int64_t i, std::int64_t j);
std::pair<std::int64_t, std::int64_t> local_to_global(const Grid& grid, DistScheme scheme,
                                                      std::int64_t i_local, std::int64_t j_local);

} // namespace distla
