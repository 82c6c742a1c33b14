#include "distla/process_grid.hpp"

#include "distla/error.hpp"

#include <cctype>

namespace distla {

std::string to_string(DistScheme scheme) {
  switch (scheme) {
  case DistScheme::MC_MR: return "[MC,MR]";
  case DistScheme::VC_STAR: return "[VC,*]";
  case DistScheme::STAR_STAR: return "[*,*]";
  }
  return "?";
}

int auto_grid_height(int n) {
  int best = 1;
  for (int r = 1; r * r <= n; ++r)
    if (n % r == 0) best = r;
  return best;
}

std::optional<std::pair<int, int>> parse_grid_spec(const std::string& spec) {
  if (spec.empty() || spec == "auto") return std::nullopt;
  auto x = spec.find_first_of("xX");
  auto bad = [&] { return UsageError("grid must be RxC or auto, got '" + spec + "'"); };
  if (x == std::string::npos || x == 0 || x + 1 == spec.size()) throw bad();
  for (std::size_t k = 0; k < spec.size(); ++k)
    if (k != x && !std::isdigit(static_cast<unsigned char>(spec[k]))) throw bad();
  int r = std::stoi(spec.substr(0, x));
  int c = std::stoi(spec.substr(x + 1));
  if (r < 1 || c < 1) throw bad();
  return std::make_pair(r, c);
}

std::shared_ptr<const Grid> Grid::make(const Communicator& world, std::optional<int> height,
                                       std::optional<int> width) {
  const int n = world.size();
  int r = 0;
  int c = 0;
  if (height && width) {
    r = *height;
    c = *width;
  } else if (height || width) {
    throw UsageError("grid: give both dimensions or neither");
  } else {
    r = auto_grid_height(n);
    c = n / r;
  }
  if (r < 1 || c < 1 || r * c != n)
    throw UsageError("grid " + std::to_string(r) + "x" + std::to_string(c) + " does not match " +
                     std::to_string(n) + " ranks");

  std::shared_ptr<Grid> g(new Grid());
  g->height_ = r;
  g->width_ = c;
  g->world_ = world;
  g->row_ = world.rank() % r;
  g->col_ = world.rank() / r;
  g->row_comm_ = world.split(g->row_, g->col_);
  g->col_comm_ = world.split(g->col_, g->row_);
  return g;
}

std::string Grid::shape_string() const { return std::to_string(height_) + "x" + std::to_string(width_); }

Distribution Distribution::of_rank(const Grid& grid, DistScheme scheme, int rank, int row_align,
                                   int col_align) {
  auto [grow, gcol] = grid.coords_of(rank);
  Distribution d;
  d.scheme = scheme;
  switch (scheme) {
  case DistScheme::MC_MR:
    d.rows = {grid.height(), grow, row_align};
    d.cols = {grid.width(), gcol, col_align};
    break;
  case DistScheme::VC_STAR:
    d.rows = {grid.size(), rank, row_align};
    d.cols = {1, -1, 0};
    break;
  case DistScheme::STAR_STAR:
    d.rows = {1, -1, 0};
    d.cols = {1, -1, 0};
    break;
  }
  return d;
}

Distribution Distribution::of(const Grid& grid, DistScheme scheme, int row_align, int col_align) {
  return of_rank(grid, scheme, grid.rank(), row_align, col_align);
}

int owner(const Grid& grid, DistScheme scheme, std::int64_t i, std::int64_t j) {
  switch (scheme) {
  case DistScheme::MC_MR:
    return grid.rank_of(static_cast<int>(i % grid.height()), static_cast<int>(j % grid.width()));
  case DistScheme::VC_STAR: return static_cast<int>(i % grid.size());
  case DistScheme::STAR_STAR: return grid.rank();
  }
  return 0;
}

std::pair<std::int64_t, std::int64_t> local_extent(const Grid& grid, DistScheme scheme, std::int64_t h,
                                                   std::int64_t w) {
  return Distribution::of(grid, scheme).local_extent(h, w);
}

std::pair<std::int64_t, std::int64_t> global_to_local(const Grid& grid, DistScheme scheme,
                                                      std::int64_t i, std::int64_t j) {
  auto d = Distribution::of(grid, scheme);
  if (i < 0 || j < 0 || !d.rows.is_local(i) || !d.cols.is_local(j))
    throw UsageError("global index (" + std::to_string(i) + "," + std::to_string(j) +
                     ") is not owned by rank " + std::to_string(grid.rank()));
  return {d.rows.to_local(i), d.cols.to_local(j)};
}

std::pair<std::int64_t, std::int64_t> local_to_global(const Grid& grid, DistScheme scheme,
                                                      std::int64_t i_local, std::int64_t j_local) {
  auto d = Distribution::of(grid, scheme);
  return {d.rows.to_global(i_local), d.cols.to_global(j_local)};
}

} // namespace distla
