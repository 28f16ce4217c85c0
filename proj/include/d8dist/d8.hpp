#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "grid.hpp"

namespace d8dist {

//Neighbour scan order is N, NE, E, SE, S, SW, W, NW. Steepest-slope ties are
//broken by taking the first direction in this order.
enum class FlowDir : std::uint8_t { N = 0, NE, E, SE, S, SW, W, NW, Outlet };

inline constexpr std::array<int, 8> kDRow = {-1, -1, 0, 1, 1, 1, 0, -1};
inline constexpr std::array<int, 8> kDCol = {0, 1, 1, 1, 0, -1, -1, -1};

inline constexpr bool is_diagonal(int k) { return (k & 1) == 1; }
inline constexpr int opposite(int k) { return (k + 4) & 7; }

inline constexpr int drow(FlowDir d) { return d == FlowDir::Outlet ? 0 : kDRow[static_cast<int>(d)]; }
inline constexpr int dcol(FlowDir d) { return d == FlowDir::Outlet ? 0 : kDCol[static_cast<int>(d)]; }

inline CellId downslope(CellId c, FlowDir d) { return {c.row + drow(d), c.col + dcol(d)}; }

//ESRI D8 codes: E=1, SE=2, S=4, SW=8, W=16, NW=32, N=64, NE=128, Outlet=0.
inline constexpr int esri_code(FlowDir d) {
  switch (d) {
    case FlowDir::E:  return 1;
    case FlowDir::SE: return 2;
    case FlowDir::S:  return 4;
    case FlowDir::SW: return 8;
    case FlowDir::W:  return 16;
    case FlowDir::NW: return 32;
    case FlowDir::N:  return 64;
    case FlowDir::NE: return 128;
    case FlowDir::Outlet: return 0;
  }
  return 0;
}

/// Per-cell D8 directions. Cells with `participating == 0` are nodata: they
/// carry Outlet and take no part in accumulation.
struct FlowField {
  int rows = 0;
  int cols = 0;
  std::vector<FlowDir> dirs;
  std::vector<std::uint8_t> participating;

  FlowField() = default;
  FlowField(int r, int c)
      : rows(r), cols(c),
        dirs(static_cast<std::size_t>(r) * c, FlowDir::Outlet),
        participating(static_cast<std::size_t>(r) * c, 1) {}

  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
  std::size_t size() const { return dirs.size(); }
  bool in_grid(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }

  FlowDir operator()(int r, int c) const { return dirs[index(r, c)]; }
  FlowDir &operator()(int r, int c) { return dirs[index(r, c)]; }
  bool valid(int r, int c) const { return participating[index(r, c)] != 0; }

  friend bool operator==(const FlowField &, const FlowField &) = default;
};

/// Up-slope area in cells. Nodata cells hold 0.
struct AreaGrid {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint64_t> areas;

  AreaGrid() = default;
  AreaGrid(int r, int c) : rows(r), cols(c), areas(static_cast<std::size_t>(r) * c, 0) {}

  std::size_t index(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
  std::uint64_t operator()(int r, int c) const { return areas[index(r, c)]; }
  std::uint64_t &operator()(int r, int c) { return areas[index(r, c)]; }

  friend bool operator==(const AreaGrid &, const AreaGrid &) = default;
};

//Thrown when a DEM handed to the flow-direction or accumulation routines
//violates their preconditions (unresolved pits/flats, cyclic flow).
class PreconditionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace d8dist
