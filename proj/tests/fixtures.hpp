#pragma once

// Hand-built DEMs, small generators and independent oracles shared by the
// test binaries. Nothing here calls into the code under test except to build
// inputs.

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "d8dist/d8.hpp"
#include "d8dist/grid.hpp"
#include "d8dist/hydro.hpp"
#include "d8dist/synthetic.hpp"

namespace fixtures {

using namespace d8dist;

inline ElevationGrid grid_of(const std::vector<std::vector<double>> &rows, double nodata = -9999.0) {
  std::vector<double> v;
  for (const auto &r : rows)
    v.insert(v.end(), r.begin(), r.end());
  return ElevationGrid(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()),
                       std::move(v), nodata);
}

//Flow field from a picture of direction letters; '.' is an outlet and '#'
//is nodata. Letters: N, E, S, W and a/b/c/d for NE, SE, SW, NW.
inline FlowField flow_of(const std::vector<std::string> &rows) {
  FlowField f(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (int r = 0; r < f.rows; r++)
    for (int c = 0; c < f.cols; c++) {
      FlowDir d = FlowDir::Outlet;
      switch (rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]) {
        case 'N': d = FlowDir::N; break;
        case 'a': d = FlowDir::NE; break;
        case 'E': d = FlowDir::E; break;
        case 'b': d = FlowDir::SE; break;
        case 'S': d = FlowDir::S; break;
        case 'c': d = FlowDir::SW; break;
        case 'W': d = FlowDir::W; break;
        case 'd': d = FlowDir::NW; break;
        case '#': f.participating[f.index(r, c)] = 0; break;
        default: break;
      }
      f(r, c) = d;
    }
  return f;
}

//Random uniform DEM run through the default preprocessing.
inline ElevationGrid preprocessed_random(int rows, int cols, std::uint64_t seed) {
  return condition_dem(random_dem(rows, cols, seed));
}

//Uniform DEM with a sprinkling of nodata cells.
inline ElevationGrid random_with_holes(int rows, int cols, std::uint64_t seed, double hole_p) {
  ElevationGrid g = random_dem(rows, cols, seed);
  std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ull);
  std::bernoulli_distribution hole(hole_p);
  for (std::size_t i = 0; i < g.size(); i++)
    if (hole(gen))
      g[i] = g.nodata();
  return g;
}

//Channels in the even columns joined alternately at the bottom and the top,
//separated by high walls. The single main path runs down, up, down, ... so
//with strips stacked vertically it crosses every strip boundary once per
//channel.
inline ElevationGrid serpentine_dem(int rows = 16, int cols = 15) {
  constexpr double wall = 1.0e5;
  ElevationGrid g(rows, cols, wall);
  std::vector<CellId> path;
  for (int ch = 0; ch * 2 < cols; ch++) {
    const int c     = ch * 2;
    const bool down = ch % 2 == 0;
    for (int i = 0; i < rows; i++)
      path.push_back({down ? i : rows - 1 - i, c});
    if (c + 2 < cols)
      path.push_back({down ? rows - 1 : 0, c + 1});
  }
  const double top = 10.0 * static_cast<double>(path.size());
  for (std::size_t p = 0; p < path.size(); p++)
    g(path[p].row, path[p].col) = top - 10.0 * static_cast<double>(p);
  return g;
}

//Three cells in row 1 all drain into (2,2); with two workers (2,2) is a
//receiver fed across the border from three cells.
inline ElevationGrid three_feeder_dem() {
  ElevationGrid g(4, 5);
  for (int r = 0; r < 4; r++)
    for (int c = 0; c < 5; c++)
      g(r, c) = (3 - r) * 10.0 + std::abs(c - 2) * 20.0;
  return g;
}

//Independent up-slope oracle: walk every cell's forward path.
inline std::vector<std::uint64_t> path_count_areas(const FlowField &f) {
  std::vector<std::uint64_t> a(f.size(), 0);
  for (int r = 0; r < f.rows; r++)
    for (int c = 0; c < f.cols; c++) {
      if (!f.valid(r, c))
        continue;
      CellId p{r, c};
      for (std::size_t steps = 0; steps <= f.size(); steps++) {
        ++a[f.index(p.row, p.col)];
        if (f(p.row, p.col) == FlowDir::Outlet)
          break;
        const CellId n = downslope(p, f(p.row, p.col));
        if (!f.in_grid(n.row, n.col) || !f.valid(n.row, n.col))
          break;
        p = n;
      }
    }
  return a;
}

//Internal catchment: owned cells in rows [begin, end) whose path, kept
//inside those rows, reaches each cell.
inline std::vector<std::uint64_t> internal_catchment(const FlowField &f, int begin, int end) {
  std::vector<std::uint64_t> a(static_cast<std::size_t>(end - begin) * f.cols, 0);
  for (int r = begin; r < end; r++)
    for (int c = 0; c < f.cols; c++) {
      if (!f.valid(r, c))
        continue;
      CellId p{r, c};
      for (;;) {
        ++a[static_cast<std::size_t>(p.row - begin) * f.cols + p.col];
        if (f(p.row, p.col) == FlowDir::Outlet)
          break;
        const CellId n = downslope(p, f(p.row, p.col));
        if (n.row < begin || n.row >= end || n.col < 0 || n.col >= f.cols || !f.valid(n.row, n.col))
          break;
        p = n;
      }
    }
  return a;
}

//Conservation: every participating cell drains to exactly one terminus, so
//the areas at the termini add up to the participating count.
inline bool conserves(const FlowField &f, const AreaGrid &a) {
  std::uint64_t total = 0, at_outlets = 0;
  for (std::size_t i = 0; i < f.size(); i++)
    total += f.participating[i];
  for (int r = 0; r < f.rows; r++)
    for (int c = 0; c < f.cols; c++) {
      const auto i = f.index(r, c);
      if (!f.participating[i]) {
        if (a.areas[i] != 0)
          return false;
        continue;
      }
      if (a.areas[i] < 1 || a.areas[i] > total)
        return false;
      if (f.dirs[i] == FlowDir::Outlet)
        at_outlets += a.areas[i];
    }
  return at_outlets == total;
}

//Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string &tag) {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("d8dist_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir &)            = delete;
  TempDir &operator=(const TempDir &) = delete;
};

}  // namespace fixtures
