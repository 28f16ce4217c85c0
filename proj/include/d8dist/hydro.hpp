#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "d8.hpp"
#include "grid.hpp"

namespace d8dist {

namespace detail {

struct Descent {
  FlowDir dir = FlowDir::Outlet;
  bool stuck  = false;  //no lower neighbour and nowhere to drain
};

//Steepest descent from (r,c): drop divided by centre-to-centre distance over
//strictly lower data neighbours. A cell on the DEM border or next to nodata
//with no lower neighbour drains out of the DEM and becomes an Outlet.
template <class Elev, class Valid>
Descent steepest_descent(int r, int c, int rows, int cols, const Elev &elev, const Valid &valid) {
  const double z = elev(r, c);
  double best    = 0.0;
  int best_k     = -1;
  bool drains    = false;
  for (int k = 0; k < 8; k++) {
    const int nr = r + kDRow[k];
    const int nc = c + kDCol[k];
    if (nr < 0 || nr >= rows || nc < 0 || nc >= cols || !valid(nr, nc)) {
      drains = true;
      continue;
    }
    const double drop = z - elev(nr, nc);
    if (!(drop > 0))
      continue;
    const double slope = is_diagonal(k) ? drop / std::numbers::sqrt2 : drop;
    if (slope > best) {
      best   = slope;
      best_k = k;
    }
  }
  if (best_k >= 0)
    return {static_cast<FlowDir>(best_k), false};
  return {FlowDir::Outlet, !drains};
}

inline std::string cell_str(int r, int c) {
  return "(" + std::to_string(r) + "," + std::to_string(c) + ")";
}

}  // namespace detail

/// Flow directions for global rows `compute` of a DEM of which only
/// `window` (global rows [window_first_row, window_first_row + window.rows()))
/// is available. `total_rows` is the height of the full DEM, so that cells on
/// the real border are recognised as draining. Every row in `compute` must
/// have its north and south neighbours inside the window or outside the DEM.
inline FlowField compute_flow_window(const ElevationGrid &window, int window_first_row,
                                     int total_rows, RowRange compute) {
  const int cols = window.cols();
  if (compute.begin < window_first_row || compute.end > window_first_row + window.rows())
    throw std::out_of_range("compute_flow_window: rows outside the loaded window");
  if ((compute.begin - 1 >= 0 && compute.begin - 1 < window_first_row) ||
      (compute.end < total_rows && compute.end >= window_first_row + window.rows()))
    throw std::out_of_range("compute_flow_window: window lacks neighbouring rows");

  auto elev  = [&](int r, int c) { return window(r - window_first_row, c); };
  auto valid = [&](int r, int c) { return !window.is_nodata(r - window_first_row, c); };

  FlowField out(compute.size(), cols);
  for (int r = compute.begin; r < compute.end; r++)
    for (int c = 0; c < cols; c++) {
      const auto i = out.index(r - compute.begin, c);
      if (!valid(r, c)) {
        out.participating[i] = 0;
        continue;
      }
      const auto d = detail::steepest_descent(r, c, total_rows, cols, elev, valid);
      if (d.stuck)
        throw PreconditionError("unresolved pit or flat at " + detail::cell_str(r, c) +
                                "; fill pits and resolve flats first");
      out.dirs[i] = d.dir;
    }
  return out;
}

/// D8 directions for a pit-filled, flat-resolved DEM. Throws
/// PreconditionError naming the first interior cell without a lower neighbour.
inline FlowField compute_flow_directions(const ElevationGrid &grid) {
  return compute_flow_window(grid, 0, grid.rows(), {0, grid.rows()});
}

//Border cells and cells touching nodata: the places water leaves the DEM.
inline bool is_drain_cell(const ElevationGrid &g, int r, int c) {
  if (r == 0 || c == 0 || r == g.rows() - 1 || c == g.cols() - 1)
    return true;
  for (int k = 0; k < 8; k++)
    if (g.is_nodata(r + kDRow[k], c + kDCol[k]))
      return true;
  return false;
}

/// Priority-flood depression filling. Seeds are the drain cells; every other
/// cell is raised to at least the spill elevation of the route by which the
/// flood reaches it. Elevations never decrease.
inline ElevationGrid fill_pits(const ElevationGrid &grid) {
  ElevationGrid out = grid;
  const int rows    = grid.rows();
  const int cols    = grid.cols();

  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<Item>> open;
  std::vector<std::uint8_t> closed(grid.size(), 0);

  for (int r = 0; r < rows; r++)
    for (int c = 0; c < cols; c++) {
      if (grid.is_nodata(r, c) || !is_drain_cell(grid, r, c))
        continue;
      const auto i = grid.index(r, c);
      closed[i]    = 1;
      open.emplace(grid[i], i);
    }

  while (!open.empty()) {
    const auto [z, i] = open.top();
    open.pop();
    const CellId c = grid.cell(i);
    for (int k = 0; k < 8; k++) {
      const int nr = c.row + kDRow[k];
      const int nc = c.col + kDCol[k];
      if (!grid.in_grid(nr, nc))
        continue;
      const auto ni = grid.index(nr, nc);
      if (closed[ni] || grid.is_nodata(ni))
        continue;
      closed[ni] = 1;
      out[ni]    = std::max(out[ni], z);
      open.emplace(out[ni], ni);
    }
  }
  return out;
}

/// Imposes a gradient on every flat so that each interior cell gets a
/// strictly lower neighbour. A flat is a connected set of equal-elevation
/// cells containing a cell with no lower neighbour. Its spill cells are the
/// members that do have a lower neighbour or, if there are none, its drains.
/// Cells at breadth-first distance k from the spill cells are raised by
/// k*eps, with eps small enough that the flat stays strictly below every
/// higher cell around it.
///
/// Expects pit-filled input. A flat with no spill cell is a logic_error.
inline ElevationGrid resolve_flats(const ElevationGrid &grid) {
  ElevationGrid out = grid;
  const int rows    = grid.rows();
  const int cols    = grid.cols();
  const double inf  = std::numeric_limits<double>::infinity();

  auto has_lower = [&](int r, int c) {
    const double z = out(r, c);
    for (int k = 0; k < 8; k++) {
      const int nr = r + kDRow[k];
      const int nc = c + kDCol[k];
      if (out.in_grid(nr, nc) && !out.is_nodata(nr, nc) && out(nr, nc) < z)
        return true;
    }
    return false;
  };

  double global_gap = -1;  //computed on first use
  auto fallback_gap = [&]() {
    if (global_gap < 0) {
      std::vector<double> v;
      v.reserve(grid.size());
      for (std::size_t i = 0; i < grid.size(); i++)
        if (!grid.is_nodata(i))
          v.push_back(grid[i]);
      std::sort(v.begin(), v.end());
      global_gap = inf;
      for (std::size_t i = 1; i < v.size(); i++)
        if (v[i] > v[i - 1])
          global_gap = std::min(global_gap, v[i] - v[i - 1]);
      if (global_gap == inf)
        global_gap = 1.0;
    }
    return global_gap;
  };

  std::vector<std::uint8_t> visited(grid.size(), 0);
  std::vector<int> depth(grid.size(), -1);
  std::vector<std::size_t> comp;
  std::deque<std::size_t> bfs;

  for (int r0 = 0; r0 < rows; r0++)
    for (int c0 = 0; c0 < cols; c0++) {
      const auto i0 = out.index(r0, c0);
      if (visited[i0] || out.is_nodata(i0) || has_lower(r0, c0))
        continue;

      //Gather the equal-elevation component around the stuck cell
      const double z = out[i0];
      comp.clear();
      comp.push_back(i0);
      visited[i0] = 1;
      double higher = inf;
      for (std::size_t h = 0; h < comp.size(); h++) {
        const CellId c = out.cell(comp[h]);
        for (int k = 0; k < 8; k++) {
          const int nr = c.row + kDRow[k];
          const int nc = c.col + kDCol[k];
          if (!out.in_grid(nr, nc) || out.is_nodata(nr, nc))
            continue;
          const auto ni  = out.index(nr, nc);
          const double v = out[ni];
          if (v > z)
            higher = std::min(higher, v);
          else if (v == z && !visited[ni]) {
            visited[ni] = 1;
            comp.push_back(ni);
          }
        }
      }

      //Multi-source BFS outward from the spill cells: those with a lower
      //neighbour, or failing that the drains
      bfs.clear();
      for (const auto i : comp)
        if (const CellId c = out.cell(i); has_lower(c.row, c.col))
          bfs.push_back(i);
      if (bfs.empty())
        for (const auto i : comp)
          if (const CellId c = out.cell(i); is_drain_cell(out, c.row, c.col))
            bfs.push_back(i);
      for (const auto i : bfs)
        depth[i] = 0;
      if (bfs.empty())
        throw std::logic_error("resolve_flats: flat at " + detail::cell_str(r0, c0) +
                               " has no outlet; fill pits first");
      int max_depth = 0;
      while (!bfs.empty()) {
        const auto i = bfs.front();
        bfs.pop_front();
        const CellId c = out.cell(i);
        for (int k = 0; k < 8; k++) {
          const int nr = c.row + kDRow[k];
          const int nc = c.col + kDCol[k];
          if (!out.in_grid(nr, nc) || out.is_nodata(nr, nc))
            continue;
          const auto ni = out.index(nr, nc);
          if (out[ni] != z || depth[ni] >= 0)
            continue;
          depth[ni] = depth[i] + 1;
          max_depth = std::max(max_depth, depth[ni]);
          bfs.push_back(ni);
        }
      }

      //Elevation for each depth: z + k*eps, or successive ulps when eps is
      //below the resolution of doubles at z.
      const double gap = (higher < inf) ? higher - z : fallback_gap();
      const double eps = gap / (max_depth + 1);
      std::vector<double> level(static_cast<std::size_t>(max_depth) + 1);
      bool ok = true;
      level[0] = z;
      for (int k = 1; k <= max_depth; k++) {
        level[k] = z + k * eps;
        if (!(level[k] > level[k - 1])) {
          ok = false;
          break;
        }
      }
      if (!ok || !(level[max_depth] < higher)) {
        for (int k = 1; k <= max_depth; k++)
          level[k] = std::nextafter(level[k - 1], inf);
        if (!(level[max_depth] < higher))
          throw PreconditionError("resolve_flats: flat at " + detail::cell_str(r0, c0) +
                                  " cannot be resolved at double precision");
      }
      for (const auto i : comp) {
        out[i]   = level[static_cast<std::size_t>(depth[i])];
        depth[i] = -1;
      }
    }
  return out;
}

/// Up-slope area by dependency counting: each cell waits until everything
/// flowing into it is done, then passes its area downstream. Throws
/// PreconditionError if the flow field contains a cycle.
inline AreaGrid serial_accumulate(const FlowField &flow) {
  const int rows = flow.rows;
  const int cols = flow.cols;
  AreaGrid area(rows, cols);
  std::vector<std::int8_t> deps(flow.size(), 0);

  auto target = [&](std::size_t i) -> std::ptrdiff_t {
    const FlowDir d = flow.dirs[i];
    if (!flow.participating[i] || d == FlowDir::Outlet)
      return -1;
    const int r  = static_cast<int>(i / cols) + drow(d);
    const int c  = static_cast<int>(i % cols) + dcol(d);
    if (!flow.in_grid(r, c) || !flow.valid(r, c))
      return -1;
    return static_cast<std::ptrdiff_t>(flow.index(r, c));
  };

  for (std::size_t i = 0; i < flow.size(); i++) {
    const auto t = target(i);
    if (t >= 0)
      ++deps[static_cast<std::size_t>(t)];
  }

  std::deque<std::size_t> q;
  std::size_t participating = 0;
  for (std::size_t i = 0; i < flow.size(); i++) {
    if (!flow.participating[i])
      continue;
    ++participating;
    if (deps[i] == 0)
      q.push_back(i);
  }

  std::size_t done = 0;
  while (!q.empty()) {
    auto c = q.front();
    q.pop_front();
    for (;;) {
      area.areas[c] += 1;
      ++done;
      const auto t = target(c);
      if (t < 0)
        break;
      const auto n = static_cast<std::size_t>(t);
      area.areas[n] += area.areas[c];
      if (--deps[n] != 0)
        break;
      c = n;
    }
  }
  if (done != participating)
    throw PreconditionError("serial_accumulate: flow field contains a cycle");
  return area;
}

/// Brute force: every cell walks its whole downstream path and adds one to
/// each cell it visits. Quadratic; meant for small grids as a test oracle.
inline AreaGrid naive_accumulate(const FlowField &flow) {
  AreaGrid area(flow.rows, flow.cols);
  const std::size_t limit = flow.size();
  for (int r = 0; r < flow.rows; r++)
    for (int c = 0; c < flow.cols; c++) {
      if (!flow.valid(r, c))
        continue;
      int pr = r, pc = c;
      for (std::size_t steps = 0;; steps++) {
        if (steps > limit)
          throw PreconditionError("naive_accumulate: flow field contains a cycle");
        area(pr, pc) += 1;
        const FlowDir d = flow(pr, pc);
        if (d == FlowDir::Outlet)
          break;
        const int nr = pr + drow(d);
        const int nc = pc + dcol(d);
        if (!flow.in_grid(nr, nc) || !flow.valid(nr, nc))
          break;
        pr = nr;
        pc = nc;
      }
    }
  return area;
}

//Preprocessing as the distributed pipeline expects it.
inline ElevationGrid condition_dem(const ElevationGrid &grid, bool fill = true, bool flats = true) {
  ElevationGrid g = fill ? fill_pits(grid) : grid;
  return flats ? resolve_flats(g) : g;
}

}  // namespace d8dist
