#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <random>

#include "d8dist/hydro.hpp"
#include "fixtures.hpp"

using namespace d8dist;
using fixtures::flow_of;
using fixtures::grid_of;

namespace {

//Cells from which a non-ascending neighbour path reaches a drain cell,
//found by flooding backwards from the drains.
std::vector<std::uint8_t> can_reach_drain(const ElevationGrid &g) {
  std::vector<std::uint8_t> ok(g.size(), 0);
  std::deque<CellId> q;
  for (int r = 0; r < g.rows(); r++)
    for (int c = 0; c < g.cols(); c++) {
      if (g.is_nodata(r, c))
        continue;
      bool drain = r == 0 || c == 0 || r == g.rows() - 1 || c == g.cols() - 1;
      for (int k = 0; k < 8 && !drain; k++)
        drain = g.is_nodata(r + kDRow[k], c + kDCol[k]);
      if (drain) {
        ok[g.index(r, c)] = 1;
        q.push_back({r, c});
      }
    }
  while (!q.empty()) {
    const CellId c = q.front();
    q.pop_front();
    for (int k = 0; k < 8; k++) {
      const int nr = c.row + kDRow[k], nc = c.col + kDCol[k];
      if (!g.in_grid(nr, nc) || g.is_nodata(nr, nc) || ok[g.index(nr, nc)])
        continue;
      if (g(nr, nc) >= g(c.row, c.col)) {
        ok[g.index(nr, nc)] = 1;
        q.push_back({nr, nc});
      }
    }
  }
  return ok;
}

//Slope oracle written independently of the library's scan.
FlowDir steepest_by_hand(const ElevationGrid &g, int r, int c) {
  static const int dr[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
  static const int dc[8] = {0, 1, 1, 1, 0, -1, -1, -1};
  double best = 0;
  int arg     = -1;
  for (int k = 0; k < 8; k++) {
    const int nr = r + dr[k], nc = c + dc[k];
    if (!g.in_grid(nr, nc) || g.is_nodata(nr, nc))
      continue;
    const double drop = g(r, c) - g(nr, nc);
    if (drop <= 0)
      continue;
    const double s = drop / ((dr[k] != 0 && dc[k] != 0) ? std::sqrt(2.0) : 1.0);
    if (s > best) {
      best = s;
      arg  = k;
    }
  }
  return arg < 0 ? FlowDir::Outlet : static_cast<FlowDir>(arg);
}

}  // namespace

TEST(FlowDirections, LinearChain) {
  const auto f = compute_flow_directions(grid_of({{3, 2, 1}}));
  EXPECT_EQ(f.dirs, (std::vector<FlowDir>{FlowDir::E, FlowDir::E, FlowDir::Outlet}));
}

TEST(FlowDirections, DiagonalWinsOnSlopeNotDrop) {
  //E drops 1.0 over 1; SE drops 1.5 over sqrt(2), about 1.0607
  const auto g = grid_of({{9, 9, 9}, {9, 5, 4}, {9, 9, 3.5}});
  EXPECT_EQ(compute_flow_directions(g)(1, 1), FlowDir::SE);
}

TEST(FlowDirections, TieGoesToFirstInScanOrder) {
  const auto g = grid_of({{9, 9, 9}, {9, 5, 4}, {9, 4, 9}});
  EXPECT_EQ(compute_flow_directions(g)(1, 1), FlowDir::E);
}

TEST(FlowDirections, UnresolvedPitIsPreconditionError) {
  const auto g = grid_of({{9, 9, 9}, {9, 1, 9}, {9, 9, 9}});
  EXPECT_THROW(compute_flow_directions(g), PreconditionError);
  const auto flat = grid_of({{9, 9, 9, 9}, {9, 5, 5, 9}, {9, 9, 9, 4}, {9, 9, 9, 9}});
  EXPECT_THROW(compute_flow_directions(flat), PreconditionError);
}

TEST(FlowDirections, NodataIsABarrierAndNeighboursMayDrainIntoIt) {
  const double X = -9999;
  const auto g   = grid_of({{9, 9, 9, 9}, {9, 5, X, 9}, {9, 6, 7, 9}, {9, 9, 9, 9}});
  const auto f   = compute_flow_directions(g);
  EXPECT_FALSE(f.valid(1, 2));
  EXPECT_EQ(f(1, 1), FlowDir::Outlet);
  EXPECT_EQ(f(2, 2), FlowDir::NW);
}

TEST(FlowDirectionsProperty, MatchesHandOracleAndIsDeterministic) {
  for (std::uint64_t seed = 1; seed <= 40; seed++) {
    const auto g = fixtures::preprocessed_random(3 + seed % 13, 3 + (seed * 7) % 11, seed);
    const auto f = compute_flow_directions(g);
    ASSERT_EQ(f, compute_flow_directions(g));
    for (int r = 0; r < g.rows(); r++)
      for (int c = 0; c < g.cols(); c++) {
        ASSERT_EQ(f(r, c), steepest_by_hand(g, r, c)) << "seed " << seed;
        if (f(r, c) != FlowDir::Outlet) {
          const CellId n = downslope({r, c}, f(r, c));
          ASSERT_LT(g(n.row, n.col), g(r, c));
        }
      }
  }
}

TEST(FillPits, SingleCellPitRaisedToLowestNeighbour) {
  const auto g = grid_of({{9, 8, 9}, {7, 1, 6}, {9, 9, 9}});
  const auto f = fill_pits(g);
  EXPECT_EQ(f(1, 1), 6);
  for (std::size_t i = 0; i < g.size(); i++)
    if (i != g.index(1, 1)) {
      EXPECT_EQ(f[i], g[i]);
    }
}

TEST(FillPits, MonotoneRampUnchanged) {
  ElevationGrid g(6, 5);
  for (int r = 0; r < 6; r++)
    for (int c = 0; c < 5; c++)
      g(r, c) = r * 5 + c;
  EXPECT_EQ(fill_pits(g), g);
}

TEST(FillPits, EnclosedBasinDrainsAfterFilling) {
  const auto g = grid_of({{9, 9, 9, 9, 9},
                          {9, 8, 8, 8, 9},
                          {9, 8, 2, 3, 9},
                          {9, 8, 8, 8, 7},
                          {9, 9, 9, 9, 9}});
  const auto before = can_reach_drain(g);
  EXPECT_FALSE(before[g.index(2, 2)]);
  const auto f  = fill_pits(g);
  const auto ok = can_reach_drain(f);
  for (std::size_t i = 0; i < f.size(); i++) {
    EXPECT_TRUE(ok[i]) << "cell " << i;
    EXPECT_GE(f[i], g[i]);
  }
  EXPECT_EQ(f(2, 2), 7);  //spills diagonally over the border cell (3,4)
  EXPECT_EQ(f(2, 3), 7);
}

TEST(FillPits, AllNodataUnchanged) {
  ElevationGrid g(3, 3, -9999.0);
  EXPECT_EQ(fill_pits(g), g);
}

TEST(FillPitsProperty, EveryCellReachesADrainAndNothingDrops) {
  for (std::uint64_t seed = 1; seed <= 60; seed++) {
    const auto g = seed % 2 ? random_dem(5 + seed % 20, 4 + seed % 17, seed)
                            : fixtures::random_with_holes(5 + seed % 20, 4 + seed % 17, seed, 0.1);
    const auto f  = fill_pits(g);
    const auto ok = can_reach_drain(f);
    for (std::size_t i = 0; i < f.size(); i++) {
      ASSERT_EQ(f.is_nodata(i), g.is_nodata(i));
      if (g.is_nodata(i))
        continue;
      ASSERT_TRUE(ok[i]);
      ASSERT_GE(f[i], g[i]);
    }
  }
}

TEST(ResolveFlats, InteriorStepGainsStrictDescent) {
  const auto r = resolve_flats(grid_of({{2, 1, 1, 0}}));
  EXPECT_EQ(r(0, 0), 2);
  EXPECT_EQ(r(0, 3), 0);
  EXPECT_GT(r(0, 0), r(0, 1));
  EXPECT_GT(r(0, 1), r(0, 2));
  EXPECT_GT(r(0, 2), r(0, 3));
  const auto f = compute_flow_directions(r);
  EXPECT_EQ(f.dirs, (std::vector<FlowDir>{FlowDir::E, FlowDir::E, FlowDir::E, FlowDir::Outlet}));
}

TEST(ResolveFlats, NoFlatsUnchanged) {
  const auto g = fixtures::grid_of({{5, 4, 3}, {4, 3, 2}, {3, 2, 1}});
  EXPECT_EQ(resolve_flats(g), g);
}

TEST(ResolveFlats, PlateauDrainsToSingleLowCell) {
  ElevationGrid g(7, 6, 10.0);
  g(6, 2) = 9.0;
  const auto r = resolve_flats(g);
  const auto f = compute_flow_directions(r);
  for (int row = 0; row < 7; row++)
    for (int c = 0; c < 6; c++) {
      CellId p{row, c};
      int steps = 0;
      while (f(p.row, p.col) != FlowDir::Outlet) {
        const CellId n = downslope(p, f(p.row, p.col));
        ASSERT_LT(r(n.row, n.col), r(p.row, p.col));
        p = n;
        ASSERT_LT(++steps, 42);
      }
      EXPECT_EQ(p, (CellId{6, 2})) << "from " << row << "," << c;
    }
  //no higher cell bounds this flat, so the fallback gap of 1 applies
  for (double v : r.values())
    EXPECT_LT(v, 11.0);
}

TEST(ResolveFlats, RaisedValuesStayBelowHigherNeighbours) {
  const auto g = grid_of({{9, 9, 9, 9, 9, 9},
                          {9, 5, 5, 5, 5, 9},
                          {9, 5, 5, 5, 5, 4},
                          {9, 9, 9, 9, 9, 9}});
  const auto r = resolve_flats(g);
  for (std::size_t i = 0; i < g.size(); i++) {
    if (g[i] == 9) {
      EXPECT_EQ(r[i], 9);
    }
    if (g[i] == 5) {
      EXPECT_GE(r[i], 5);
      EXPECT_LT(r[i], 9);
    }
  }
  EXPECT_NO_THROW(compute_flow_directions(r));
}

TEST(ResolveFlats, TinyGapFallsBackToUlps) {
  const double z  = 1.0e15;
  const double up = std::nextafter(std::nextafter(std::nextafter(z, 2e15), 2e15), 2e15);
  const auto g    = grid_of({{up, up, up, up}, {up, z, z, z - 1}, {up, up, up, up}});
  const auto r    = resolve_flats(g);
  EXPECT_GT(r(1, 1), r(1, 2));
  EXPECT_GT(r(1, 2), r(1, 3));
  EXPECT_LT(r(1, 1), up);
}

TEST(ConditionProperty, RandomGridsNeverViolateFlowPreconditions) {
  for (std::uint64_t seed = 1; seed <= 150; seed++) {
    const int rows = 2 + static_cast<int>(seed % 23), cols = 2 + static_cast<int>((seed * 5) % 19);
    ElevationGrid g = random_dem(rows, cols, seed);
    //quantise so flats and plateaus are common
    if (seed % 3 == 0)
      for (std::size_t i = 0; i < g.size(); i++)
        g[i] = std::floor(g[i] / 25.0);
    if (seed % 5 == 0)
      g = fixtures::random_with_holes(rows, cols, seed, 0.15);
    const auto c = condition_dem(g);
    ASSERT_NO_THROW(compute_flow_directions(c)) << "seed " << seed;
  }
}

TEST(Accumulate, ChainGivesOneTwoThree) {
  const auto f = flow_of({"EE."});
  EXPECT_EQ(serial_accumulate(f).areas, (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(naive_accumulate(f).areas, (std::vector<std::uint64_t>{1, 2, 3}));
}

TEST(Accumulate, ThreeIntoOne) {
  const auto g = flow_of({"bS", "E."});
  EXPECT_EQ(serial_accumulate(g).areas, (std::vector<std::uint64_t>{1, 1, 1, 4}));
  EXPECT_EQ(naive_accumulate(g).areas, (std::vector<std::uint64_t>{1, 1, 1, 4}));
}

TEST(Accumulate, SingleCell) {
  EXPECT_EQ(naive_accumulate(flow_of({"."})).areas, (std::vector<std::uint64_t>{1}));
  EXPECT_EQ(serial_accumulate(flow_of({"."})).areas, (std::vector<std::uint64_t>{1}));
}

TEST(Accumulate, NodataCellsHoldZero) {
  const auto f = flow_of({"E#.", "Na."});
  const auto a = serial_accumulate(f);
  EXPECT_EQ(a.areas, (std::vector<std::uint64_t>{2, 0, 2, 1, 1, 1}));
  EXPECT_EQ(naive_accumulate(f), a);
}

TEST(Accumulate, CycleIsDetected) {
  const auto f = flow_of({"ES", "NW"});
  EXPECT_THROW(serial_accumulate(f), PreconditionError);
  EXPECT_THROW(naive_accumulate(f), PreconditionError);
}

TEST(AccumulateProperty, SerialEqualsNaiveAndPathOracle) {
  for (std::uint64_t seed = 1; seed <= 300; seed++) {
    const int rows = 1 + static_cast<int>(seed % 12), cols = 1 + static_cast<int>((seed * 7) % 12);
    const auto g = seed % 4 == 0 ? condition_dem(fixtures::random_with_holes(rows, cols, seed, 0.1))
                                 : fixtures::preprocessed_random(rows, cols, seed);
    const auto f = compute_flow_directions(g);
    const auto s = serial_accumulate(f);
    ASSERT_EQ(s, naive_accumulate(f)) << "seed " << seed;
    ASSERT_EQ(s.areas, fixtures::path_count_areas(f));
    ASSERT_TRUE(fixtures::conserves(f, s));
  }
}
