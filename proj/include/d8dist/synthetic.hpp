#pragma once

//Synthetic DEMs for tests, benchmarks and demos.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "grid.hpp"

namespace d8dist {

//Independent uniform elevations in [0, 100). Full of pits and tiny basins.
inline ElevationGrid random_dem(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  ElevationGrid g(rows, cols);
  for (std::size_t i = 0; i < g.size(); i++)
    g[i] = u(gen);
  return g;
}

/// Diamond-square terrain cropped to rows x cols. `roughness` in (0,1) sets
/// how fast the random displacement shrinks per level (higher is rougher).
inline ElevationGrid fractal_dem(int rows, int cols, std::uint64_t seed, double roughness = 0.55) {
  int n = 1;
  while (n + 1 < std::max(rows, cols))
    n *= 2;
  const int size = n + 1;
  std::vector<double> h(static_cast<std::size_t>(size) * size, 0.0);
  auto at = [&](int r, int c) -> double & { return h[static_cast<std::size_t>(r) * size + c]; };

  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double amp = 1000.0;
  at(0, 0) = u(gen) * amp;
  at(0, n) = u(gen) * amp;
  at(n, 0) = u(gen) * amp;
  at(n, n) = u(gen) * amp;

  for (int step = n; step > 1; step /= 2) {
    const int half = step / 2;
    for (int r = half; r < size; r += step)
      for (int c = half; c < size; c += step)
        at(r, c) = (at(r - half, c - half) + at(r - half, c + half) + at(r + half, c - half) +
                    at(r + half, c + half)) / 4.0 + u(gen) * amp;
    for (int r = 0; r < size; r += half)
      for (int c = (r / half) % 2 == 0 ? half : 0; c < size; c += step) {
        double sum = 0;
        int cnt    = 0;
        if (r - half >= 0)   { sum += at(r - half, c); ++cnt; }
        if (r + half < size) { sum += at(r + half, c); ++cnt; }
        if (c - half >= 0)   { sum += at(r, c - half); ++cnt; }
        if (c + half < size) { sum += at(r, c + half); ++cnt; }
        at(r, c) = sum / cnt + u(gen) * amp;
      }
    amp *= roughness;
  }

  ElevationGrid g(rows, cols);
  for (int r = 0; r < rows; r++)
    for (int c = 0; c < cols; c++)
      g(r, c) = at(r, c);
  return g;
}

}  // namespace d8dist
