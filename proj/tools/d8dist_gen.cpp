//Writes a synthetic DEM as an ESRI ASCII grid.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "d8dist/ascii_grid.hpp"
#include "d8dist/synthetic.hpp"

int main(int argc, char **argv) {
  CLI::App app{"Generate a synthetic DEM"};
  int rows = 256, cols = 256;
  std::uint64_t seed = 1;
  std::string kind = "fractal", output;
  app.add_option("--rows", rows)->check(CLI::PositiveNumber);
  app.add_option("--cols", cols)->check(CLI::PositiveNumber);
  app.add_option("--seed", seed);
  app.add_option("--kind", kind)->check(CLI::IsMember({"fractal", "random"}));
  app.add_option("--output", output)->required();
  CLI11_PARSE(app, argc, argv);

  try {
    const auto dem = kind == "fractal" ? d8dist::fractal_dem(rows, cols, seed)
                                       : d8dist::random_dem(rows, cols, seed);
    d8dist::save_ascii_grid(dem, output);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
