#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "d8dist/cli.hpp"

int main(int argc, char **argv) {
  CLI::App app{"Distributed D8 up-slope area with one message each way per worker"};
  d8dist::RunConfig cfg;
  std::string input, output, flowdir, stats;
  std::string transport = "inprocess";
  bool no_fill = false, no_flats = false, round_robin = false;

  app.add_option("--input", input, "ESRI ASCII grid DEM")->required();
  app.add_option("--output", output, "Accumulation raster to write")->required();
  app.add_option("--workers", cfg.workers, "Number of strip workers")->check(CLI::PositiveNumber);
  app.add_option("--threads", cfg.threads, "Threads per worker")->check(CLI::PositiveNumber);
  app.add_flag("--no-fill-pits", no_fill, "Skip depression filling");
  app.add_flag("--no-resolve-flats", no_flats, "Skip flat resolution");
  app.add_option("--emit-flowdir", flowdir, "Also write ESRI D8 direction codes here");
  app.add_flag("--verify", cfg.verify, "Compare against the serial result (exit 3 on mismatch)");
  app.add_option("--stats", stats, "Write message counts and winding factor here");
  app.add_option("--transport", transport, "inprocess or spool:<dir>");
  app.add_flag("--round-robin", round_robin, "Run all tasks on one thread");

  try {
    app.parse(argc, argv);
    cfg.transport = d8dist::TransportConfig::parse(transport);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : d8dist::kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return d8dist::kExitUsage;
  }

  cfg.input         = input;
  cfg.output        = output;
  cfg.fill_pits     = !no_fill;
  cfg.resolve_flats = !no_flats;
  if (!flowdir.empty())
    cfg.flowdir_path = flowdir;
  if (!stats.empty())
    cfg.stats_path = stats;
  if (round_robin)
    cfg.schedule = d8dist::Schedule::RoundRobin;

  return d8dist::run(cfg, std::cerr);
}
