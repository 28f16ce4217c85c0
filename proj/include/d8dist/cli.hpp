#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

#include "ascii_grid.hpp"
#include "hydro.hpp"
#include "pipeline.hpp"

namespace d8dist {

enum ExitCode : int {
  kExitOk       = 0,
  kExitUsage    = 1,  //bad arguments, or a DEM the algorithms cannot take as given
  kExitIo       = 2,
  kExitMismatch = 3,  //--verify found a difference from the serial oracle
};

struct RunConfig {
  std::filesystem::path input;
  std::filesystem::path output;
  int workers        = 1;
  int threads        = 1;
  bool fill_pits     = true;
  bool resolve_flats = true;
  std::optional<std::filesystem::path> flowdir_path;
  bool verify = false;
  std::optional<std::filesystem::path> stats_path;
  TransportConfig transport;
  Schedule schedule = Schedule::Threaded;
};

namespace detail {

inline void write_stats(const std::filesystem::path &path, const RunConfig &cfg,
                        const ElevationGrid &dem, const CommSummary &comm, const WindingStats &ws,
                        const char *verified, double t_pre, double t_acc) {
  std::ofstream os(path, std::ios::trunc);
  if (!os)
    throw IoError("cannot open '" + path.string() + "' for writing");
  os << "rows " << dem.rows() << '\n'
     << "cols " << dem.cols() << '\n'
     << "workers " << cfg.workers << '\n'
     << "threads " << cfg.threads << '\n'
     << "transport " << cfg.transport.name() << '\n'
     << "messages_worker_to_master " << comm.worker_to_master << '\n'
     << "messages_master_to_worker " << comm.master_to_worker << '\n'
     << "messages_total " << comm.worker_to_master + comm.master_to_worker << '\n'
     << "bytes_total " << comm.bytes << '\n'
     << "crossings " << ws.crossings << '\n'
     << "winding_factor " << std::setprecision(6) << ws.phi << '\n'
     << "verified " << verified << '\n'
     << "seconds_preprocess " << std::setprecision(4) << t_pre << '\n'
     << "seconds_accumulate " << std::setprecision(4) << t_acc << '\n';
  if (!os)
    throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace detail

/// Loads, conditions and partitions the DEM, runs the distributed protocol,
/// and writes the accumulation raster plus any requested extras. Diagnostics
/// go to `err`; the return value is one of ExitCode.
inline int run(const RunConfig &cfg, std::ostream &err) {
  using clock = std::chrono::steady_clock;
  if (cfg.workers < 1 || cfg.threads < 1) {
    err << "error: --workers and --threads must be at least 1\n";
    return kExitUsage;
  }

  ElevationGrid dem;
  try {
    dem = load_ascii_grid(cfg.input);
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  if (cfg.workers > dem.rows()) {
    err << "error: " << cfg.workers << " workers but the DEM has only " << dem.rows()
        << " rows\n";
    return kExitUsage;
  }

  const auto t0 = clock::now();
  ElevationGrid conditioned;
  FlowField flow;
  try {
    conditioned = condition_dem(dem, cfg.fill_pits, cfg.resolve_flats);
    if (cfg.flowdir_path || cfg.verify || cfg.stats_path)
      flow = compute_flow_directions(conditioned);
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const auto t1 = clock::now();

  DistributedOptions opt;
  opt.workers   = cfg.workers;
  opt.threads   = cfg.threads;
  opt.transport = cfg.transport;
  opt.schedule  = cfg.schedule;
  CommSummary comm;
  AreaGrid areas;
  try {
    areas = run_distributed(conditioned, opt, &comm);
  } catch (const PreconditionError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }
  const auto t2 = clock::now();

  GridHeader hdr = dem.header();
  try {
    save_ascii_grid(areas, cfg.output, hdr);
    if (cfg.flowdir_path)
      save_flowdir_grid(flow, *cfg.flowdir_path, hdr);
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  }

  const char *verified = "skipped";
  bool mismatch        = false;
  if (cfg.verify) {
    const AreaGrid oracle = serial_accumulate(flow);
    mismatch              = !(oracle == areas);
    verified              = mismatch ? "no" : "yes";
    if (mismatch) {
      std::size_t bad = 0;
      for (std::size_t i = 0; i < oracle.areas.size(); i++)
        bad += oracle.areas[i] != areas.areas[i];
      err << "error: distributed result differs from the serial oracle in " << bad
          << " cells\n";
    }
  }

  if (cfg.stats_path) {
    try {
      const auto ws = compute_winding_stats(flow, partition_strips(dem.rows(), cfg.workers));
      detail::write_stats(*cfg.stats_path, cfg, dem, comm, ws, verified,
                          std::chrono::duration<double>(t1 - t0).count(),
                          std::chrono::duration<double>(t2 - t1).count());
    } catch (const std::exception &e) {
      err << "error: " << e.what() << '\n';
      return kExitIo;
    }
  }
  return mismatch ? kExitMismatch : kExitOk;
}

}  // namespace d8dist
