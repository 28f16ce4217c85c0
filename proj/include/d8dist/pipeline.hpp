#pragma once

// Runs the whole protocol on one machine: S workers and a master exchanging
// exactly one message each way per worker over a chosen transport.

#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "codec.hpp"
#include "grid.hpp"
#include "hydro.hpp"
#include "master.hpp"
#include "transport.hpp"
#include "worker.hpp"

namespace d8dist {

enum class Schedule : std::uint8_t {
  Threaded,    //one thread per worker plus one for the master
  RoundRobin,  //single thread; each task runs until it would block
};

struct DistributedOptions {
  int workers = 1;
  int threads = 1;  //per worker
  TransportConfig transport;
  Schedule schedule = Schedule::Threaded;
};

struct CommSummary {
  int workers                    = 0;
  std::uint64_t worker_to_master = 0;
  std::uint64_t master_to_worker = 0;
  std::uint64_t bytes            = 0;
};

struct WindingStats {
  std::uint64_t crossings = 0;
  double phi              = 0.0;
};

/// Counts flow edges whose two cells lie in different strips, each edge once.
/// The winding factor is that count divided by the number of strips.
inline WindingStats compute_winding_stats(const FlowField &flow,
                                          const std::vector<StripSpec> &strips) {
  std::vector<int> owner(static_cast<std::size_t>(flow.rows), -1);
  for (const auto &s : strips)
    for (int r = s.owned.begin; r < s.owned.end; r++)
      owner[static_cast<std::size_t>(r)] = s.worker_id;

  WindingStats ws;
  for (int r = 0; r < flow.rows; r++)
    for (int c = 0; c < flow.cols; c++) {
      if (!flow.valid(r, c) || flow(r, c) == FlowDir::Outlet)
        continue;
      const CellId n = downslope({r, c}, flow(r, c));
      if (!flow.in_grid(n.row, n.col) || !flow.valid(n.row, n.col))
        continue;
      if (owner[static_cast<std::size_t>(r)] != owner[static_cast<std::size_t>(n.row)])
        ++ws.crossings;
    }
  ws.phi = strips.empty() ? 0.0 : static_cast<double>(ws.crossings) / static_cast<double>(strips.size());
  return ws;
}

namespace detail {

inline std::vector<std::uint8_t> expect_message(Channel &ch, const char *what) {
  auto msg = ch.recv();
  if (!msg)
    throw TransportError(std::string("link closed before ") + what + " arrived");
  return std::move(*msg);
}

}  // namespace detail

/// Distributed up-slope area of a pit-filled, flat-resolved DEM.
inline AreaGrid run_distributed(const ElevationGrid &dem, const DistributedOptions &opt,
                                CommSummary *summary = nullptr) {
  const auto strips = partition_strips(dem.rows(), opt.workers);
  const int S       = opt.workers;
  CommStats stats;
  auto links = make_links(opt.transport, S, &stats);
  AreaGrid result(dem.rows(), dem.cols());
  std::vector<StripState> states(static_cast<std::size_t>(S));

  auto first_round = [&](int w) {
    const auto &strip = strips[static_cast<std::size_t>(w)];
    const RowRange lr = strip.loaded();
    auto &st = states[static_cast<std::size_t>(w)];
    st = make_strip_state(strip, dem.row_slice(lr.begin, lr.end), dem.rows(), opt.threads);
    links[static_cast<std::size_t>(w)].to_master->send(encode_report(run_first_round(st)));
  };

  auto master = [&] {
    std::vector<WorkerReport> reports;
    reports.reserve(static_cast<std::size_t>(S));
    for (int w = 0; w < S; w++)
      reports.push_back(decode_report(
          detail::expect_message(*links[static_cast<std::size_t>(w)].to_master, "report")));
    const auto replies = run_master(reports);
    for (int w = 0; w < S; w++)
      links[static_cast<std::size_t>(w)].to_worker->send(
          encode_reply(replies[static_cast<std::size_t>(w)]));
  };

  auto second_round = [&](int w) {
    auto &st = states[static_cast<std::size_t>(w)];
    const auto reply = decode_reply(
        detail::expect_message(*links[static_cast<std::size_t>(w)].to_worker, "reply"));
    run_second_round(st, reply);
    const auto &own = st.strip.owned;
    std::copy(st.area.begin(), st.area.end(),
              result.areas.begin() + static_cast<std::ptrdiff_t>(result.index(own.begin, 0)));
    st = StripState{};
  };

  auto close_all = [&] {
    for (auto &l : links) {
      try {
        l.to_master->close();
        l.to_worker->close();
      } catch (...) {
      }
    }
  };

  if (opt.schedule == Schedule::RoundRobin) {
    try {
      for (int w = 0; w < S; w++)
        first_round(w);
      master();
      for (int w = 0; w < S; w++)
        second_round(w);
    } catch (...) {
      close_all();
      clean_spool(opt.transport);
      throw;
    }
  } else {
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto guarded = [&](auto &&task) {
      try {
        task();
      } catch (...) {
        {
          std::lock_guard lock(err_mutex);
          if (!first_error)
            first_error = std::current_exception();
        }
        close_all();
      }
    };
    {
      std::vector<std::jthread> pool;
      pool.reserve(static_cast<std::size_t>(S) + 1);
      pool.emplace_back([&] { guarded(master); });
      for (int w = 0; w < S; w++)
        pool.emplace_back([&, w] {
          guarded([&] {
            first_round(w);
            second_round(w);
          });
        });
    }
    if (first_error) {
      clean_spool(opt.transport);
      std::rethrow_exception(first_error);
    }
  }

  clean_spool(opt.transport);
  if (summary) {
    summary->workers          = S;
    summary->worker_to_master = stats.worker_to_master.load();
    summary->master_to_worker = stats.master_to_worker.load();
    summary->bytes            = stats.bytes.load();
  }
  return result;
}

}  // namespace d8dist
