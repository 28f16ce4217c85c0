#pragma once

// Worker side of the two-round protocol. A worker owns a horizontal strip
// and runs, in order:
//
//   find_dependencies   count inflows, queue the cells nothing flows into
//   internal_upslope    resolve everything that depends only on owned cells
//   satisfy_receivers   drop cross-border inflows, mark receivers
//   external_upslope    continue from receivers with symbolic variables
//   build_worker_report -> master
//   prep_finalise       <- master reply; seed receivers with incoming areas
//   finalise_internal   push incoming areas down the receiver-fed paths
//
// After external_upslope every owned cell holds the count of owned cells
// upstream of it, each receiver counting once for itself. Finalisation adds
// the area that enters through each receiver to every cell below it.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "d8.hpp"
#include "grid.hpp"
#include "hydro.hpp"
#include "messages.hpp"

namespace d8dist {

/// Flow directions for a strip's owned rows plus the nearest halo row on each
/// side (clipped at the DEM border).
struct StripFlow {
  int first_row = 0;
  FlowField field;

  int end_row() const { return first_row + field.rows; }
  bool has_row(int r) const { return r >= first_row && r < end_row(); }
  bool valid(int r, int c) const {
    return has_row(r) && c >= 0 && c < field.cols && field.valid(r - first_row, c);
  }
  FlowDir dir(int r, int c) const { return field(r - first_row, c); }
};

inline RowRange flow_rows(const StripSpec &s, int total_rows) {
  return {std::max(0, s.owned.begin - 1), std::min(total_rows, s.owned.end + 1)};
}

//Cuts a strip's view out of a global flow field. Used by tests and by callers
//that already hold the whole field.
inline StripFlow restrict_flow(const FlowField &global, const StripSpec &s) {
  const RowRange rr = flow_rows(s, global.rows);
  StripFlow out;
  out.first_row = rr.begin;
  out.field     = FlowField(rr.size(), global.cols);
  for (int r = rr.begin; r < rr.end; r++)
    for (int c = 0; c < global.cols; c++) {
      const auto i               = out.field.index(r - rr.begin, c);
      out.field.dirs[i]          = global(r, c);
      out.field.participating[i] = global.valid(r, c) ? 1 : 0;
    }
  return out;
}

struct StripState {
  StripSpec strip;
  int total_rows = 0;
  int cols       = 0;
  int threads    = 1;
  StripFlow flow;

  std::vector<std::int8_t> deps;          //D, owned cells
  std::vector<std::int8_t> saved_deps;    //D_O
  std::vector<std::uint64_t> area;        //A, owned cells
  std::vector<std::uint8_t> halo_inflow;  //inflows from another worker's rows
  std::deque<CellId> queue;

  std::unordered_map<CellId, VarId> cell_var;               //Cell_V
  std::unordered_map<VarId, std::vector<CellId>> origin;    //Origin
  std::unordered_map<CellId, std::uint64_t> area_incoming;  //Area_D
  VarId next_var = 0;

  bool owned(int r) const { return strip.owned.contains(r); }
  std::size_t local(int r, int c) const {
    return static_cast<std::size_t>(r - strip.owned.begin) * cols + c;
  }
  std::size_t local(CellId c) const { return local(c.row, c.col); }

  bool participates(int r, int c) const { return owned(r) && flow.valid(r, c); }

  bool faces_worker(int r) const {
    return (r == strip.top_row() && strip.has_worker_above()) ||
           (r == strip.bottom_row() && strip.has_worker_below());
  }

  //Owned, participating cell that c flows into, if any.
  std::optional<CellId> owned_target(CellId c) const {
    const FlowDir d = flow.dir(c.row, c.col);
    if (d == FlowDir::Outlet)
      return std::nullopt;
    const CellId n = downslope(c, d);
    if (!participates(n.row, n.col))
      return std::nullopt;
    return n;
  }

  //Calls f(n) for every owned cell n flowing into c.
  template <class F>
  void for_owned_inputs(CellId c, F &&f) const {
    for (int k = 0; k < 8; k++) {
      const int nr = c.row + kDRow[k];
      const int nc = c.col + kDCol[k];
      if (owned(nr) && flow.valid(nr, nc) && flow.dir(nr, nc) == static_cast<FlowDir>(opposite(k)))
        f(CellId{nr, nc});
    }
  }

  int count_inputs(CellId c, bool halo_only) const {
    int n = 0;
    for (int k = 0; k < 8; k++) {
      const int nr = c.row + kDRow[k];
      const int nc = c.col + kDCol[k];
      if (halo_only && owned(nr))
        continue;
      if (flow.valid(nr, nc) && flow.dir(nr, nc) == static_cast<FlowDir>(opposite(k)))
        ++n;
    }
    return n;
  }

  //Edge rows that border another worker, without repeating a 1-row strip.
  std::vector<int> facing_rows() const {
    std::vector<int> rows;
    if (strip.has_worker_above())
      rows.push_back(strip.top_row());
    if (strip.has_worker_below() && (rows.empty() || rows.back() != strip.bottom_row()))
      rows.push_back(strip.bottom_row());
    return rows;
  }

  VarId new_variable() { return next_var++; }
};

//Variables carry the worker id in their high bits so that no coordination is
//needed to keep them unique.
inline VarId first_variable(int worker_id) { return static_cast<VarId>(worker_id) << 40; }

inline StripState make_strip_state(const StripSpec &strip, StripFlow flow, int total_rows,
                                   int threads = 1) {
  StripState s;
  s.strip      = strip;
  s.total_rows = total_rows;
  s.cols       = flow.field.cols;
  s.threads    = std::max(1, threads);
  s.flow       = std::move(flow);
  const auto n = static_cast<std::size_t>(strip.owned.size()) * s.cols;
  s.deps.assign(n, 0);
  s.area.assign(n, 0);
  s.halo_inflow.assign(n, 0);
  s.next_var = first_variable(strip.worker_id);
  return s;
}

/// Builds a worker from the elevations it loaded: owned rows plus up to two
/// halo rows per side. Flow directions for the owned rows and the first halo
/// row are computed locally; the second halo row only feeds that computation.
inline StripState make_strip_state(const StripSpec &strip, const ElevationGrid &loaded,
                                   int total_rows, int threads = 1) {
  const RowRange win = strip.loaded();
  if (loaded.rows() != win.size())
    throw std::invalid_argument("make_strip_state: loaded rows do not match the strip");
  StripFlow flow;
  const RowRange fr = flow_rows(strip, total_rows);
  flow.first_row    = fr.begin;
  flow.field        = compute_flow_window(loaded, win.begin, total_rows, fr);
  return make_strip_state(strip, std::move(flow), total_rows, threads);
}

namespace detail {

//Splits [0, n) into `parts` contiguous bands and runs f(begin, end, part).
template <class F>
void parallel_bands(int n, int parts, F &&f) {
  parts = std::max(1, std::min(parts, n));
  if (parts == 1) {
    f(0, n, 0);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(static_cast<std::size_t>(parts));
  for (int p = 0; p < parts; p++) {
    const int b = static_cast<int>(static_cast<long long>(n) * p / parts);
    const int e = static_cast<int>(static_cast<long long>(n) * (p + 1) / parts);
    pool.emplace_back([&f, b, e, p] { f(b, e, p); });
  }
}

}  // namespace detail

/// Counts, for every owned cell, the neighbours (owned or first halo row)
/// that flow into it. Cells with no inflow are queued in row-major order.
/// With several threads each band builds its own queue; the queues are
/// concatenated in band order afterwards.
inline void find_dependencies(StripState &s) {
  const int rows = s.strip.owned.size();
  std::vector<std::vector<CellId>> local(static_cast<std::size_t>(std::max(1, s.threads)));
  detail::parallel_bands(rows, s.threads, [&](int b, int e, int part) {
    auto &q = local[static_cast<std::size_t>(part)];
    for (int lr = b; lr < e; lr++) {
      const int r = s.strip.owned.begin + lr;
      for (int c = 0; c < s.cols; c++) {
        if (!s.flow.valid(r, c))
          continue;
        const int d           = s.count_inputs({r, c}, false);
        s.deps[s.local(r, c)] = static_cast<std::int8_t>(d);
        if (d == 0)
          q.push_back({r, c});
      }
    }
  });
  s.queue.clear();
  for (const auto &q : local)
    s.queue.insert(s.queue.end(), q.begin(), q.end());
}

/// Resolves every cell whose inflows are all owned. Each popped cell starts a
/// downstream walk that continues while the next cell's last dependency has
/// just been met. Cells waiting on halo inflow stay unresolved.
///
/// With several threads the queue is shared under a mutex and dependency
/// counters are decremented atomically; whichever thread releases a cell's
/// last dependency carries on down the path.
inline void internal_upslope(StripState &s) {
  auto walk = [&s](CellId c) {
    for (;;) {
      std::uint64_t a = 1;
      s.for_owned_inputs(c, [&](CellId n) { a += s.area[s.local(n)]; });
      s.area[s.local(c)] = a;

      const auto n = s.owned_target(c);
      if (!n)
        return;
      std::atomic_ref<std::int8_t> dn(s.deps[s.local(*n)]);
      if (dn.fetch_sub(1, std::memory_order_acq_rel) != 1)
        return;
      c = *n;
    }
  };

  if (s.threads <= 1) {
    while (!s.queue.empty()) {
      const CellId c = s.queue.front();
      s.queue.pop_front();
      walk(c);
    }
    return;
  }

  std::mutex m;
  auto pop = [&]() -> std::optional<CellId> {
    std::lock_guard lock(m);
    if (s.queue.empty())
      return std::nullopt;
    const CellId c = s.queue.front();
    s.queue.pop_front();
    return c;
  };
  std::vector<std::jthread> pool;
  for (int t = 0; t < s.threads; t++)
    pool.emplace_back([&] {
      while (const auto c = pop())
        walk(*c);
    });
}

//Subtracts cross-border inflows from every facing edge cell and returns the
//cells whose counters reach zero, in row-major order.
inline std::vector<CellId> strip_halo_dependencies(StripState &s) {
  std::vector<CellId> ready;
  for (const int r : s.facing_rows())
    for (int c = 0; c < s.cols; c++) {
      if (!s.flow.valid(r, c))
        continue;
      const auto i = s.local(r, c);
      const int h  = s.halo_inflow[i];
      if (h == 0)
        continue;
      s.deps[i] = static_cast<std::int8_t>(s.deps[i] - h);
      if (s.deps[i] == 0)
        ready.push_back({r, c});
    }
  return ready;
}

/// Saves the dependency grid, then strips cross-border inflows from the
/// facing edge cells. Every edge cell with such an inflow is marked as a
/// receiver; those with nothing else left to wait for are queued. Edge cells
/// already resolved internally are givers and are left alone.
inline void satisfy_receivers(StripState &s) {
  s.saved_deps = s.deps;
  for (const int r : s.facing_rows())
    for (int c = 0; c < s.cols; c++) {
      if (!s.flow.valid(r, c))
        continue;
      const int h = s.count_inputs({r, c}, true);
      s.halo_inflow[s.local(r, c)] = static_cast<std::uint8_t>(h);
      if (h > 0)
        s.cell_var[{r, c}] = kReceiverMark;
    }
  for (const CellId c : strip_halo_dependencies(s))
    s.queue.push_back(c);
}

/// Walks downstream from each queued receiver under a fresh variable. A walk
/// that stops at a cell still waiting on another path leaves its variable in
/// Cell_V; the path that later releases the blocked cell takes over the
/// stored variable's origins. A receiver met part-way down a walk joins the
/// walk's origins. Walks ending on a facing edge row leave the variable there
/// as a joiner.
inline void external_upslope(StripState &s) {
  auto release = [&s](CellId n) {
    if (s.halo_inflow[s.local(n)] > 0)
      s.cell_var[n] = kReceiverMark;
    else
      s.cell_var.erase(n);
  };

  while (!s.queue.empty()) {
    CellId c = s.queue.front();
    s.queue.pop_front();
    const VarId v = s.new_variable();
    auto &origins = s.origin[v];
    origins.push_back(c);
    bool first = true;

    for (;;) {
      std::uint64_t a = 1;
      s.for_owned_inputs(c, [&](CellId n) {
        a += s.area[s.local(n)];
        const auto it = s.cell_var.find(n);
        if (it == s.cell_var.end() || it->second < 0)
          return;
        const VarId merged = it->second;
        auto mit           = s.origin.find(merged);
        if (mit != s.origin.end()) {
          origins.insert(origins.end(), mit->second.begin(), mit->second.end());
          s.origin.erase(mit);
        }
        release(n);
      });
      s.area[s.local(c)] = a;

      if (!first) {
        const auto it = s.cell_var.find(c);
        if (it != s.cell_var.end() && it->second == kReceiverMark)
          origins.push_back(c);
      }
      first = false;

      const auto n = s.owned_target(c);
      if (n) {
        if (--s.deps[s.local(*n)] == 0) {
          c = *n;
          continue;
        }
        s.cell_var[c] = v;
      } else if (s.faces_worker(c.row)) {
        s.cell_var[c] = v;
      }
      break;
    }
  }
}

/// Packages the facing edge rows for the master. Each record states how the
/// cell's flow leaves the strip: explicitly into the neighbour's edge row, or
/// not at all.
inline WorkerReport build_worker_report(const StripState &s) {
  WorkerReport rep;
  rep.worker_id = s.strip.worker_id;
  rep.owned     = s.strip.owned;
  for (const int r : s.facing_rows())
    for (int c = 0; c < s.cols; c++) {
      if (!s.flow.valid(r, c))
        continue;
      BorderCellRecord rec;
      rec.cell = {r, c};
      rec.area = s.area[s.local(r, c)];

      const auto it = s.cell_var.find(rec.cell);
      if (it != s.cell_var.end() && it->second >= 0) {
        rec.cls = CellClass::Joiner;
        rec.var = it->second;
      } else if (s.halo_inflow[s.local(r, c)] > 0) {
        rec.cls = CellClass::Receiver;
      } else {
        rec.cls = CellClass::Giver;
      }

      const FlowDir d = s.flow.dir(r, c);
      if (d != FlowDir::Outlet && !s.owned(r + drow(d)))
        rec.exit = Exit::cross(drow(d), dcol(d));
      rep.records.push_back(rec);
    }

  for (const auto &[v, cells] : s.origin)
    rep.origins.push_back({v, cells});
  std::sort(rep.origins.begin(), rep.origins.end(),
            [](const OriginEntry &a, const OriginEntry &b) { return a.var < b.var; });
  return rep;
}

/// Restores the saved dependency grid, removes cross-border inflows again and
/// seeds each receiver with the area the master says arrives there. Ready
/// receivers are queued; the rest pick up their incoming area when the walk
/// through them arrives.
inline void prep_finalise(StripState &s, const MasterReply &reply) {
  if (reply.worker_id != s.strip.worker_id)
    throw ProtocolError("reply for worker " + std::to_string(reply.worker_id) +
                        " delivered to worker " + std::to_string(s.strip.worker_id));

  std::unordered_map<CellId, std::uint64_t> incoming;
  for (const auto &in : reply.incoming) {
    const CellId c = in.cell;
    if (!s.owned(c.row) || !s.faces_worker(c.row) || c.col < 0 || c.col >= s.cols ||
        !s.flow.valid(c.row, c.col) || s.halo_inflow[s.local(c)] == 0)
      throw ProtocolError("reply references " + detail::cell_str(c.row, c.col) +
                          ", which is not a receiver");
    if (!incoming.emplace(c, in.area).second)
      throw ProtocolError("reply lists receiver " + detail::cell_str(c.row, c.col) + " twice");
  }

  s.deps = s.saved_deps;
  s.queue.clear();
  s.area_incoming.clear();
  for (const int r : s.facing_rows())
    for (int c = 0; c < s.cols; c++)
      if (s.flow.valid(r, c) && s.halo_inflow[s.local(r, c)] > 0 && !incoming.count({r, c}))
        throw ProtocolError("reply is missing receiver " + detail::cell_str(r, c));

  for (const CellId c : strip_halo_dependencies(s))
    s.queue.push_back(c);
  for (const auto &[c, a] : incoming)
    s.area_incoming[c] = a;
}

/// Pushes incoming areas down the receiver-fed paths. A walk carries a
/// running sum that absorbs whatever was parked at the current cell and at
/// its inflows, adds the sum to each cell it passes, and parks the sum where
/// it has to stop and wait.
inline void finalise_internal(StripState &s) {
  auto take = [&s](CellId c) -> std::uint64_t {
    const auto it = s.area_incoming.find(c);
    if (it == s.area_incoming.end())
      return 0;
    const auto v = it->second;
    s.area_incoming.erase(it);
    return v;
  };

  while (!s.queue.empty()) {
    CellId c = s.queue.front();
    s.queue.pop_front();
    std::uint64_t sum = 0;
    for (;;) {
      sum += take(c);
      s.for_owned_inputs(c, [&](CellId n) { sum += take(n); });
      s.area[s.local(c)] += sum;

      const auto n = s.owned_target(c);
      if (!n)
        break;
      if (--s.deps[s.local(*n)] == 0) {
        c = *n;
        continue;
      }
      s.area_incoming[c] = sum;
      break;
    }
  }
}

/// First round: everything up to the report.
inline WorkerReport run_first_round(StripState &s) {
  find_dependencies(s);
  internal_upslope(s);
  satisfy_receivers(s);
  external_upslope(s);
  return build_worker_report(s);
}

/// Second round: apply the master's reply. Afterwards `s.area` holds final
/// up-slope areas for the owned rows.
inline void run_second_round(StripState &s, const MasterReply &reply) {
  prep_finalise(s, reply);
  finalise_internal(s);
}

}  // namespace d8dist
