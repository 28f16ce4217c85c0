#pragma once

// Master side: stitch the workers' border cells into one dependency graph,
// resolve it, and tell each worker how much area arrives at its receivers.
//
// Every border cell can play two roles. Its outgoing role carries the cell's
// true area to wherever the flow crosses into another strip (givers are final
// from the start; joiners wait for their origin receivers). Its incoming role
// collects what other strips send to a receiver and forwards that sum to the
// joiner the receiver feeds. A cell that is both a receiver and a joiner has
// its incoming role feeding its own outgoing role.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hydro.hpp"
#include "messages.hpp"

namespace d8dist {

struct BorderNode {
  CellId cell;
  int worker = 0;
  CellClass cls = CellClass::Giver;
  std::uint64_t reported_area = 0;
  Exit exit;
  VarId var       = kReceiverMark;
  bool top_row    = false;  //in the owner's top row, facing the worker above
  bool receiver   = false;

  //Outgoing role. -1 dependencies marks a giver.
  std::int64_t out_deps = 0;
  std::uint64_t out_area = 0;
  std::optional<std::size_t> out_dest;  //receiver node in another strip

  //Incoming role, receivers only.
  std::int64_t in_deps = 0;
  std::uint64_t in_area = 0;
  std::optional<std::size_t> in_dest;  //joiner node in the same strip
};

struct BorderGraph {
  int workers = 0;
  std::vector<BorderNode> nodes;
  std::unordered_map<CellId, std::size_t> index;

  //Receiver -> joiner, from inverting the origin lists.
  std::unordered_map<CellId, CellId> destination;

  enum class Role : std::uint8_t { Out, In };
  std::deque<std::pair<std::size_t, Role>> queue;

  const BorderNode *find(CellId c) const {
    const auto it = index.find(c);
    return it == index.end() ? nullptr : &nodes[it->second];
  }
};

/// Merges all reports. Givers are queued; each joiner waits on as many
/// receivers as its variable has origins; each receiver waits on the number
/// of cells in other strips whose flow crosses into it. A record without an
/// explicit exit falls back to the cell directly across the border, and only
/// if that cell is a receiver.
inline BorderGraph master_prep(const std::vector<WorkerReport> &reports) {
  BorderGraph g;
  g.workers = static_cast<int>(reports.size());
  if (reports.empty())
    throw ProtocolError("master_prep: no reports");

  std::vector<const WorkerReport *> by_worker(reports.size(), nullptr);
  for (const auto &rep : reports) {
    if (rep.version != kProtocolVersion)
      throw ProtocolError("report from worker " + std::to_string(rep.worker_id) +
                          " has unsupported version");
    if (rep.worker_id < 0 || rep.worker_id >= g.workers)
      throw ProtocolError("report from unknown worker " + std::to_string(rep.worker_id));
    if (by_worker[static_cast<std::size_t>(rep.worker_id)])
      throw ProtocolError("two reports from worker " + std::to_string(rep.worker_id));
    by_worker[static_cast<std::size_t>(rep.worker_id)] = &rep;
  }

  for (const WorkerReport *rep : by_worker)
    for (const auto &rec : rep->records) {
      const int r = rec.cell.row;
      if (!rep->owned.contains(r) || (r != rep->owned.begin && r != rep->owned.end - 1))
        throw ProtocolError("worker " + std::to_string(rep->worker_id) + " reported " +
                            detail::cell_str(r, rec.cell.col) + " outside its edge rows");
      if (!g.index.emplace(rec.cell, g.nodes.size()).second)
        throw ProtocolError("cell " + detail::cell_str(r, rec.cell.col) + " reported twice");
      BorderNode n;
      n.cell          = rec.cell;
      n.worker        = rep->worker_id;
      n.cls           = rec.cls;
      n.reported_area = rec.area;
      n.exit          = rec.exit;
      n.var           = rec.var;
      n.top_row       = (r == rep->owned.begin && rep->worker_id > 0);
      n.receiver      = rec.cls == CellClass::Receiver;
      g.nodes.push_back(n);
    }

  //Variables: joiner lookup and origin inversion
  std::unordered_map<VarId, std::size_t> joiner_of;
  for (std::size_t i = 0; i < g.nodes.size(); i++) {
    const auto &n = g.nodes[i];
    if (n.cls != CellClass::Joiner)
      continue;
    if (n.var < 0)
      throw ProtocolError("joiner " + detail::cell_str(n.cell.row, n.cell.col) +
                          " has no variable");
    if (!joiner_of.emplace(n.var, i).second)
      throw ProtocolError("variable " + std::to_string(n.var) + " ends at two joiners");
  }

  std::unordered_set<VarId> seen_vars;
  std::unordered_map<VarId, std::size_t> origin_count;
  std::unordered_set<CellId> seen_origins;
  for (const WorkerReport *rep : by_worker)
    for (const auto &entry : rep->origins) {
      if (!seen_vars.insert(entry.var).second)
        throw ProtocolError("duplicate variable " + std::to_string(entry.var));
      origin_count[entry.var] = entry.origins.size();
      const auto jit = joiner_of.find(entry.var);
      if (jit != joiner_of.end() && g.nodes[jit->second].worker != rep->worker_id)
        throw ProtocolError("variable " + std::to_string(entry.var) +
                            " joins in a different worker");
      for (const CellId o : entry.origins) {
        const auto it = g.index.find(o);
        if (it == g.index.end() || g.nodes[it->second].worker != rep->worker_id)
          throw ProtocolError("origin " + detail::cell_str(o.row, o.col) + " of variable " +
                              std::to_string(entry.var) + " is not a border cell of worker " +
                              std::to_string(rep->worker_id));
        auto &rn = g.nodes[it->second];
        if (!seen_origins.insert(o).second)
          throw ProtocolError("receiver " + detail::cell_str(o.row, o.col) +
                              " is an origin of two variables");
        rn.receiver = true;
        if (jit != joiner_of.end()) {
          rn.in_dest        = jit->second;
          g.destination[o]  = g.nodes[jit->second].cell;
        }
      }
    }

  for (auto &n : g.nodes) {
    if (n.cls == CellClass::Giver) {
      n.out_deps = -1;
      n.out_area = n.reported_area;
    } else if (n.cls == CellClass::Joiner) {
      const auto it = origin_count.find(n.var);
      if (it == origin_count.end())
        throw ProtocolError("joiner " + detail::cell_str(n.cell.row, n.cell.col) +
                            " refers to unknown variable " + std::to_string(n.var));
      n.out_deps = static_cast<std::int64_t>(it->second);
      n.out_area = n.reported_area;
    }
  }

  //Cross-border edges
  for (std::size_t i = 0; i < g.nodes.size(); i++) {
    auto &n = g.nodes[i];
    if (n.cls == CellClass::Receiver) {
      if (n.exit.kind == ExitKind::CrossBorder)
        throw ProtocolError("receiver " + detail::cell_str(n.cell.row, n.cell.col) +
                            " claims to flow across the border");
      continue;
    }
    std::optional<std::size_t> target;
    if (n.exit.kind == ExitKind::CrossBorder) {
      const CellId t{n.cell.row + n.exit.drow, n.cell.col + n.exit.dcol};
      const auto it = g.index.find(t);
      if (it == g.index.end() || !g.nodes[it->second].receiver ||
          g.nodes[it->second].worker == n.worker)
        throw ProtocolError("flow from " + detail::cell_str(n.cell.row, n.cell.col) +
                            " crosses into " + detail::cell_str(t.row, t.col) +
                            ", which is not a receiver of a neighbouring worker");
      target = it->second;
    } else if (n.exit.kind == ExitKind::Implied) {
      const CellId t{n.top_row ? n.cell.row - 1 : n.cell.row + 1, n.cell.col};
      const auto it = g.index.find(t);
      if (it != g.index.end() && g.nodes[it->second].receiver &&
          g.nodes[it->second].worker != n.worker)
        target = it->second;
    }
    if (target) {
      n.out_dest = target;
      g.nodes[*target].in_deps++;
    }
  }

  for (std::size_t i = 0; i < g.nodes.size(); i++) {
    const auto &n = g.nodes[i];
    if (n.out_deps == -1 || (n.cls == CellClass::Joiner && n.out_deps == 0))
      g.queue.emplace_back(i, BorderGraph::Role::Out);
    if (n.receiver && n.in_deps == 0)
      g.queue.emplace_back(i, BorderGraph::Role::In);
  }
  return g;
}

/// Resolves the border graph in dependency order. Afterwards every giver and
/// joiner holds its true area in `out_area` and every receiver the total
/// arriving from other strips in `in_area`.
inline void master_upslope(BorderGraph &g) {
  using Role = BorderGraph::Role;
  while (!g.queue.empty()) {
    auto [i, role] = g.queue.front();
    g.queue.pop_front();
    for (;;) {
      auto &n = g.nodes[i];
      if (role == Role::Out) {
        if (!n.out_dest)
          break;
        auto &t = g.nodes[*n.out_dest];
        t.in_area += n.out_area;
        if (--t.in_deps != 0)
          break;
        i    = *n.out_dest;
        role = Role::In;
      } else {
        if (!n.in_dest)
          break;
        auto &j = g.nodes[*n.in_dest];
        j.out_area += n.in_area;
        if (--j.out_deps != 0)
          break;
        i    = *n.in_dest;
        role = Role::Out;
      }
    }
  }

  for (const auto &n : g.nodes) {
    if ((n.receiver && n.in_deps != 0) || (n.cls == CellClass::Joiner && n.out_deps != 0))
      throw ProtocolError("border graph contains a cycle through " +
                          detail::cell_str(n.cell.row, n.cell.col));
  }
}

/// One reply per worker listing every receiver it owns, in row-major order.
inline std::vector<MasterReply> build_replies(const BorderGraph &g) {
  std::vector<MasterReply> replies(static_cast<std::size_t>(g.workers));
  for (int w = 0; w < g.workers; w++)
    replies[static_cast<std::size_t>(w)].worker_id = w;
  for (const auto &n : g.nodes)
    if (n.receiver)
      replies[static_cast<std::size_t>(n.worker)].incoming.push_back({n.cell, n.in_area});
  for (auto &r : replies)
    std::sort(r.incoming.begin(), r.incoming.end(),
              [](const IncomingArea &a, const IncomingArea &b) { return a.cell < b.cell; });
  return replies;
}

inline std::vector<MasterReply> run_master(const std::vector<WorkerReport> &reports) {
  BorderGraph g = master_prep(reports);
  master_upslope(g);
  return build_replies(g);
}

}  // namespace d8dist
