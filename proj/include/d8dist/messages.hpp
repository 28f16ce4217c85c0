#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "grid.hpp"

namespace d8dist {

//Names an unknown incoming area. Unique across all workers of a run.
using VarId = std::int64_t;
inline constexpr VarId kReceiverMark = -1;

inline constexpr std::uint8_t kProtocolVersion = 1;

//How a border cell looked to its worker when the report was built.
enum class CellClass : std::uint8_t {
  Giver    = 0,  //area final after the internal pass
  Receiver = 1,  //waits on cells owned by a neighbouring worker
  Joiner   = 2,  //end of one or more receiver-fed paths
};

//Where a border cell's flow goes relative to its own strip.
enum class ExitKind : std::uint8_t {
  None        = 0,  //stays in the strip or leaves the DEM
  CrossBorder = 1,  //into the neighbouring worker's edge row at (drow, dcol)
  Implied     = 2,  //unspecified; master assumes the cell directly across
};

struct Exit {
  ExitKind kind     = ExitKind::None;
  std::int8_t drow  = 0;
  std::int8_t dcol  = 0;

  static Exit none() { return {}; }
  static Exit implied() { return {ExitKind::Implied, 0, 0}; }
  static Exit cross(int dr, int dc) {
    return {ExitKind::CrossBorder, static_cast<std::int8_t>(dr), static_cast<std::int8_t>(dc)};
  }

  friend bool operator==(const Exit &, const Exit &) = default;
};

struct BorderCellRecord {
  CellId cell;
  CellClass cls       = CellClass::Giver;
  std::uint64_t area  = 0;
  Exit exit;
  VarId var           = kReceiverMark;  //set for joiners only

  friend bool operator==(const BorderCellRecord &, const BorderCellRecord &) = default;
};

struct OriginEntry {
  VarId var = 0;
  std::vector<CellId> origins;

  friend bool operator==(const OriginEntry &, const OriginEntry &) = default;
};

/// Worker -> master. One record per edge-row cell that faces another worker,
/// plus the origin lists of every variable the worker still holds.
struct WorkerReport {
  std::uint8_t version = kProtocolVersion;
  int worker_id        = 0;
  RowRange owned;
  std::vector<BorderCellRecord> records;
  std::vector<OriginEntry> origins;

  friend bool operator==(const WorkerReport &, const WorkerReport &) = default;
};

struct IncomingArea {
  CellId cell;
  std::uint64_t area = 0;

  friend bool operator==(const IncomingArea &, const IncomingArea &) = default;
};

/// Master -> worker. The area arriving from other workers at each of the
/// worker's receivers, 0 where nothing arrives.
struct MasterReply {
  std::uint8_t version = kProtocolVersion;
  int worker_id        = 0;
  std::vector<IncomingArea> incoming;

  friend bool operator==(const MasterReply &, const MasterReply &) = default;
};

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace d8dist
