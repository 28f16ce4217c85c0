#pragma once

// Binary wire format, version 1. All integers little-endian, fixed width.
//
//   frame   := version:u8 kind:u8 length:u32 payload[length]
//   kind    := 1 (worker report) | 2 (master reply)
//
//   report  := worker:u32 first_row:u32 end_row:u32
//              nrec:u32 record[nrec] norig:u32 origin[norig]
//   record  := row:u32 col:u32 class:u8 area:u64
//              exit:u8 drow:i8 dcol:i8 var:i64
//   origin  := var:i64 n:u32 (row:u32 col:u32)[n]
//
//   reply   := worker:u32 n:u32 (row:u32 col:u32 incoming:u64)[n]
//
// Cells are global DEM coordinates. `var` is -1 for records that are not
// joiners.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "messages.hpp"

namespace d8dist {

enum class MessageKind : std::uint8_t { Report = 1, Reply = 2 };

inline constexpr std::size_t kFrameHeaderBytes = 6;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void i8(std::int8_t v) { u8(static_cast<std::uint8_t>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; i++)
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; i++)
      buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void cell(CellId c) {
    u32(static_cast<std::uint32_t>(c.row));
    u32(static_cast<std::uint32_t>(c.col));
  }

  std::vector<std::uint8_t> framed(MessageKind kind) && {
    std::vector<std::uint8_t> out;
    out.reserve(buf_.size() + kFrameHeaderBytes);
    ByteWriter hdr;
    hdr.u8(kProtocolVersion);
    hdr.u8(static_cast<std::uint8_t>(kind));
    hdr.u32(static_cast<std::uint32_t>(buf_.size()));
    out.insert(out.end(), hdr.buf_.begin(), hdr.buf_.end());
    out.insert(out.end(), buf_.begin(), buf_.end());
    return out;
  }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : b_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::int8_t i8() { return static_cast<std::int8_t>(u8()); }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; i++)
      v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; i++)
      v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  int index() {
    const std::uint32_t v = u32();
    if (v > 0x7fffffffu)
      throw ProtocolError("malformed message: index out of range");
    return static_cast<int>(v);
  }
  CellId cell() {
    const int r = index();
    return {r, index()};
  }

  //Guards counts read off the wire before reserving memory for them.
  std::uint32_t count(std::size_t min_item_bytes) {
    const std::uint32_t n = u32();
    if (static_cast<std::uint64_t>(n) * min_item_bytes > remaining())
      throw ProtocolError("truncated message: count " + std::to_string(n) + " exceeds payload");
    return n;
  }

  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (remaining() < n)
      throw ProtocolError("truncated message");
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

//Checks the frame header and returns the payload.
inline std::span<const std::uint8_t> open_frame(std::span<const std::uint8_t> bytes,
                                                MessageKind expect) {
  if (bytes.size() < kFrameHeaderBytes)
    throw ProtocolError("truncated message: no frame header");
  ByteReader hdr(bytes.first(kFrameHeaderBytes));
  const auto version = hdr.u8();
  if (version != kProtocolVersion)
    throw ProtocolError("unsupported protocol version " + std::to_string(version));
  const auto kind = hdr.u8();
  if (kind != static_cast<std::uint8_t>(expect))
    throw ProtocolError("unexpected message kind " + std::to_string(kind));
  const auto len = hdr.u32();
  if (len != bytes.size() - kFrameHeaderBytes)
    throw ProtocolError("length field " + std::to_string(len) + " does not match payload of " +
                        std::to_string(bytes.size() - kFrameHeaderBytes) + " bytes");
  return bytes.subspan(kFrameHeaderBytes);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_report(const WorkerReport &r) {
  if (r.version != kProtocolVersion)
    throw ProtocolError("cannot encode protocol version " + std::to_string(r.version));
  detail::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(r.worker_id));
  w.u32(static_cast<std::uint32_t>(r.owned.begin));
  w.u32(static_cast<std::uint32_t>(r.owned.end));
  w.u32(static_cast<std::uint32_t>(r.records.size()));
  for (const auto &rec : r.records) {
    w.cell(rec.cell);
    w.u8(static_cast<std::uint8_t>(rec.cls));
    w.u64(rec.area);
    w.u8(static_cast<std::uint8_t>(rec.exit.kind));
    w.i8(rec.exit.drow);
    w.i8(rec.exit.dcol);
    w.i64(rec.var);
  }
  w.u32(static_cast<std::uint32_t>(r.origins.size()));
  for (const auto &o : r.origins) {
    w.i64(o.var);
    w.u32(static_cast<std::uint32_t>(o.origins.size()));
    for (const CellId c : o.origins)
      w.cell(c);
  }
  return std::move(w).framed(MessageKind::Report);
}

inline WorkerReport decode_report(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(detail::open_frame(bytes, MessageKind::Report));
  WorkerReport r;
  r.worker_id   = in.index();
  r.owned.begin = in.index();
  r.owned.end   = in.index();
  if (r.owned.end <= r.owned.begin)
    throw ProtocolError("malformed report: empty owned row range");

  constexpr std::size_t kRecordBytes = 4 + 4 + 1 + 8 + 1 + 1 + 1 + 8;
  const auto nrec = in.count(kRecordBytes);
  r.records.reserve(nrec);
  for (std::uint32_t i = 0; i < nrec; i++) {
    BorderCellRecord rec;
    rec.cell = in.cell();
    const auto cls = in.u8();
    if (cls > static_cast<std::uint8_t>(CellClass::Joiner))
      throw ProtocolError("malformed record: class " + std::to_string(cls));
    rec.cls  = static_cast<CellClass>(cls);
    rec.area = in.u64();
    const auto kind = in.u8();
    if (kind > static_cast<std::uint8_t>(ExitKind::Implied))
      throw ProtocolError("malformed record: exit kind " + std::to_string(kind));
    rec.exit.kind = static_cast<ExitKind>(kind);
    rec.exit.drow = in.i8();
    rec.exit.dcol = in.i8();
    if (rec.exit.kind == ExitKind::CrossBorder) {
      if ((rec.exit.drow != -1 && rec.exit.drow != 1) || rec.exit.dcol < -1 || rec.exit.dcol > 1)
        throw ProtocolError("malformed record: bad exit offset");
    } else if (rec.exit.drow != 0 || rec.exit.dcol != 0) {
      throw ProtocolError("malformed record: offset on a non-crossing exit");
    }
    rec.var = in.i64();
    if ((rec.cls == CellClass::Joiner) != (rec.var >= 0) ||
        (rec.cls != CellClass::Joiner && rec.var != kReceiverMark))
      throw ProtocolError("malformed record: variable does not match class");
    r.records.push_back(rec);
  }

  constexpr std::size_t kOriginBytes = 8 + 4;
  const auto norig = in.count(kOriginBytes);
  r.origins.reserve(norig);
  for (std::uint32_t i = 0; i < norig; i++) {
    OriginEntry o;
    o.var = in.i64();
    if (o.var < 0)
      throw ProtocolError("malformed origin entry: negative variable");
    const auto n = in.count(8);
    o.origins.reserve(n);
    for (std::uint32_t k = 0; k < n; k++)
      o.origins.push_back(in.cell());
    r.origins.push_back(std::move(o));
  }
  if (in.remaining() != 0)
    throw ProtocolError("malformed report: trailing bytes");
  return r;
}

inline std::vector<std::uint8_t> encode_reply(const MasterReply &r) {
  if (r.version != kProtocolVersion)
    throw ProtocolError("cannot encode protocol version " + std::to_string(r.version));
  detail::ByteWriter w;
  w.u32(static_cast<std::uint32_t>(r.worker_id));
  w.u32(static_cast<std::uint32_t>(r.incoming.size()));
  for (const auto &in : r.incoming) {
    w.cell(in.cell);
    w.u64(in.area);
  }
  return std::move(w).framed(MessageKind::Reply);
}

inline MasterReply decode_reply(std::span<const std::uint8_t> bytes) {
  detail::ByteReader in(detail::open_frame(bytes, MessageKind::Reply));
  MasterReply r;
  r.worker_id  = in.index();
  const auto n = in.count(16);
  r.incoming.reserve(n);
  for (std::uint32_t i = 0; i < n; i++) {
    IncomingArea a;
    a.cell = in.cell();
    a.area = in.u64();
    r.incoming.push_back(a);
  }
  if (in.remaining() != 0)
    throw ProtocolError("malformed reply: trailing bytes");
  return r;
}

}  // namespace d8dist
