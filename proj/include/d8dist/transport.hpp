#pragma once

// Message delivery between workers and the master. A worker and the master
// share one duplex link made of two FIFO channels. Two implementations:
//
//   inprocess   a locked queue, for threads in one process
//   spool:<dir> one file per message, dir/msg_<from>_<to>.bin, where the
//               endpoints are worker indices or "master"
//
// Every send is counted in a CommStats shared by all links of a run.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

namespace d8dist {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Direction : std::uint8_t { WorkerToMaster, MasterToWorker };

struct CommStats {
  std::atomic<std::uint64_t> worker_to_master{0};
  std::atomic<std::uint64_t> master_to_worker{0};
  std::atomic<std::uint64_t> bytes{0};

  void count(Direction d, std::size_t n) {
    (d == Direction::WorkerToMaster ? worker_to_master : master_to_worker)
        .fetch_add(1, std::memory_order_relaxed);
    bytes.fetch_add(n, std::memory_order_relaxed);
  }
};

class Channel {
 public:
  Channel(Direction dir, CommStats *stats) : dir_(dir), stats_(stats) {}
  virtual ~Channel() = default;
  Channel(const Channel &)            = delete;
  Channel &operator=(const Channel &) = delete;

  void send(std::vector<std::uint8_t> msg) {
    const auto n = msg.size();
    deliver(std::move(msg));
    if (stats_)
      stats_->count(dir_, n);
  }

  //Blocks until a message arrives. Empty once the channel has been closed and
  //everything sent before the close has been received.
  virtual std::optional<std::vector<std::uint8_t>> recv() = 0;
  virtual void close() = 0;

  Direction direction() const { return dir_; }

 protected:
  virtual void deliver(std::vector<std::uint8_t> msg) = 0;

 private:
  Direction dir_;
  CommStats *stats_;
};

class InProcessChannel final : public Channel {
 public:
  using Channel::Channel;

  std::optional<std::vector<std::uint8_t>> recv() override {
    std::unique_lock lock(m_);
    cv_.wait(lock, [&] { return !q_.empty() || closed_; });
    if (q_.empty())
      return std::nullopt;
    auto msg = std::move(q_.front());
    q_.pop_front();
    return msg;
  }

  void close() override {
    {
      std::lock_guard lock(m_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 protected:
  void deliver(std::vector<std::uint8_t> msg) override {
    {
      std::lock_guard lock(m_);
      if (closed_)
        throw TransportError("send on closed link");
      q_.push_back(std::move(msg));
    }
    cv_.notify_one();
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<std::vector<std::uint8_t>> q_;
  bool closed_ = false;
};

inline std::string endpoint_name(int id) { return id < 0 ? "master" : std::to_string(id); }

inline std::filesystem::path spool_file(const std::filesystem::path &dir, int from, int to) {
  return dir / ("msg_" + endpoint_name(from) + "_" + endpoint_name(to) + ".bin");
}

//At most one message per file name can be in flight, so a sender waits for
//the receiver to consume the previous file. Files are written under a
//temporary name and renamed into place.
class SpoolChannel final : public Channel {
 public:
  SpoolChannel(Direction dir, CommStats *stats, std::filesystem::path spool, int from, int to,
               std::chrono::milliseconds timeout = std::chrono::seconds(120))
      : Channel(dir, stats),
        path_(spool_file(spool, from, to)),
        eos_(std::filesystem::path(path_).replace_extension(".eos")),
        tmp_(std::filesystem::path(path_).replace_extension(".tmp")),
        timeout_(timeout) {}

  std::optional<std::vector<std::uint8_t>> recv() override {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    for (;;) {
      std::error_code ec;
      if (std::filesystem::exists(path_, ec)) {
        std::ifstream is(path_, std::ios::binary);
        if (!is)
          throw TransportError("cannot read spool file " + path_.string());
        std::vector<std::uint8_t> msg((std::istreambuf_iterator<char>(is)),
                                      std::istreambuf_iterator<char>());
        is.close();
        if (!std::filesystem::remove(path_, ec) || ec)
          throw TransportError("cannot remove spool file " + path_.string());
        return msg;
      }
      if (std::filesystem::exists(eos_, ec))
        return std::nullopt;
      if (std::chrono::steady_clock::now() > deadline)
        throw TransportError("timed out waiting for " + path_.string());
      std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
  }

  void close() override {
    std::ofstream os(eos_, std::ios::binary | std::ios::trunc);
    if (!os)
      throw TransportError("cannot write spool marker " + eos_.string());
  }

 protected:
  void deliver(std::vector<std::uint8_t> msg) override {
    std::error_code ec;
    if (std::filesystem::exists(eos_, ec))
      throw TransportError("send on closed link " + path_.string());
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (std::filesystem::exists(path_, ec)) {
      if (std::chrono::steady_clock::now() > deadline)
        throw TransportError("timed out waiting for " + path_.string() + " to be consumed");
      std::this_thread::sleep_for(std::chrono::microseconds(200));
    }
    {
      std::ofstream os(tmp_, std::ios::binary | std::ios::trunc);
      if (!os)
        throw TransportError("cannot write spool file " + tmp_.string());
      os.write(reinterpret_cast<const char *>(msg.data()),
               static_cast<std::streamsize>(msg.size()));
      os.flush();
      if (!os)
        throw TransportError("write failed for " + tmp_.string());
    }
    std::filesystem::rename(tmp_, path_, ec);
    if (ec)
      throw TransportError("cannot publish spool file " + path_.string() + ": " + ec.message());
  }

 private:
  std::filesystem::path path_;
  std::filesystem::path eos_;
  std::filesystem::path tmp_;
  std::chrono::milliseconds timeout_;
};

struct TransportConfig {
  enum class Kind : std::uint8_t { InProcess, Spool };
  Kind kind = Kind::InProcess;
  std::filesystem::path spool_dir;

  //"inprocess" or "spool:<dir>"
  static TransportConfig parse(const std::string &s) {
    if (s == "inprocess")
      return {};
    if (s.rfind("spool:", 0) == 0 && s.size() > 6)
      return {Kind::Spool, s.substr(6)};
    throw std::invalid_argument("unknown transport '" + s + "' (expected inprocess or spool:<dir>)");
  }

  std::string name() const {
    return kind == Kind::InProcess ? "inprocess" : "spool:" + spool_dir.string();
  }
};

inline void remove_spool_files(const std::filesystem::path &dir) {
  std::error_code ec;
  std::vector<std::filesystem::path> stale;
  for (const auto &e : std::filesystem::directory_iterator(dir, ec))
    if (e.path().filename().string().rfind("msg_", 0) == 0)
      stale.push_back(e.path());
  if (ec)
    throw TransportError("cannot list spool directory " + dir.string() + ": " + ec.message());
  for (const auto &p : stale)
    std::filesystem::remove(p, ec);
}

struct WorkerLink {
  std::unique_ptr<Channel> to_master;
  std::unique_ptr<Channel> to_worker;
};

/// One duplex link per worker. For spool transports the directory is
/// created and any message files left from an earlier run are removed.
inline std::vector<WorkerLink> make_links(const TransportConfig &cfg, int workers,
                                          CommStats *stats) {
  if (cfg.kind == TransportConfig::Kind::Spool) {
    std::error_code ec;
    std::filesystem::create_directories(cfg.spool_dir, ec);
    if (ec)
      throw TransportError("cannot create spool directory " + cfg.spool_dir.string() + ": " +
                           ec.message());
    remove_spool_files(cfg.spool_dir);
  }

  std::vector<WorkerLink> links;
  for (int w = 0; w < workers; w++) {
    WorkerLink l;
    if (cfg.kind == TransportConfig::Kind::InProcess) {
      l.to_master = std::make_unique<InProcessChannel>(Direction::WorkerToMaster, stats);
      l.to_worker = std::make_unique<InProcessChannel>(Direction::MasterToWorker, stats);
    } else {
      l.to_master = std::make_unique<SpoolChannel>(Direction::WorkerToMaster, stats,
                                                   cfg.spool_dir, w, -1);
      l.to_worker = std::make_unique<SpoolChannel>(Direction::MasterToWorker, stats,
                                                   cfg.spool_dir, -1, w);
    }
    links.push_back(std::move(l));
  }
  return links;
}

//Removes end-of-stream markers once a spool run is over.
inline void clean_spool(const TransportConfig &cfg) {
  if (cfg.kind != TransportConfig::Kind::Spool)
    return;
  remove_spool_files(cfg.spool_dir);
}

}  // namespace d8dist
