#include <gtest/gtest.h>

#include <thread>

#include "d8dist/transport.hpp"
#include "fixtures.hpp"

using namespace d8dist;
using fixtures::TempDir;

namespace {

using Bytes = std::vector<std::uint8_t>;

std::unique_ptr<Channel> make_channel(bool spool, const TempDir &dir, CommStats *stats,
                                      Direction d = Direction::WorkerToMaster) {
  if (!spool)
    return std::make_unique<InProcessChannel>(d, stats);
  return std::make_unique<SpoolChannel>(d, stats, dir.path, 0, -1, std::chrono::seconds(10));
}

class ChannelTest : public ::testing::TestWithParam<bool> {
 protected:
  TempDir dir{"transport"};
};

}  // namespace

TEST_P(ChannelTest, DeliversTheSameBytes) {
  CommStats stats;
  auto ch = make_channel(GetParam(), dir, &stats);
  const Bytes msg{1, 0, 255, 7, 42};
  ch->send(msg);
  const auto got = ch->recv();
  ASSERT_TRUE(got);
  EXPECT_EQ(*got, msg);
  EXPECT_EQ(stats.worker_to_master.load(), 1u);
  EXPECT_EQ(stats.master_to_worker.load(), 0u);
  EXPECT_EQ(stats.bytes.load(), msg.size());
}

TEST_P(ChannelTest, EmptyMessageIsStillAMessage) {
  auto ch = make_channel(GetParam(), dir, nullptr);
  ch->send({});
  const auto got = ch->recv();
  ASSERT_TRUE(got);
  EXPECT_TRUE(got->empty());
}

TEST_P(ChannelTest, ClosedEmptyLinkYieldsNothing) {
  auto ch = make_channel(GetParam(), dir, nullptr);
  ch->close();
  EXPECT_FALSE(ch->recv());
}

TEST_P(ChannelTest, MessageSentBeforeCloseIsStillReceived) {
  auto ch = make_channel(GetParam(), dir, nullptr);
  ch->send({9});
  ch->close();
  const auto got = ch->recv();
  ASSERT_TRUE(got);
  EXPECT_EQ(*got, Bytes{9});
  EXPECT_FALSE(ch->recv());
}

TEST_P(ChannelTest, SendOnClosedLinkThrows) {
  auto ch = make_channel(GetParam(), dir, nullptr);
  ch->close();
  EXPECT_THROW(ch->send({1}), TransportError);
}

TEST_P(ChannelTest, FifoAcrossThreads) {
  CommStats stats;
  auto ch = make_channel(GetParam(), dir, &stats, Direction::MasterToWorker);
  constexpr int kCount = 50;
  std::thread sender([&] {
    for (int i = 0; i < kCount; i++)
      ch->send(Bytes(static_cast<std::size_t>(i % 5), static_cast<std::uint8_t>(i)));
    ch->close();
  });
  int i = 0;
  while (auto m = ch->recv()) {
    EXPECT_EQ(*m, Bytes(static_cast<std::size_t>(i % 5), static_cast<std::uint8_t>(i)));
    i++;
  }
  sender.join();
  EXPECT_EQ(i, kCount);
  EXPECT_EQ(stats.master_to_worker.load(), static_cast<std::uint64_t>(kCount));
  EXPECT_EQ(stats.worker_to_master.load(), 0u);
}

INSTANTIATE_TEST_SUITE_P(Transports, ChannelTest, ::testing::Values(false, true),
                         [](const auto &info) { return info.param ? "Spool" : "InProcess"; });

TEST(Spool, FileNamesUseWorkerIndexOrMaster) {
  EXPECT_EQ(spool_file("/d", 3, -1).filename(), "msg_3_master.bin");
  EXPECT_EQ(spool_file("/d", -1, 0).filename(), "msg_master_0.bin");
}

TEST(Spool, MessageIsAFileUntilConsumed) {
  TempDir dir("spool_file");
  SpoolChannel ch(Direction::WorkerToMaster, nullptr, dir.path, 2, -1);
  ch.send({5, 6});
  EXPECT_TRUE(std::filesystem::exists(dir.path / "msg_2_master.bin"));
  EXPECT_EQ(std::filesystem::file_size(dir.path / "msg_2_master.bin"), 2u);
  ASSERT_TRUE(ch.recv());
  EXPECT_FALSE(std::filesystem::exists(dir.path / "msg_2_master.bin"));
}

TEST(Spool, ReceiveTimesOut) {
  TempDir dir("spool_timeout");
  SpoolChannel ch(Direction::WorkerToMaster, nullptr, dir.path, 0, -1,
                  std::chrono::milliseconds(20));
  EXPECT_THROW(ch.recv(), TransportError);
}

TEST(TransportConfig, Parse) {
  EXPECT_EQ(TransportConfig::parse("inprocess").kind, TransportConfig::Kind::InProcess);
  const auto s = TransportConfig::parse("spool:/tmp/x");
  EXPECT_EQ(s.kind, TransportConfig::Kind::Spool);
  EXPECT_EQ(s.spool_dir, "/tmp/x");
  EXPECT_EQ(s.name(), "spool:/tmp/x");
  EXPECT_THROW(TransportConfig::parse("spool:"), std::invalid_argument);
  EXPECT_THROW(TransportConfig::parse("tcp"), std::invalid_argument);
}

TEST(MakeLinks, OneDuplexLinkPerWorker) {
  TempDir dir("links");
  for (const auto &cfg : {TransportConfig{}, TransportConfig::parse("spool:" + (dir.path / "s").string())}) {
    CommStats stats;
    auto links = make_links(cfg, 3, &stats);
    ASSERT_EQ(links.size(), 3u);
    for (int w = 0; w < 3; w++) {
      auto &l = links[w];
      EXPECT_EQ(l.to_master->direction(), Direction::WorkerToMaster);
      EXPECT_EQ(l.to_worker->direction(), Direction::MasterToWorker);
      l.to_master->send({static_cast<std::uint8_t>(w)});
      l.to_worker->send({static_cast<std::uint8_t>(10 + w)});
    }
    for (int w = 0; w < 3; w++) {
      EXPECT_EQ(*links[w].to_master->recv(), Bytes{static_cast<std::uint8_t>(w)});
      EXPECT_EQ(*links[w].to_worker->recv(), Bytes{static_cast<std::uint8_t>(10 + w)});
    }
    EXPECT_EQ(stats.worker_to_master.load(), 3u);
    EXPECT_EQ(stats.master_to_worker.load(), 3u);
    EXPECT_EQ(stats.bytes.load(), 6u);
    for (auto &l : links) {
      l.to_master->close();
      l.to_worker->close();
    }
    clean_spool(cfg);
  }
}

TEST(MakeLinks, StaleSpoolFilesAreRemoved) {
  TempDir dir("stale");
  {
    std::ofstream(dir.path / "msg_0_master.eos");
    std::ofstream(dir.path / "msg_0_master.bin") << "junk";
    std::ofstream(dir.path / "keep.txt") << "x";
  }
  auto links = make_links(TransportConfig::parse("spool:" + dir.path.string()), 1, nullptr);
  EXPECT_FALSE(std::filesystem::exists(dir.path / "msg_0_master.eos"));
  EXPECT_FALSE(std::filesystem::exists(dir.path / "msg_0_master.bin"));
  EXPECT_TRUE(std::filesystem::exists(dir.path / "keep.txt"));
  links[0].to_master->send({1});
  EXPECT_EQ(*links[0].to_master->recv(), Bytes{1});
}
