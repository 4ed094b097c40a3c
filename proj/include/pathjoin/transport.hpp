#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <thread>
#include <tuple>
#include <vector>

#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include "pathjoin/errors.hpp"

namespace pathjoin {

// Message-passing contract between worker contexts and the master. Streams
// are identified by (queryId, operatorId, sender); within one stream,
// delivery follows send order and ends with exactly one EndOfStream.
// Streams from different senders interleave arbitrarily.

enum class MsgKind : std::uint8_t { TupleBatch = 0, FrontierBatch = 1, EndOfStream = 2 };

struct Message {
  MsgKind kind = MsgKind::EndOfStream;
  std::uint64_t query_id = 0;
  std::uint32_t operator_id = 0;  // low 16 bits: op id, high 16 bits: channel
  std::uint16_t sender = 0;
  std::vector<std::uint8_t> payload;
};

inline std::uint32_t stream_id(int op, int channel) {
  return (static_cast<std::uint32_t>(channel) << 16) | static_cast<std::uint32_t>(op);
}

class Mailbox {
 public:
  void push(Message msg) {
    {
      std::lock_guard lock(mutex_);
      queues_[key(msg)].push_back(std::move(msg));
    }
    cv_.notify_all();
  }

  // Blocking pop of the next message of one stream.
  Message pop(std::uint64_t query, std::uint32_t operator_id, std::uint16_t sender) {
    std::unique_lock lock(mutex_);
    auto k = std::make_tuple(query, operator_id, sender);
    cv_.wait(lock, [&] { return aborted_.load() || !queues_[k].empty(); });
    if (aborted_.load() && queues_[k].empty())
      throw RuntimeError("query aborted while waiting for messages");
    Message m = std::move(queues_[k].front());
    queues_[k].pop_front();
    return m;
  }

  void abort() {
    aborted_.store(true);
    cv_.notify_all();
  }

  void reset() {
    std::lock_guard lock(mutex_);
    aborted_.store(false);
    queues_.clear();
  }

 private:
  using Key = std::tuple<std::uint64_t, std::uint32_t, std::uint16_t>;
  static Key key(const Message& m) { return {m.query_id, m.operator_id, m.sender}; }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::map<Key, std::deque<Message>> queues_;
  std::atomic<bool> aborted_{false};
};

class Transport {
 public:
  explicit Transport(int workers) : workers_(workers), mailboxes_(workers + 1) {}
  virtual ~Transport() = default;

  int workers() const { return workers_; }
  int master_rank() const { return workers_; }

  // counts worker-to-worker traffic; result shipment to the master is not
  // part of the exchange protocol
  virtual void send(int to, Message msg) {
    if (to != master_rank() && msg.sender != to) ++messages_sent_;
    mailboxes_[to].push(std::move(msg));
  }

  Mailbox& mailbox(int node) { return mailboxes_[node]; }

  void abort_all() {
    for (auto& m : mailboxes_) m.abort();
  }

  void reset() {
    for (auto& m : mailboxes_) m.reset();
  }

  std::uint64_t messages_sent() const { return messages_sent_.load(); }

 protected:
  int workers_;
  std::vector<Mailbox> mailboxes_;
  std::atomic<std::uint64_t> messages_sent_{0};
};

using InProcTransport = Transport;

// Seeded chaos wrapper: sleeps a pseudo-random amount before each delivery,
// permuting the interleaving of streams from different senders while
// preserving per-stream order (the sending thread stays sequential).
class DelayTransport : public Transport {
 public:
  DelayTransport(int workers, std::uint64_t seed, int max_delay_us = 300)
      : Transport(workers), seed_(seed), max_delay_us_(max_delay_us) {}

  void send(int to, Message msg) override {
    std::uint64_t h = seed_;
    h ^= (static_cast<std::uint64_t>(msg.sender) << 32) ^ (static_cast<std::uint64_t>(to) << 16) ^
         counter_.fetch_add(1);
    h *= 0x9e3779b97f4a7c15ull;
    h ^= h >> 29;
    std::this_thread::sleep_for(std::chrono::microseconds(h % max_delay_us_));
    Transport::send(to, std::move(msg));
  }

 private:
  std::uint64_t seed_;
  int max_delay_us_;
  std::atomic<std::uint64_t> counter_{0};
};

// Socket-backed transport with the frame layout
//   [u32 len][u8 kind][u64 queryId][u32 operatorId][u16 sender][payload]
// over a full mesh of in-process socket pairs (one per node pair), with a
// one-byte version handshake on every link. Same mailbox contract as the
// in-process transport; one reader thread per link end.
class SocketTransport : public Transport {
 public:
  static constexpr std::uint8_t kVersion = 1;

  explicit SocketTransport(int workers) : Transport(workers) {
    const int nodes = workers_ + 1;
    fds_.assign(nodes, std::vector<int>(nodes, -1));
    send_mutex_.resize(nodes);
    for (int a = 0; a < nodes; ++a)
      send_mutex_[a] = std::make_unique<std::vector<std::mutex>>(nodes);
    for (int a = 0; a < nodes; ++a) {
      for (int b = a + 1; b < nodes; ++b) {
        int pair[2];
        if (socketpair(AF_UNIX, SOCK_STREAM, 0, pair) != 0)
          throw RuntimeError("socketpair failed");
        fds_[a][b] = pair[0];
        fds_[b][a] = pair[1];
        std::uint8_t v = kVersion, got = 0;
        if (write(pair[0], &v, 1) != 1 || write(pair[1], &v, 1) != 1 ||
            read(pair[0], &got, 1) != 1 || got != kVersion || read(pair[1], &got, 1) != 1 ||
            got != kVersion)
          throw RuntimeError("transport version handshake failed");
      }
    }
    for (int node = 0; node < nodes; ++node) {
      for (int peer = 0; peer < nodes; ++peer) {
        if (fds_[node][peer] < 0) continue;
        readers_.emplace_back([this, node, peer] { reader_loop(node, peer); });
      }
    }
  }

  ~SocketTransport() override {
    const int nodes = workers_ + 1;
    for (int a = 0; a < nodes; ++a)
      for (int b = 0; b < nodes; ++b)
        if (fds_[a][b] >= 0) shutdown(fds_[a][b], SHUT_RDWR);
    for (auto& t : readers_) t.join();
    for (int a = 0; a < nodes; ++a)
      for (int b = 0; b < nodes; ++b)
        if (fds_[a][b] >= 0) close(fds_[a][b]);
  }

  void send(int to, Message msg) override {
    int from = msg.sender;
    if (to == from) {  // self-delivery short-circuits the wire
      mailboxes_[to].push(std::move(msg));
      return;
    }
    std::vector<std::uint8_t> frame;
    const std::uint32_t len = static_cast<std::uint32_t>(1 + 8 + 4 + 2 + msg.payload.size());
    frame.reserve(4 + len);
    auto put = [&](const void* p, std::size_t n) {
      const auto* b = static_cast<const std::uint8_t*>(p);
      frame.insert(frame.end(), b, b + n);
    };
    put(&len, 4);
    std::uint8_t kind = static_cast<std::uint8_t>(msg.kind);
    put(&kind, 1);
    put(&msg.query_id, 8);
    put(&msg.operator_id, 4);
    put(&msg.sender, 2);
    put(msg.payload.data(), msg.payload.size());
    {
      std::lock_guard lock((*send_mutex_[from])[to]);
      std::size_t off = 0;
      while (off < frame.size()) {
        ssize_t n = write(fds_[from][to], frame.data() + off, frame.size() - off);
        if (n <= 0) throw RuntimeError("transport write failed");
        off += static_cast<std::size_t>(n);
      }
    }
    if (to != master_rank()) ++messages_sent_;
  }

 private:
  bool read_exact(int fd, void* buf, std::size_t n) {
    auto* p = static_cast<std::uint8_t*>(buf);
    std::size_t off = 0;
    while (off < n) {
      ssize_t r = read(fd, p + off, n - off);
      if (r <= 0) return false;
      off += static_cast<std::size_t>(r);
    }
    return true;
  }

  void reader_loop(int node, int peer) {
    int fd = fds_[node][peer];
    while (true) {
      std::uint32_t len = 0;
      if (!read_exact(fd, &len, 4)) return;
      if (len < 15) return;
      Message m;
      std::uint8_t kind;
      if (!read_exact(fd, &kind, 1) || !read_exact(fd, &m.query_id, 8) ||
          !read_exact(fd, &m.operator_id, 4) || !read_exact(fd, &m.sender, 2))
        return;
      m.kind = static_cast<MsgKind>(kind);
      m.payload.resize(len - 15);
      if (!m.payload.empty() && !read_exact(fd, m.payload.data(), m.payload.size())) return;
      mailboxes_[node].push(std::move(m));
    }
  }

  std::vector<std::vector<int>> fds_;
  std::vector<std::unique_ptr<std::vector<std::mutex>>> send_mutex_;
  std::vector<std::thread> readers_;
};

}  // namespace pathjoin
