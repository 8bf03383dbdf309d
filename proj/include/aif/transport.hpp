#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <atomic>
#include <mutex>
#include <vector>

#include "aif/belief_net.hpp"

namespace aif::net {

/// Largest frame payload either transport accepts.
inline constexpr std::size_t kMaxFrameBytes = std::size_t{1} << 20;

struct PollResult {
  std::vector<BeliefMessage> messages;
  std::vector<Error> errors;  ///< frames that failed to decode or were dropped
};

/// Point-to-point delivery between numbered endpoints. Sends may come from
/// any thread; each endpoint has a single poller. Messages from one sender to
/// one receiver arrive in send order.
class Transport {
 public:
  virtual ~Transport() = default;

  void send(std::size_t from, std::size_t to, const BeliefMessage& msg) { send_frame(from, to, encode_message(msg)); }
  /// Delivers raw payload bytes; the receiver decodes them.
  virtual void send_frame(std::size_t from, std::size_t to, std::vector<std::uint8_t> frame) = 0;
  virtual PollResult poll(std::size_t endpoint) = 0;
  virtual void close() = 0;
  virtual std::size_t num_endpoints() const noexcept = 0;
};

class MemoryTransport final : public Transport {
 public:
  explicit MemoryTransport(std::size_t endpoints);

  void send_frame(std::size_t from, std::size_t to, std::vector<std::uint8_t> frame) override;
  PollResult poll(std::size_t endpoint) override;
  void close() override;
  std::size_t num_endpoints() const noexcept override { return queues_.size(); }

 private:
  std::mutex mu_;
  std::vector<std::deque<std::vector<std::uint8_t>>> queues_;
  std::atomic<bool> closed_{false};
};

/// Loopback TCP. Every endpoint listens on 127.0.0.1 with an ephemeral port;
/// each (from, to) pair gets one lazily opened connection carrying
/// u32-LE length-prefixed frames.
class SocketTransport final : public Transport {
 public:
  explicit SocketTransport(std::size_t endpoints);
  ~SocketTransport() override;
  SocketTransport(const SocketTransport&) = delete;
  SocketTransport& operator=(const SocketTransport&) = delete;

  void send_frame(std::size_t from, std::size_t to, std::vector<std::uint8_t> frame) override;
  PollResult poll(std::size_t endpoint) override;
  void close() override;
  std::size_t num_endpoints() const noexcept override { return listeners_.size(); }

  /// Listening port of an endpoint, for tests that write raw bytes.
  std::uint16_t port(std::size_t endpoint) const { return ports_.at(endpoint); }

 private:
  struct Inbound {
    int fd;
    std::vector<std::uint8_t> buffer;
  };
  struct Outbound {
    std::mutex mu;
    int fd = -1;
  };

  void check_endpoint(std::size_t e) const;

  std::vector<int> listeners_;
  std::vector<std::uint16_t> ports_;
  std::vector<std::vector<Inbound>> inbound_;
  std::mutex out_mu_;
  std::map<std::pair<std::size_t, std::size_t>, std::unique_ptr<Outbound>> outbound_;
  std::atomic<bool> closed_{false};
};

}  // namespace aif::net
