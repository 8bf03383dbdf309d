#include "aif/transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

namespace aif::net {

namespace {

PollResult decode_frames(std::vector<std::vector<std::uint8_t>> frames) {
  PollResult out;
  for (const auto& f : frames) {
    try {
      out.messages.push_back(decode_message(f));
    } catch (const Error& e) {
      out.errors.push_back(e);
    }
  }
  return out;
}

[[noreturn]] void sys_fail(const char* what) {
  throw Error(Errc::IoError, std::string(what) + ": " + std::strerror(errno));
}

void write_all(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      sys_fail("send");
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

}  // namespace

MemoryTransport::MemoryTransport(std::size_t endpoints) : queues_(endpoints) {}

void MemoryTransport::send_frame(std::size_t from, std::size_t to, std::vector<std::uint8_t> frame) {
  if (closed_) throw Error(Errc::Closed, "transport is closed");
  if (from >= queues_.size() || to >= queues_.size()) throw Error(Errc::InvalidArgument, "endpoint out of range");
  if (frame.size() > kMaxFrameBytes) throw Error(Errc::FrameTooLarge, "frame exceeds 1 MiB");
  std::lock_guard lock(mu_);
  queues_[to].push_back(std::move(frame));
}

PollResult MemoryTransport::poll(std::size_t endpoint) {
  if (closed_) throw Error(Errc::Closed, "transport is closed");
  if (endpoint >= queues_.size()) throw Error(Errc::InvalidArgument, "endpoint out of range");
  std::vector<std::vector<std::uint8_t>> frames;
  {
    std::lock_guard lock(mu_);
    auto& q = queues_[endpoint];
    frames.assign(std::make_move_iterator(q.begin()), std::make_move_iterator(q.end()));
    q.clear();
  }
  return decode_frames(std::move(frames));
}

void MemoryTransport::close() {
  closed_ = true;
  std::lock_guard lock(mu_);
  for (auto& q : queues_) q.clear();
}

// ---------------------------------------------------------------------------

SocketTransport::SocketTransport(std::size_t endpoints) : inbound_(endpoints) {
  for (std::size_t e = 0; e < endpoints; ++e) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    listeners_.push_back(fd);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) sys_fail("bind");
    if (::listen(fd, 128) < 0) sys_fail("listen");
    socklen_t len = sizeof addr;
    if (::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) < 0) sys_fail("getsockname");
    ports_.push_back(ntohs(addr.sin_port));
    ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
  }
}

SocketTransport::~SocketTransport() { close(); }

void SocketTransport::check_endpoint(std::size_t e) const {
  if (e >= listeners_.size()) throw Error(Errc::InvalidArgument, "endpoint out of range");
}

void SocketTransport::send_frame(std::size_t from, std::size_t to, std::vector<std::uint8_t> frame) {
  if (closed_) throw Error(Errc::Closed, "transport is closed");
  check_endpoint(from);
  check_endpoint(to);
  if (frame.size() > kMaxFrameBytes) throw Error(Errc::FrameTooLarge, "frame exceeds 1 MiB");

  Outbound* out;
  {
    std::lock_guard lock(out_mu_);
    auto& slot = outbound_[{from, to}];
    if (!slot) slot = std::make_unique<Outbound>();
    out = slot.get();
  }
  std::lock_guard lock(out->mu);
  if (out->fd < 0) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) sys_fail("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(ports_[to]);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
      ::close(fd);
      sys_fail("connect");
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    out->fd = fd;
  }
  std::uint8_t header[4];
  const auto n = static_cast<std::uint32_t>(frame.size());
  for (int k = 0; k < 4; ++k) header[k] = static_cast<std::uint8_t>(n >> (8 * k));
  write_all(out->fd, header, 4);
  write_all(out->fd, frame.data(), frame.size());
}

PollResult SocketTransport::poll(std::size_t endpoint) {
  if (closed_) throw Error(Errc::Closed, "transport is closed");
  check_endpoint(endpoint);
  auto& conns = inbound_[endpoint];

  while (true) {
    const int fd = ::accept(listeners_[endpoint], nullptr, nullptr);
    if (fd < 0) break;
    ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
    conns.push_back({fd, {}});
  }

  std::vector<std::vector<std::uint8_t>> frames;
  PollResult dropped;
  for (auto it = conns.begin(); it != conns.end();) {
    bool eof = false;
    std::uint8_t chunk[65536];
    while (true) {
      const ssize_t r = ::recv(it->fd, chunk, sizeof chunk, 0);
      if (r > 0) {
        it->buffer.insert(it->buffer.end(), chunk, chunk + r);
      } else if (r == 0) {
        eof = true;
        break;
      } else {
        if (errno == EINTR) continue;
        if (errno != EAGAIN && errno != EWOULDBLOCK) eof = true;
        break;
      }
    }

    bool drop = false;
    std::size_t pos = 0;
    auto& buf = it->buffer;
    while (buf.size() - pos >= 4) {
      std::uint32_t len = 0;
      for (int k = 0; k < 4; ++k) len |= static_cast<std::uint32_t>(buf[pos + k]) << (8 * k);
      if (len > kMaxFrameBytes) {
        dropped.errors.emplace_back(Errc::FrameTooLarge, "incoming frame of " + std::to_string(len) + " bytes");
        drop = true;
        break;
      }
      if (buf.size() - pos - 4 < len) break;
      frames.emplace_back(buf.begin() + static_cast<std::ptrdiff_t>(pos + 4),
                          buf.begin() + static_cast<std::ptrdiff_t>(pos + 4 + len));
      pos += 4 + len;
    }
    buf.erase(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(pos));

    if (eof && !drop && !buf.empty())
      dropped.errors.emplace_back(Errc::Truncated, "connection closed inside a frame");
    if (drop || eof) {
      ::close(it->fd);
      it = conns.erase(it);
    } else {
      ++it;
    }
  }

  auto result = decode_frames(std::move(frames));
  result.errors.insert(result.errors.end(), dropped.errors.begin(), dropped.errors.end());
  return result;
}

void SocketTransport::close() {
  if (closed_.exchange(true)) return;
  {
    std::lock_guard lock(out_mu_);
    for (auto& [key, out] : outbound_) {
      std::lock_guard l(out->mu);
      if (out->fd >= 0) ::close(out->fd);
      out->fd = -1;
    }
  }
  for (auto& conns : inbound_)
    for (auto& c : conns) ::close(c.fd);
  inbound_.clear();
  for (int fd : listeners_) ::close(fd);
}

}  // namespace aif::net
