#include "tcpconf/raw_transport.hpp"

#include <arpa/inet.h>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <thread>
#include <unistd.h>

#include "tcpconf/error.hpp"

namespace tcpconf {

namespace {

int open_raw(int protocol) {
  int fd = ::socket(AF_INET, SOCK_RAW, protocol);
  if (fd < 0) {
    const int err = errno;
    if (err == EPERM || err == EACCES) {
      throw Error(Errc::PrivilegeError, "raw sockets need CAP_NET_RAW");
    }
    throw Error(Errc::IoError, std::string("socket: ") + std::strerror(err));
  }
  return fd;
}

Micros steady_now() {
  return std::chrono::duration_cast<Micros>(std::chrono::steady_clock::now().time_since_epoch());
}

}  // namespace

RawSocketTransport::RawSocketTransport(Ipv4Addr local, PacerConfig pacing) : local_(local), pacer_(pacing) {
  send_fd_ = open_raw(IPPROTO_RAW);
  try {
    tcp_fd_ = open_raw(IPPROTO_TCP);
    icmp_fd_ = open_raw(IPPROTO_ICMP);
  } catch (...) {
    ::close(send_fd_);
    if (tcp_fd_ >= 0) ::close(tcp_fd_);
    throw;
  }
}

RawSocketTransport::~RawSocketTransport() {
  for (int fd : {send_fd_, tcp_fd_, icmp_fd_}) {
    if (fd >= 0) ::close(fd);
  }
}

SessionHandle RawSocketTransport::open_session(Endpoint local, Endpoint remote) {
  std::lock_guard lock(demux_mu_);
  return demux_.open(local, remote);
}

void RawSocketTransport::close_session(SessionHandle h) {
  std::lock_guard lock(demux_mu_);
  demux_.close(h);
}

Micros RawSocketTransport::send(SessionHandle h, const Segment& seg) {
  {
    std::lock_guard lock(demux_mu_);
    if (!demux_.is_open(h)) throw Error(Errc::SessionClosed, "send on closed session");
  }
  const Micros at = pacer_.reserve(steady_now());
  const Micros wait = at - steady_now();
  if (wait.count() > 0) std::this_thread::sleep_for(wait);
  const Bytes wire = serialize(seg);
  sockaddr_in to{};
  to.sin_family = AF_INET;
  to.sin_addr.s_addr = htonl(seg.ip.destination.value);
  std::lock_guard lock(send_mu_);
  if (::sendto(send_fd_, wire.data(), wire.size(), 0, reinterpret_cast<const sockaddr*>(&to), sizeof(to)) < 0) {
    throw Error(Errc::IoError, std::string("sendto: ") + std::strerror(errno));
  }
  {
    std::lock_guard dl(demux_mu_);
    demux_.log_outbound(at, wire);
  }
  return at;
}

void RawSocketTransport::receive_some(Micros timeout) {
  std::lock_guard lock(recv_mu_);
  pollfd fds[2] = {{tcp_fd_, POLLIN, 0}, {icmp_fd_, POLLIN, 0}};
  const int ms = static_cast<int>(std::max<std::int64_t>(0, (timeout.count() + 999) / 1000));
  if (::poll(fds, 2, ms) <= 0) return;
  for (auto& p : fds) {
    if (!(p.revents & POLLIN)) continue;
    Bytes buf(65535);
    const ssize_t n = ::recv(p.fd, buf.data(), buf.size(), MSG_DONTWAIT);
    if (n <= 0) continue;
    buf.resize(static_cast<std::size_t>(n));
    std::lock_guard dl(demux_mu_);
    demux_.deliver(steady_now(), buf);
  }
}

ChannelEvent RawSocketTransport::next_event(SessionHandle h, Micros deadline) {
  const Micros until = steady_now() + deadline;
  for (;;) {
    {
      std::lock_guard lock(demux_mu_);
      if (!demux_.is_open(h)) throw Error(Errc::SessionClosed, "next_event on closed session");
      if (auto ev = demux_.pop(h)) return std::move(*ev);
    }
    const Micros left = until - steady_now();
    if (left.count() <= 0) {
      ChannelEvent timeout;
      timeout.kind = EventKind::Timeout;
      timeout.time = steady_now();
      return timeout;
    }
    receive_some(std::min(left, Micros{50'000}));
  }
}

Micros RawSocketTransport::now() const { return steady_now(); }

void RawSocketTransport::set_frame_log(std::ostream* log) {
  std::lock_guard lock(demux_mu_);
  demux_.set_frame_log(log);
}

}  // namespace tcpconf
