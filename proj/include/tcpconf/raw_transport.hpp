#pragma once

#include <mutex>

#include "tcpconf/transport.hpp"

namespace tcpconf {

// Live IPv4 adapter over raw sockets. Needs CAP_NET_RAW (or root); construction
// throws PrivilegeError otherwise.
//
// Operational requirement: the host kernel answers unsolicited SYN/ACKs on
// scanner-owned ports with RSTs, which corrupts every exchange. Suppress them
// for the probe port range before scanning, e.g.
//   iptables -A OUTPUT -p tcp --tcp-flags RST RST --sport 40000:60000 -j DROP
class RawSocketTransport final : public Transport {
 public:
  RawSocketTransport(Ipv4Addr local, PacerConfig pacing);
  ~RawSocketTransport() override;

  RawSocketTransport(const RawSocketTransport&) = delete;
  RawSocketTransport& operator=(const RawSocketTransport&) = delete;

  SessionHandle open_session(Endpoint local, Endpoint remote) override;
  void close_session(SessionHandle h) override;
  Micros send(SessionHandle h, const Segment& seg) override;
  ChannelEvent next_event(SessionHandle h, Micros deadline) override;
  Micros now() const override;
  Ipv4Addr local_address() const override { return local_; }

  void set_frame_log(std::ostream* log);

 private:
  void receive_some(Micros timeout);

  Ipv4Addr local_;
  Pacer pacer_;
  int send_fd_ = -1;
  int tcp_fd_ = -1;
  int icmp_fd_ = -1;
  std::mutex demux_mu_;
  std::mutex recv_mu_;
  std::mutex send_mu_;
  SessionDemux demux_;
};

}  // namespace tcpconf
