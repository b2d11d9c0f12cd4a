#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <string>

#include "tcpconf/bytes.hpp"
#include "tcpconf/segment.hpp"

namespace tcpconf {

struct Endpoint {
  Ipv4Addr addr;
  std::uint16_t port = 0;

  std::string to_string() const { return addr.to_string() + ":" + std::to_string(port); }
  friend auto operator<=>(const Endpoint&, const Endpoint&) = default;
};

struct SessionHandle {
  std::uint32_t id = 0;
  friend auto operator<=>(const SessionHandle&, const SessionHandle&) = default;
};

enum class EventKind { TcpIn, IcmpIn, Timeout };

struct ChannelEvent {
  EventKind kind = EventKind::Timeout;
  Micros time{0};
  Bytes raw;         // full IPv4 datagram as received
  Segment segment;   // TcpIn only
  Ipv4Addr source;   // IPv4 source of the datagram (router address for IcmpIn)
};

struct PacerConfig {
  std::uint32_t rate_pps = 10000;
  std::uint32_t burst = 32;
};

// Token bucket shared by every session of a transport. Over any window of W
// seconds it grants at most rate_pps * W + burst emissions.
class Pacer {
 public:
  explicit Pacer(PacerConfig config);

  // Reserves one emission slot at or after `now` and returns its time.
  Micros reserve(Micros now);
  const PacerConfig& config() const { return config_; }

 private:
  PacerConfig config_;
  std::mutex mu_;
  double interval_us_;
  double tat_us_ = 0.0;  // theoretical arrival time of the next conforming emission
};

// Probes are sent exactly once; a Timeout from next_event is the only loss signal.
class Transport {
 public:
  virtual ~Transport() = default;

  virtual SessionHandle open_session(Endpoint local, Endpoint remote) = 0;
  virtual void close_session(SessionHandle h) = 0;
  // Returns the pacing-adjusted emission time.
  virtual Micros send(SessionHandle h, const Segment& seg) = 0;
  virtual ChannelEvent next_event(SessionHandle h, Micros deadline) = 0;
  virtual Micros now() const = 0;
  virtual Ipv4Addr local_address() const = 0;
};

// Routes inbound datagrams to sessions: TCP by 4-tuple, ICMP time-exceeded by the
// quoted 4-tuple. A quote whose source port was rewritten en route falls back to
// the single open session towards the quoted destination, if there is exactly one.
class SessionDemux {
 public:
  SessionHandle open(Endpoint local, Endpoint remote);
  void close(SessionHandle h);
  bool is_open(SessionHandle h) const;
  std::optional<Endpoint> remote_of(SessionHandle h) const;

  // Returns the session the datagram was queued to, if any.
  std::optional<SessionHandle> deliver(Micros time, const Bytes& datagram);
  std::optional<ChannelEvent> pop(SessionHandle h);

  // Every delivered or dropped datagram is appended as "<time_us> in <hex>".
  void set_frame_log(std::ostream* log) { log_ = log; }
  void log_outbound(Micros time, const Bytes& datagram);

 private:
  struct Session {
    Endpoint local;
    Endpoint remote;
    std::deque<ChannelEvent> queue;
  };

  std::optional<SessionHandle> match(const Endpoint& local, const Endpoint& remote) const;

  std::map<SessionHandle, Session> sessions_;
  std::uint32_t next_id_ = 1;
  std::ostream* log_ = nullptr;
};

}  // namespace tcpconf
