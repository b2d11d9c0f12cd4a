#pragma once

#include <mutex>
#include <optional>
#include <utility>
#include <vector>

#include "tcpconf/transport.hpp"

namespace tcpconf {

// Virtual-time network a SimTransport drives. netsim::Network implements it.
class SimLink {
 public:
  virtual ~SimLink() = default;

  // Schedules a datagram emitted by the scanner at virtual time `at`.
  virtual void inject(Micros at, Bytes datagram) = 0;
  virtual std::optional<Micros> next_event_time() const = 0;
  // Runs the earliest pending event; returns datagrams that reached the scanner.
  virtual std::vector<std::pair<Micros, Bytes>> step() = 0;
  virtual bool has_route(Ipv4Addr destination) const = 0;
  virtual Ipv4Addr scanner_address() const = 0;
};

// Deterministic in-process transport. Time only advances inside next_event, so
// identical call sequences produce identical event sequences.
class SimTransport final : public Transport {
 public:
  SimTransport(SimLink& link, PacerConfig pacing);

  SessionHandle open_session(Endpoint local, Endpoint remote) override;
  void close_session(SessionHandle h) override;
  Micros send(SessionHandle h, const Segment& seg) override;
  ChannelEvent next_event(SessionHandle h, Micros deadline) override;
  Micros now() const override;
  Ipv4Addr local_address() const override { return link_.scanner_address(); }

  void set_frame_log(std::ostream* log);

 private:
  SimLink& link_;
  Pacer pacer_;
  mutable std::mutex mu_;
  SessionDemux demux_;
  Micros now_{0};
};

}  // namespace tcpconf
