#include "tcpconf/sim_transport.hpp"

#include "tcpconf/error.hpp"

namespace tcpconf {

SimTransport::SimTransport(SimLink& link, PacerConfig pacing) : link_(link), pacer_(pacing) {}

SessionHandle SimTransport::open_session(Endpoint local, Endpoint remote) {
  std::lock_guard lock(mu_);
  if (!link_.has_route(remote.addr)) throw Error(Errc::NoRoute, remote.to_string() + " not in topology");
  return demux_.open(local, remote);
}

void SimTransport::close_session(SessionHandle h) {
  std::lock_guard lock(mu_);
  demux_.close(h);
}

Micros SimTransport::send(SessionHandle h, const Segment& seg) {
  std::lock_guard lock(mu_);
  if (!demux_.is_open(h)) throw Error(Errc::SessionClosed, "send on closed session");
  const Micros at = pacer_.reserve(now_);
  Bytes wire = serialize(seg);
  demux_.log_outbound(at, wire);
  link_.inject(at, std::move(wire));
  return at;
}

ChannelEvent SimTransport::next_event(SessionHandle h, Micros deadline) {
  std::lock_guard lock(mu_);
  if (!demux_.is_open(h)) throw Error(Errc::SessionClosed, "next_event on closed session");
  const Micros until = now_ + deadline;
  for (;;) {
    if (auto ev = demux_.pop(h)) return std::move(*ev);
    const auto t = link_.next_event_time();
    if (!t || *t > until) {
      now_ = until;
      ChannelEvent timeout;
      timeout.kind = EventKind::Timeout;
      timeout.time = now_;
      return timeout;
    }
    if (*t > now_) now_ = *t;
    for (auto& [when, datagram] : link_.step()) demux_.deliver(when, datagram);
  }
}

Micros SimTransport::now() const {
  std::lock_guard lock(mu_);
  return now_;
}

void SimTransport::set_frame_log(std::ostream* log) {
  std::lock_guard lock(mu_);
  demux_.set_frame_log(log);
}

}  // namespace tcpconf
