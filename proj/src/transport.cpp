#include "tcpconf/transport.hpp"

#include <algorithm>
#include <cmath>

#include "tcpconf/error.hpp"
#include "tcpconf/icmp.hpp"

namespace tcpconf {

Pacer::Pacer(PacerConfig config) : config_(config) {
  if (config.rate_pps == 0) throw Error(Errc::ConfigError, "rate_pps must be positive");
  if (config_.burst == 0) config_.burst = 1;
  interval_us_ = 1e6 / config.rate_pps;
}

Micros Pacer::reserve(Micros now) {
  std::lock_guard lock(mu_);
  const double tolerance = (config_.burst - 1) * interval_us_;
  const double t = static_cast<double>(now.count());
  const double emit = std::max(t, tat_us_ - tolerance);
  tat_us_ = std::max(tat_us_, emit) + interval_us_;
  return Micros{static_cast<std::int64_t>(std::ceil(emit))};
}

SessionHandle SessionDemux::open(Endpoint local, Endpoint remote) {
  for (const auto& [h, s] : sessions_) {
    if (s.local == local) {
      throw Error(Errc::PortInUse, local.to_string() + " already bound by a live session");
    }
  }
  SessionHandle h{next_id_++};
  sessions_.emplace(h, Session{local, remote, {}});
  return h;
}

void SessionDemux::close(SessionHandle h) { sessions_.erase(h); }

bool SessionDemux::is_open(SessionHandle h) const { return sessions_.contains(h); }

std::optional<Endpoint> SessionDemux::remote_of(SessionHandle h) const {
  auto it = sessions_.find(h);
  if (it == sessions_.end()) return std::nullopt;
  return it->second.remote;
}

std::optional<SessionHandle> SessionDemux::match(const Endpoint& local, const Endpoint& remote) const {
  for (const auto& [h, s] : sessions_) {
    if (s.local == local && s.remote == remote) return h;
  }
  return std::nullopt;
}

void SessionDemux::log_outbound(Micros time, const Bytes& datagram) {
  if (log_) *log_ << time.count() << " out " << to_hex(datagram) << '\n';
}

std::optional<SessionHandle> SessionDemux::deliver(Micros time, const Bytes& datagram) {
  if (log_) *log_ << time.count() << " in " << to_hex(datagram) << '\n';
  if (datagram.size() < kIpv4HeaderLen) return std::nullopt;
  ChannelEvent ev;
  ev.time = time;
  ev.raw = datagram;
  ev.source = Ipv4Addr{load_be32(datagram, 12)};
  std::optional<SessionHandle> target;
  try {
    if (datagram[9] == kProtoTcp) {
      ev.kind = EventKind::TcpIn;
      ev.segment = parse(datagram);
      const Endpoint local{ev.segment.ip.destination, ev.segment.tcp.dest_port};
      const Endpoint remote{ev.segment.ip.source, ev.segment.tcp.source_port};
      target = match(local, remote);
    } else if (datagram[9] == kProtoIcmp) {
      ev.kind = EventKind::IcmpIn;
      const auto icmp = parse_icmp_time_exceeded(datagram);
      const auto& q = icmp.quote.segment;
      const Endpoint local{q.ip.source, q.tcp.source_port};
      const Endpoint remote{q.ip.destination, q.tcp.dest_port};
      target = match(local, remote);
      if (!target) {
        std::optional<SessionHandle> only;
        int count = 0;
        for (const auto& [h, s] : sessions_) {
          if (s.remote == remote && s.local.addr == local.addr) {
            only = h;
            ++count;
          }
        }
        if (count == 1) target = only;
      }
    }
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!target) return std::nullopt;
  sessions_.at(*target).queue.push_back(std::move(ev));
  return target;
}

std::optional<ChannelEvent> SessionDemux::pop(SessionHandle h) {
  auto it = sessions_.find(h);
  if (it == sessions_.end() || it->second.queue.empty()) return std::nullopt;
  ChannelEvent ev = std::move(it->second.queue.front());
  it->second.queue.pop_front();
  return ev;
}

}  // namespace tcpconf
