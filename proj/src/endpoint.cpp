#include "tcpconf/endpoint.hpp"

#include <algorithm>
#include <array>

namespace tcpconf::netsim {

namespace {

constexpr std::array<std::pair<Deviation, std::string_view>, 11> kDeviationNames{{
    {Deviation::IgnoreBadChecksum, "IGNORE_BAD_CHECKSUM"},
    {Deviation::MssFloor536, "MSS_FLOOR_536"},
    {Deviation::DefaultMss1024, "DEFAULT_MSS_1024"},
    {Deviation::CrashOnUrgent, "CRASH_ON_URGENT"},
    {Deviation::DropUrgentSilently, "DROP_URGENT_SILENTLY"},
    {Deviation::RstOnUrgent, "RST_ON_URGENT"},
    {Deviation::DropReservedSyn, "DROP_RESERVED_SYN"},
    {Deviation::EchoReservedBits, "ECHO_RESERVED_BITS"},
    {Deviation::DeferAccept, "DEFER_ACCEPT"},
    {Deviation::DropUnknownOption, "DROP_UNKNOWN_OPTION"},
    {Deviation::RstOnOptions, "RST_ON_OPTIONS"},
}};

bool seq_lt(std::uint32_t a, std::uint32_t b) { return static_cast<std::int32_t>(a - b) < 0; }

bool known_option(std::uint8_t kind) {
  switch (kind) {
    case 0: case 1: case 2: case 3: case 4: case 5: case 8:
      return true;
    default:
      return false;
  }
}

class Stepper {
 public:
  Stepper(const StackProfile& profile, EndpointState state) : profile_(profile), state_(std::move(state)) {}

  StepResult finish() { return {std::move(state_), std::move(out_)}; }

  void on_segment(const Segment& in, Micros now);
  void on_timers(Micros now);

 private:
  Segment reply_to(const Segment& in, std::uint8_t flags, std::uint32_t seq, std::uint32_t ack) {
    Segment s;
    s.ip.source = state_.addr;
    s.ip.destination = in.ip.source;
    s.ip.identification = state_.next_ip_id++;
    s.tcp.source_port = in.tcp.dest_port;
    s.tcp.dest_port = in.tcp.source_port;
    s.tcp.seq = seq;
    s.tcp.ack = ack;
    s.tcp.flags = flags;
    s.tcp.window = 65535;
    return s;
  }

  void emit(Segment s) {
    finalize(s);
    out_.push_back(std::move(s));
  }

  void send_rst_for(const Segment& in) {
    const auto len = static_cast<std::uint32_t>(in.payload.size());
    if (in.tcp.has(tcp_flag::kAck)) {
      emit(reply_to(in, tcp_flag::kRst, in.tcp.ack, 0));
    } else {
      const std::uint32_t extra = (in.tcp.has(tcp_flag::kSyn) ? 1 : 0) + (in.tcp.has(tcp_flag::kFin) ? 1 : 0);
      emit(reply_to(in, tcp_flag::kRst | tcp_flag::kAck, 0, in.tcp.seq + len + extra));
    }
  }

  Segment synack(const Segment& in, const Connection& c) {
    Segment s = reply_to(in, tcp_flag::kSyn | tcp_flag::kAck, c.iss, c.rcv_nxt);
    s.tcp.reserved = c.synack_reserved;
    s.tcp.options.push_back(TcpOption::mss(profile_.own_mss));
    return s;
  }

  Segment synack_for_key(const ConnKey& key, const Connection& c) {
    Segment probe;
    probe.ip.source = Ipv4Addr{std::get<0>(key)};
    probe.tcp.source_port = std::get<1>(key);
    probe.tcp.dest_port = std::get<2>(key);
    return synack(probe, c);
  }

  std::uint16_t effective_mss(const Segment& syn) const {
    std::uint16_t mss;
    if (auto adv = syn.tcp.mss()) {
      mss = *adv;
      if (profile_.has(Deviation::MssFloor536)) mss = std::max<std::uint16_t>(mss, kDefaultIpv4Mss);
    } else {
      mss = profile_.has(Deviation::DefaultMss1024) ? 1024 : kDefaultIpv4Mss;
    }
    return std::min(mss, profile_.own_mss);
  }

  void on_syn(const Segment& in, const ConnKey& key, Micros now);
  void on_data(const Segment& in, const ConnKey& key, Connection& c, Micros now);
  void serve_body(const Segment& in, Connection& c);

  const StackProfile& profile_;
  EndpointState state_;
  std::vector<Segment> out_;
};

void Stepper::on_segment(const Segment& in, Micros now) {
  if (state_.crashed) {
    if (!state_.restart_at || now < *state_.restart_at) return;
    state_.crashed = false;
    state_.restart_at.reset();
    state_.connections.clear();
  }
  if (in.ip.destination != state_.addr) return;
  if (!verify_tcp_checksum(in) && !profile_.has(Deviation::IgnoreBadChecksum)) return;

  const ConnKey key{in.ip.source.value, in.tcp.source_port, in.tcp.dest_port};
  const auto& t = in.tcp;
  if (!profile_.listen_ports.contains(t.dest_port)) {
    if (!t.has(tcp_flag::kRst)) send_rst_for(in);
    return;
  }
  auto it = state_.connections.find(key);
  if (t.has(tcp_flag::kRst)) {
    if (it != state_.connections.end()) state_.connections.erase(it);
    return;
  }
  if (t.has(tcp_flag::kSyn) && !t.has(tcp_flag::kAck)) {
    if (it != state_.connections.end() && it->second.irs == t.seq) {
      // duplicate SYN: repeat the handshake reply
      if (it->second.phase == Connection::Phase::SynReceived) {
        emit(synack(in, it->second));
      } else {
        emit(reply_to(in, tcp_flag::kAck, it->second.snd_nxt, it->second.rcv_nxt));
      }
      return;
    }
    if (it != state_.connections.end()) state_.connections.erase(it);
    on_syn(in, key, now);
    return;
  }
  if (it == state_.connections.end()) {
    send_rst_for(in);
    return;
  }
  Connection& c = it->second;
  if (!t.has(tcp_flag::kAck)) return;
  if (c.phase == Connection::Phase::SynReceived) {
    if (t.ack != c.iss + 1) {
      send_rst_for(in);
      return;
    }
    if (profile_.has(Deviation::DeferAccept) && in.payload.empty() && !t.has(tcp_flag::kFin)) return;
    c.phase = Connection::Phase::Established;
  }
  if (!in.payload.empty() || t.has(tcp_flag::kFin)) on_data(in, key, c, now);
}

void Stepper::on_syn(const Segment& in, const ConnKey& key, Micros now) {
  const auto& t = in.tcp;
  if (profile_.has(Deviation::DropReservedSyn) && t.reserved != 0) return;
  if (profile_.has(Deviation::DropUnknownOption) &&
      std::any_of(t.options.begin(), t.options.end(), [](const TcpOption& o) { return !known_option(o.kind); })) {
    return;
  }
  if (profile_.has(Deviation::RstOnOptions) && !t.options.empty()) {
    send_rst_for(in);
    return;
  }
  Connection c;
  c.irs = t.seq;
  c.rcv_nxt = t.seq + 1;
  c.iss = static_cast<std::uint32_t>(
      mix64(state_.seed ^ (std::uint64_t{in.ip.source.value} << 32) ^ (std::uint64_t{t.source_port} << 16) ^ t.seq));
  c.snd_nxt = c.iss + 1;
  c.send_mss = effective_mss(in);
  c.synack_reserved = profile_.has(Deviation::EchoReservedBits) ? t.reserved : 0;
  c.rto = kInitialRto;
  c.rto_at = now + c.rto;
  emit(synack(in, c));
  state_.connections.emplace(key, c);
}

void Stepper::on_data(const Segment& in, const ConnKey& key, Connection& c, Micros now) {
  const auto& t = in.tcp;
  if (t.has(tcp_flag::kUrg) && !in.payload.empty()) {
    if (profile_.has(Deviation::CrashOnUrgent)) {
      state_.crashed = true;
      state_.connections.clear();
      // revival happens lazily on the first segment after the delay
      if (profile_.restart_after_crash) state_.restart_at = now + profile_.restart_delay;
      return;
    }
    if (profile_.has(Deviation::DropUrgentSilently)) return;
    if (profile_.has(Deviation::RstOnUrgent)) {
      emit(reply_to(in, tcp_flag::kRst, c.snd_nxt, 0));
      state_.connections.erase(key);
      return;
    }
  }
  const auto len = static_cast<std::uint32_t>(in.payload.size());
  bool accepted = false;
  if (len > 0) {
    const std::uint32_t end = t.seq + len;
    if (!seq_lt(c.rcv_nxt, t.seq) && seq_lt(c.rcv_nxt, end)) {
      c.rcv_nxt = end;
      accepted = true;
    }
  }
  bool fin = false;
  if (t.has(tcp_flag::kFin) && t.seq + len == c.rcv_nxt) {
    c.rcv_nxt += 1;
    fin = true;
  }
  emit(reply_to(in, tcp_flag::kAck, c.snd_nxt, c.rcv_nxt));
  if (accepted && !c.responded) serve_body(in, c);
  if (fin) state_.connections.erase(key);
}

void Stepper::serve_body(const Segment& in, Connection& c) {
  c.responded = true;
  std::size_t left = profile_.response_body_len;
  std::size_t offset = 0;
  while (left > 0) {
    const std::size_t n = std::min<std::size_t>(left, c.send_mss);
    Segment s = reply_to(in, tcp_flag::kAck, c.snd_nxt, c.rcv_nxt);
    s.payload.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.payload[i] = static_cast<std::uint8_t>('a' + (offset + i) % 26);
    left -= n;
    offset += n;
    if (left == 0) s.tcp.flags |= tcp_flag::kPsh;
    c.snd_nxt += static_cast<std::uint32_t>(n);
    emit(std::move(s));
  }
}

void Stepper::on_timers(Micros now) {
  if (state_.crashed) return;
  for (auto it = state_.connections.begin(); it != state_.connections.end();) {
    Connection& c = it->second;
    if (c.phase != Connection::Phase::SynReceived || now < c.rto_at) {
      ++it;
      continue;
    }
    if (c.retries >= kMaxSynAckRetries) {
      it = state_.connections.erase(it);
      continue;
    }
    ++c.retries;
    c.rto *= 2;
    c.rto_at = now + c.rto;
    emit(synack_for_key(it->first, c));
    ++it;
  }
}

}  // namespace

std::string to_string(Deviation d) {
  for (const auto& [dev, name] : kDeviationNames) {
    if (dev == d) return std::string(name);
  }
  return "UNKNOWN";
}

std::optional<Deviation> deviation_from_string(std::string_view name) {
  for (const auto& [dev, n] : kDeviationNames) {
    if (n == name) return dev;
  }
  return std::nullopt;
}

const std::vector<Deviation>& all_deviations() {
  static const std::vector<Deviation> kAll = [] {
    std::vector<Deviation> v;
    for (const auto& [dev, name] : kDeviationNames) v.push_back(dev);
    return v;
  }();
  return kAll;
}

namespace {
StackProfile named(std::string name, std::set<Deviation> deviations = {}) {
  StackProfile p;
  p.name = std::move(name);
  p.deviations = std::move(deviations);
  return p;
}
}  // namespace

StackProfile profile_linux() { return named("linux"); }
StackProfile profile_windows() { return named("windows", {Deviation::MssFloor536}); }
StackProfile profile_macos() { return named("macos", {Deviation::DefaultMss1024}); }
StackProfile profile_uip() { return named("uip", {Deviation::CrashOnUrgent}); }
StackProfile profile_lwip() { return named("lwip"); }
StackProfile profile_seastar() { return named("seastar", {Deviation::IgnoreBadChecksum}); }

std::optional<StackProfile> profile_by_name(std::string_view name) {
  if (name == "linux" || name == "conformant") {
    auto p = profile_linux();
    p.name = std::string(name);
    return p;
  }
  if (name == "windows") return profile_windows();
  if (name == "macos") return profile_macos();
  if (name == "uip") return profile_uip();
  if (name == "lwip") return profile_lwip();
  if (name == "seastar") return profile_seastar();
  return std::nullopt;
}

EndpointState initial_state(Ipv4Addr addr, std::uint64_t seed) {
  EndpointState s;
  s.addr = addr;
  s.seed = seed;
  return s;
}

StepResult endpoint_step(const StackProfile& profile, EndpointState state, const Segment& incoming, Micros now) {
  Stepper st(profile, std::move(state));
  st.on_segment(incoming, now);
  return st.finish();
}

StepResult endpoint_timers(const StackProfile& profile, EndpointState state, Micros now) {
  Stepper st(profile, std::move(state));
  st.on_timers(now);
  return st.finish();
}

std::optional<Micros> next_timer(const EndpointState& state) {
  if (state.crashed) return std::nullopt;
  std::optional<Micros> best;
  for (const auto& [key, c] : state.connections) {
    if (c.phase != Connection::Phase::SynReceived) continue;
    if (!best || c.rto_at < *best) best = c.rto_at;
  }
  return best;
}

}  // namespace tcpconf::netsim
