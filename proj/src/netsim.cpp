#include "tcpconf/netsim.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "tcpconf/checksum.hpp"
#include "tcpconf/error.hpp"
#include "tcpconf/icmp.hpp"

namespace tcpconf::netsim {

namespace {

using nlohmann::json;

constexpr std::array<std::pair<MiddleboxKind, std::string_view>, 7> kKindNames{{
    {MiddleboxKind::MssClamp, "MSS_CLAMP"},
    {MiddleboxKind::MssInsert, "MSS_INSERT"},
    {MiddleboxKind::StripPadding, "STRIP_PADDING"},
    {MiddleboxKind::StripUnknownOption, "STRIP_UNKNOWN_OPTION"},
    {MiddleboxKind::ClearReserved, "CLEAR_RESERVED"},
    {MiddleboxKind::FixChecksum, "FIX_CHECKSUM"},
    {MiddleboxKind::NatRewrite, "NAT_REWRITE"},
}};

constexpr int kMaxPathLength = 60;
constexpr std::uint16_t kNatPortBase = 61000;

bool assigned_option(std::uint8_t kind) {
  switch (kind) {
    case 0: case 1: case 2: case 3: case 4: case 5: case 8:
      return true;
    default:
      return false;
  }
}

// Incremental checksum update: carries the old field's error over to the
// rewritten segment, so valid stays valid and invalid stays invalid.
std::uint16_t carry_checksum(std::uint16_t field, std::uint16_t old_correct, std::uint16_t new_correct) {
  if (field == old_correct) return new_correct;
  OnesComplementSum s;
  s.add16(static_cast<std::uint16_t>(~field));
  s.add16(static_cast<std::uint16_t>(~new_correct));
  s.add16(old_correct);
  return static_cast<std::uint16_t>(~s.folded());
}

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::InvalidSpec, what); }

QuoteLen quote_from_string(const std::string& s) {
  if (s == "FULL") return QuoteLen::Full;
  if (s == "MIN_28") return QuoteLen::Min28;
  invalid("unknown quote_len '" + s + "'");
}

Ipv4Addr parse_addr(const json& j, const char* what) {
  if (!j.is_string()) invalid(std::string(what) + " must be a dotted-quad string");
  auto a = Ipv4Addr::parse(j.get<std::string>());
  if (!a) invalid(std::string(what) + ": bad address '" + j.get<std::string>() + "'");
  return *a;
}

StackProfile profile_from_json(const json& j) {
  if (j.is_string()) {
    auto p = profile_by_name(j.get<std::string>());
    if (!p) invalid("unknown profile '" + j.get<std::string>() + "'");
    return *p;
  }
  if (!j.is_object()) invalid("profile must be a name or an object");
  StackProfile p;
  if (j.contains("base")) p = profile_from_json(j.at("base"));
  if (j.contains("name")) p.name = j.at("name").get<std::string>();
  if (j.contains("deviations")) {
    for (const auto& d : j.at("deviations")) {
      auto dev = deviation_from_string(d.get<std::string>());
      if (!dev) invalid("unknown deviation '" + d.get<std::string>() + "'");
      p.deviations.insert(*dev);
    }
  }
  if (j.contains("response_body_len")) p.response_body_len = j.at("response_body_len").get<std::size_t>();
  if (j.contains("restart_after_crash")) p.restart_after_crash = j.at("restart_after_crash").get<bool>();
  if (j.contains("restart_delay_us")) p.restart_delay = Micros{j.at("restart_delay_us").get<std::int64_t>()};
  if (j.contains("own_mss")) p.own_mss = j.at("own_mss").get<std::uint16_t>();
  if (j.contains("listen_ports")) p.listen_ports = j.at("listen_ports").get<std::set<std::uint16_t>>();
  return p;
}

}  // namespace

std::string to_string(MiddleboxKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return std::string(name);
  return "?";
}

std::optional<MiddleboxKind> middlebox_from_string(std::string_view name) {
  for (const auto& [kind, n] : kKindNames)
    if (n == name) return kind;
  return std::nullopt;
}

void validate(const Topology& topo) {
  if (topo.hop_latency.count() <= 0) invalid("hop latency must be positive");
  std::set<Ipv4Addr> seen;
  for (const auto& t : topo.targets) {
    if (t.addr == topo.scanner) invalid("target " + t.addr.to_string() + " equals the scanner address");
    if (!seen.insert(t.addr).second) invalid("duplicate target " + t.addr.to_string());
    if (t.path_length < 0 || t.path_length > kMaxPathLength)
      invalid("path_length of " + t.addr.to_string() + " outside 0.." + std::to_string(kMaxPathLength));
    for (const auto& mb : t.middleboxes) {
      if (mb.hop < 1 || mb.hop > t.path_length)
        invalid("middlebox hop " + std::to_string(mb.hop) + " outside path of " + t.addr.to_string());
      if ((mb.kind == MiddleboxKind::MssClamp || mb.kind == MiddleboxKind::MssInsert) && mb.value == 0)
        invalid("MSS middlebox needs a nonzero value");
    }
  }
}

Topology topology_from_json(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    invalid(std::string("topology is not valid JSON: ") + e.what());
  }
  Topology topo;
  try {
    if (j.contains("scanner")) topo.scanner = parse_addr(j.at("scanner"), "scanner");
    if (j.contains("hop_latency_us")) topo.hop_latency = Micros{j.at("hop_latency_us").get<std::int64_t>()};
    if (j.contains("seed")) topo.seed = j.at("seed").get<std::uint64_t>();
    if (!j.contains("targets") || !j.at("targets").is_array()) invalid("topology needs a targets array");
    for (const auto& jt : j.at("targets")) {
      SimTarget t;
      t.addr = parse_addr(jt.at("addr"), "addr");
      t.profile = profile_from_json(jt.value("profile", json("linux")));
      t.path_length = jt.value("path_length", t.path_length);
      t.blackhole = jt.value("blackhole", false);
      if (jt.contains("router_quote")) t.router_quote = quote_from_string(jt.at("router_quote").get<std::string>());
      if (jt.contains("labels")) t.labels = jt.at("labels").get<std::map<std::string, std::string>>();
      for (const auto& jm : jt.value("middleboxes", json::array())) {
        MiddleboxSpec mb;
        mb.hop = jm.at("hop").get<int>();
        auto kind = middlebox_from_string(jm.at("kind").get<std::string>());
        if (!kind) invalid("unknown middlebox kind '" + jm.at("kind").get<std::string>() + "'");
        mb.kind = *kind;
        mb.value = jm.value("value", std::uint16_t{0});
        if (jm.contains("quote_len")) mb.quote_len = quote_from_string(jm.at("quote_len").get<std::string>());
        t.middleboxes.push_back(mb);
      }
      topo.targets.push_back(std::move(t));
    }
  } catch (const json::exception& e) {
    invalid(std::string("topology field error: ") + e.what());
  }
  validate(topo);
  return topo;
}

Topology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileUnreadable, "cannot read topology " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return topology_from_json(ss.str());
}

Ipv4Addr router_address(Ipv4Addr target, int hop) {
  return Ipv4Addr{0x64400000u | ((target.value & 0xffffu) << 6) | static_cast<std::uint32_t>(hop)};
}

Topology single_target(const Topology& topo, Ipv4Addr target) {
  Topology out = topo;
  out.targets.clear();
  for (const auto& t : topo.targets)
    if (t.addr == target) out.targets.push_back(t);
  if (out.targets.empty()) throw Error(Errc::NoRoute, target.to_string() + " not in topology");
  return out;
}

Network::Network(Topology topo, bool record_transcript) : topo_(std::move(topo)), record_(record_transcript) {
  validate(topo_);
  for (std::size_t i = 0; i < topo_.targets.size(); ++i) {
    endpoints_.push_back(initial_state(topo_.targets[i].addr, mix64(topo_.seed ^ mix64(topo_.targets[i].addr.value))));
    timer_at_.emplace_back();
  }
}

std::optional<std::size_t> Network::target_index(Ipv4Addr addr) const {
  for (std::size_t i = 0; i < topo_.targets.size(); ++i)
    if (topo_.targets[i].addr == addr) return i;
  return std::nullopt;
}

bool Network::has_route(Ipv4Addr destination) const { return target_index(destination).has_value(); }

void Network::push(Micros t, EventKind kind, std::size_t target, Bytes frame) {
  events_.push(Event{t, order_++, kind, target, std::move(frame)});
}

void Network::record(Micros t, std::size_t target, int location, const char* dir, const char* action,
                     const Bytes& frame) {
  if (record_) transcript_.push_back(TranscriptEntry{t, target, location, dir, action, frame});
}

std::optional<Micros> Network::next_event_time() const {
  if (events_.empty()) return std::nullopt;
  return events_.top().time;
}

void Network::inject(Micros at, Bytes datagram) {
  Segment seg;
  try {
    seg = parse(datagram);
  } catch (const Error&) {
    record(at, 0, 0, "fwd", "drop", datagram);
    return;
  }
  auto idx = target_index(seg.ip.destination);
  if (!idx) {
    record(at, 0, 0, "fwd", "drop", datagram);
    return;
  }
  record(at, *idx, 0, "fwd", "send", datagram);
  forward(*idx, at, std::move(seg));
}

void Network::inject_from_endpoint(Micros at, Bytes datagram) {
  Segment seg = parse(datagram);
  auto idx = target_index(seg.ip.source);
  if (!idx) throw Error(Errc::NoRoute, seg.ip.source.to_string() + " is not an endpoint");
  record(at, *idx, topo_.targets[*idx].path_length + 1, "rev", "send", datagram);
  reverse(*idx, at, std::move(seg));
}

bool Network::rewrite_forward(std::size_t target, const MiddleboxSpec& mb, Segment& seg) {
  auto& opts = seg.tcp.options;
  const bool syn = seg.tcp.has(tcp_flag::kSyn) && !seg.tcp.has(tcp_flag::kAck);
  switch (mb.kind) {
    case MiddleboxKind::MssClamp: {
      if (!syn) return false;
      bool changed = false;
      for (auto& o : opts) {
        if (o.kind == option_kind::kMss && o.data.size() == 2 && o.mss_value() != mb.value) {
          o = TcpOption::mss(mb.value);
          changed = true;
        }
      }
      return changed;
    }
    case MiddleboxKind::MssInsert: {
      if (!syn || seg.tcp.mss()) return false;
      if (options_length(opts) + 4 > kMaxOptionBytes) return false;
      opts.insert(opts.begin(), TcpOption::mss(mb.value));
      return true;
    }
    case MiddleboxKind::StripPadding: {
      auto n = std::erase_if(opts, [](const TcpOption& o) { return o.single_byte(); });
      return n > 0;
    }
    case MiddleboxKind::StripUnknownOption: {
      auto n = std::erase_if(opts, [](const TcpOption& o) { return !assigned_option(o.kind); });
      return n > 0;
    }
    case MiddleboxKind::ClearReserved: {
      if (seg.tcp.reserved == 0) return false;
      seg.tcp.reserved = 0;
      return true;
    }
    case MiddleboxKind::FixChecksum: {
      const auto correct = compute_tcp_checksum(seg);
      if (seg.tcp.checksum == correct) return false;
      seg.tcp.checksum = correct;
      return true;
    }
    case MiddleboxKind::NatRewrite: {
      auto& table = nat_[{target, mb.hop}];
      std::uint16_t mapped = 0;
      for (const auto& [port, entry] : table)
        if (entry.original == seg.tcp.source_port) mapped = port;
      if (mapped == 0) {
        mapped = static_cast<std::uint16_t>(kNatPortBase + table.size());
        table[mapped] = NatEntry{seg.tcp.source_port};
      }
      if (mapped == seg.tcp.source_port) return false;
      seg.tcp.source_port = mapped;
      return true;
    }
  }
  return false;
}

void Network::forward(std::size_t target, Micros t, Segment seg) {
  const auto& st = topo_.targets[target];
  for (int hop = 1; hop <= st.path_length; ++hop) {
    const Micros at = t + Micros{topo_.hop_latency.count() * hop};
    QuoteLen quote = st.router_quote;
    for (const auto& mb : st.middleboxes) {
      if (mb.hop != hop) continue;
      quote = mb.quote_len;
      const Segment before = seg;
      if (mb.kind == MiddleboxKind::FixChecksum) {
        rewrite_forward(target, mb, seg);
        continue;
      }
      if (rewrite_forward(target, mb, seg)) {
        update_lengths(seg);
        seg.tcp.checksum =
            carry_checksum(before.tcp.checksum, compute_tcp_checksum(before), compute_tcp_checksum(seg));
      }
    }
    seg.ip.header_checksum = compute_ip_checksum(seg.ip);
    Bytes arrived = serialize(seg);
    record(at, target, hop, "fwd", "arrive", arrived);
    if (seg.ip.ttl <= 1) {
      Bytes quoted = arrived;
      if (quote == QuoteLen::Min28) quoted.resize(kMinQuoteLen);
      Bytes icmp = build_icmp_time_exceeded(router_address(st.addr, hop), seg.ip.source, quoted,
                                            static_cast<std::uint16_t>(hop));
      record(at, target, hop, "rev", "icmp", icmp);
      push(at + Micros{topo_.hop_latency.count() * hop}, EventKind::ArriveScanner, target, std::move(icmp));
      return;
    }
    seg.ip.ttl -= 1;
  }
  seg.ip.header_checksum = compute_ip_checksum(seg.ip);
  push(t + Micros{topo_.hop_latency.count() * (st.path_length + 1)}, EventKind::ArriveEndpoint, target, serialize(seg));
}

void Network::reverse(std::size_t target, Micros t, Segment seg) {
  const auto& st = topo_.targets[target];
  for (int hop = st.path_length; hop >= 1; --hop) {
    for (const auto& mb : st.middleboxes) {
      if (mb.hop != hop || mb.kind != MiddleboxKind::NatRewrite) continue;
      auto it = nat_.find({target, hop});
      if (it == nat_.end()) continue;
      auto e = it->second.find(seg.tcp.dest_port);
      if (e == it->second.end()) continue;
      const Segment before = seg;
      seg.tcp.dest_port = e->second.original;
      seg.tcp.checksum = carry_checksum(before.tcp.checksum, compute_tcp_checksum(before), compute_tcp_checksum(seg));
    }
    if (seg.ip.ttl > 1) seg.ip.ttl -= 1;
  }
  seg.ip.header_checksum = compute_ip_checksum(seg.ip);
  push(t + Micros{topo_.hop_latency.count() * (st.path_length + 1)}, EventKind::ArriveScanner, target, serialize(seg));
}

void Network::schedule_timer(std::size_t target) {
  auto next = next_timer(endpoints_[target]);
  if (next && timer_at_[target] != next) {
    timer_at_[target] = next;
    push(*next, EventKind::Timer, target, {});
  } else if (!next) {
    timer_at_[target].reset();
  }
}

void Network::emit_endpoint_output(std::size_t target, Micros t, std::vector<Segment> out) {
  const int loc = topo_.targets[target].path_length + 1;
  for (auto& s : out) {
    Bytes b = serialize(s);
    record(t, target, loc, "rev", "send", b);
    reverse(target, t, std::move(s));
  }
  schedule_timer(target);
}

void Network::on_endpoint(std::size_t target, Micros t, const Bytes& frame) {
  const auto& st = topo_.targets[target];
  record(t, target, st.path_length + 1, "fwd", st.blackhole ? "drop" : "deliver", frame);
  if (st.blackhole) return;
  auto r = endpoint_step(st.profile, std::move(endpoints_[target]), parse(frame), t);
  endpoints_[target] = std::move(r.state);
  emit_endpoint_output(target, t, std::move(r.outgoing));
}

void Network::on_timer(std::size_t target, Micros t) {
  if (timer_at_[target] != t) return;  // superseded
  timer_at_[target].reset();
  auto r = endpoint_timers(topo_.targets[target].profile, std::move(endpoints_[target]), t);
  endpoints_[target] = std::move(r.state);
  emit_endpoint_output(target, t, std::move(r.outgoing));
}

std::vector<std::pair<Micros, Bytes>> Network::step() {
  std::vector<std::pair<Micros, Bytes>> delivered;
  if (events_.empty()) return delivered;
  Event ev = events_.top();
  events_.pop();
  switch (ev.kind) {
    case EventKind::ArriveEndpoint:
      on_endpoint(ev.target, ev.time, ev.frame);
      break;
    case EventKind::ArriveScanner:
      record(ev.time, ev.target, 0, "rev", "deliver", ev.frame);
      delivered.emplace_back(ev.time, std::move(ev.frame));
      break;
    case EventKind::Timer:
      on_timer(ev.target, ev.time);
      break;
  }
  return delivered;
}

std::vector<TranscriptEntry> run_script(const Topology& topo, std::span<const ScriptEntry> script) {
  Network net(topo, true);
  Micros last{0};
  for (std::size_t i = 0; i < script.size(); ++i) {
    const auto& e = script[i];
    if (e.at < last) throw Error(Errc::ScriptError, "entry " + std::to_string(i) + " goes back in time");
    last = e.at;
    const Ipv4Addr endpoint = e.direction == ScriptDirection::ToEndpoint ? e.segment.ip.destination
                                                                         : e.segment.ip.source;
    if (!net.has_route(endpoint))
      throw Error(Errc::ScriptError, "entry " + std::to_string(i) + " names unknown endpoint " + endpoint.to_string());
  }
  std::size_t next = 0;
  for (;;) {
    auto ev = net.next_event_time();
    if (next < script.size() && (!ev || script[next].at <= *ev)) {
      const auto& e = script[next++];
      if (e.direction == ScriptDirection::ToEndpoint)
        net.inject(e.at, serialize(e.segment));
      else
        net.inject_from_endpoint(e.at, serialize(e.segment));
      continue;
    }
    if (!ev) break;
    net.step();
  }
  auto out = net.transcript();
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  return out;
}

}  // namespace tcpconf::netsim
