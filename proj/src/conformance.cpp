#include "tcpconf/conformance.hpp"

#include <algorithm>
#include <functional>

#include "tcpconf/error.hpp"

namespace tcpconf {

namespace {

using nlohmann::json;

// One transport session whose traffic is appended to an exchange under a stage name.
class Session {
 public:
  Session(Transport& tr, PortAllocator& ports, ProbeExchange& ex, std::string stage, const Endpoint& remote,
          std::optional<CarrierSet> fan)
      : tr_(tr), ports_(ports), ex_(ex), stage_(std::move(stage)) {
    local_ = Endpoint{tr.local_address(), ports.acquire()};
    remote_ = remote;
    try {
      handle_ = tr.open_session(local_, remote_);
    } catch (...) {
      ports.release(local_.port);
      throw;
    }
    ex_.stages.push_back(Stage{stage_, local_, remote_, fan});
  }
  ~Session() {
    tr_.close_session(handle_);
    ports_.release(local_.port);
  }
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const Endpoint& local() const { return local_; }
  Micros now() const { return tr_.now(); }

  // Later frames on this session are filed under a new stage name.
  void restage(std::string name) {
    stage_ = std::move(name);
    ex_.stages.push_back(Stage{stage_, local_, remote_, std::nullopt});
  }

  Micros send(const Segment& seg, const std::string& role) {
    const Micros at = tr_.send(handle_, seg);
    ex_.frames.push_back(Frame{at, Direction::Out, stage_, role, serialize(seg)});
    return at;
  }

  // Next TCP segment within `budget`; ICMP arriving meanwhile is recorded.
  std::optional<Segment> next_tcp(Micros budget) {
    const Micros end = tr_.now() + budget;
    for (;;) {
      const Micros left = end - tr_.now();
      if (left <= Micros{0}) return std::nullopt;
      ChannelEvent ev = tr_.next_event(handle_, left);
      if (ev.kind == EventKind::Timeout) return std::nullopt;
      const bool tcp = ev.kind == EventKind::TcpIn;
      ex_.frames.push_back(Frame{ev.time, Direction::In, stage_, tcp ? "tcp" : "icmp", std::move(ev.raw)});
      if (tcp) return std::move(ev.segment);
    }
  }

  // Records everything until `quiet` passes without an event or `cap` elapses.
  void drain(Micros quiet, Micros cap) {
    const Micros end = tr_.now() + cap;
    for (;;) {
      const Micros left = end - tr_.now();
      if (left <= Micros{0}) return;
      ChannelEvent ev = tr_.next_event(handle_, std::min(quiet, left));
      if (ev.kind == EventKind::Timeout) return;
      ex_.frames.push_back(Frame{ev.time, Direction::In, stage_,
                                 ev.kind == EventKind::TcpIn ? "tcp" : "icmp", std::move(ev.raw)});
    }
  }

 private:
  Transport& tr_;
  PortAllocator& ports_;
  ProbeExchange& ex_;
  std::string stage_;
  Endpoint local_;
  Endpoint remote_;
  SessionHandle handle_;
};

struct Handshake {
  std::optional<Segment> synack;
  bool reset = false;
};

Handshake await_handshake(Session& s, std::uint32_t iss, Micros deadline) {
  Handshake h;
  const Micros end = s.now() + deadline;
  for (;;) {
    auto seg = s.next_tcp(end - s.now());
    if (!seg) return h;
    if (seg->tcp.has(tcp_flag::kRst)) {
      h.reset = true;
      return h;
    }
    if (seg->tcp.has(tcp_flag::kSyn | tcp_flag::kAck) && seg->tcp.ack == iss + 1) {
      h.synack = std::move(*seg);
      return h;
    }
  }
}

class TestContext {
 public:
  TestContext(Transport& tr, const SuiteConfig& cfg, PortAllocator& ports, TestId test, const Endpoint& target,
              std::string host)
      : tr_(tr), cfg_(cfg), ports_(ports), test_(test), target_(target), host_(std::move(host)),
        rng_(mix64(cfg.seed ^ mix64((std::uint64_t{target.addr.value} << 16) | target.port) ^
                   (static_cast<std::uint64_t>(test) + 1) * 0x9e3779b97f4a7c15ULL)) {
    ex_.test = to_string(test);
    ex_.target = target;
  }

  ProbeExchange& exchange() { return ex_; }

  std::unique_ptr<Session> open(const std::string& stage, bool fanned) {
    std::optional<CarrierSet> carriers;
    if (fanned && cfg_.fan) carriers = fan_carriers(test_);
    return std::make_unique<Session>(tr_, ports_, ex_, stage, target_, carriers);
  }

  Segment make(const Session& s, std::uint8_t flags, std::uint32_t seq, std::uint32_t ack) {
    Segment seg;
    seg.ip.source = s.local().addr;
    seg.ip.destination = target_.addr;
    seg.ip.identification = rng_.next16();
    seg.tcp.source_port = s.local().port;
    seg.tcp.dest_port = target_.port;
    seg.tcp.seq = seq;
    seg.tcp.ack = ack;
    seg.tcp.flags = flags;
    return seg;
  }

  std::uint32_t fresh_iss() { return rng_.next32(); }
  Rng& rng() { return rng_; }

  void send_with_fan(Session& s, const Segment& base, const std::function<void(Segment&)>& adjust = {}) {
    s.send(base, "probe");
    send_fan_copies(s, base, adjust);
  }

  void send_fan_copies(Session& s, const Segment& base, const std::function<void(Segment&)>& adjust = {}) {
    if (!cfg_.fan) return;
    for (auto& copy : build_fan(base, fan_carriers(test_), cfg_.max_ttl)) {
      if (adjust) adjust(copy);
      s.send(copy, "fan");
    }
  }

  void reset(Session& s, std::uint32_t seq) {
    Segment rst = make(s, tcp_flag::kRst, seq, 0);
    finalize(rst);
    s.send(rst, "rst");
  }

  // Sends the handshake-completing ACK.
  Segment complete(Session& s, std::uint32_t iss, const Segment& synack, std::uint8_t reserved = 0) {
    Segment ack = make(s, tcp_flag::kAck, iss + 1, synack.tcp.seq + 1);
    ack.tcp.reserved = reserved;
    finalize(ack);
    s.send(ack, "ack");
    return ack;
  }

  // Collects the target's response, acknowledging in-order data. Ends on RST, on
  // `quiesce` of silence after data, or when nothing arrives within `deadline`.
  void collect(Session& s, std::uint32_t our_seq, std::uint32_t their_next,
               const std::function<bool(const Segment&)>& satisfied = {}) {
    bool seen = false;
    const Micros cap = tr_.now() + cfg_.deadline * 4;
    while (tr_.now() < cap) {
      auto seg = s.next_tcp(seen ? cfg_.quiesce : cfg_.deadline);
      if (!seg) break;
      if (seg->tcp.has(tcp_flag::kRst)) break;
      if (satisfied && satisfied(*seg)) seen = true;
      const auto len = static_cast<std::uint32_t>(seg->payload.size());
      bool advance = false;
      if (len > 0) {
        seen = true;
        if (seg->tcp.seq == their_next) {
          their_next += len;
          advance = true;
        }
      }
      if (seg->tcp.has(tcp_flag::kFin) && seg->tcp.seq + len == their_next) {
        their_next += 1;
        advance = true;
      }
      if (advance) {
        Segment ack = make(s, tcp_flag::kAck, our_seq, their_next);
        finalize(ack);
        s.send(ack, "ack");
      }
    }
    last_their_next_ = their_next;
  }

  std::uint32_t last_their_next() const { return last_their_next_; }

  const SuiteConfig& cfg() const { return cfg_; }
  const Endpoint& target() const { return target_; }
  const std::string& host() const { return host_; }
  Transport& transport() { return tr_; }

 private:
  Transport& tr_;
  const SuiteConfig& cfg_;
  PortAllocator& ports_;
  TestId test_;
  Endpoint target_;
  std::string host_;
  Rng rng_;
  ProbeExchange ex_;
  std::uint32_t last_their_next_ = 0;
};

std::uint16_t random_bad_checksum(Rng& rng, std::uint16_t correct) {
  for (;;) {
    const std::uint16_t v = rng.next16();
    if (v != correct && v != 0) return v;
  }
}

void run_checksum(TestContext& ctx, bool zero) {
  const auto& cfg = ctx.cfg();
  auto& ex = ctx.exchange();
  ex.params["mode"] = zero ? "ZERO" : "INCORRECT";

  auto corrupt = [&](Segment& seg) {
    seg.tcp.checksum = zero ? 0 : random_bad_checksum(ctx.rng(), compute_tcp_checksum(seg));
  };
  {
    auto s = ctx.open("syn", true);
    Segment syn;
    std::vector<Segment> fan;
    for (;;) {
      syn = ctx.make(*s, tcp_flag::kSyn, ctx.fresh_iss(), 0);
      finalize(syn);
      corrupt(syn);
      fan = cfg.fan ? build_fan(syn, fan_carriers(TestId::ChecksumZero), cfg.max_ttl) : std::vector<Segment>{};
      for (auto& c : fan) corrupt(c);
      // a zero field verifies when the true sum is zero; pick another ISS then
      const bool all_bad = !verify_tcp_checksum(syn) &&
                           std::none_of(fan.begin(), fan.end(), [](const Segment& c) { return verify_tcp_checksum(c); });
      if (all_bad) break;
    }
    s->send(syn, "probe");
    for (const auto& c : fan) s->send(c, "fan");
    auto hs = await_handshake(*s, syn.tcp.seq, cfg.deadline);
    s->drain(cfg.settle, cfg.deadline);
    if (hs.synack) ctx.reset(*s, syn.tcp.seq + 1);
  }
  {
    auto s = ctx.open("ack", false);
    Segment syn = ctx.make(*s, tcp_flag::kSyn, ctx.fresh_iss(), 0);
    finalize(syn);
    s->send(syn, "probe");
    auto hs = await_handshake(*s, syn.tcp.seq, cfg.deadline);
    if (!hs.synack) return;
    s->drain(cfg.settle, cfg.deadline);
    ctx.complete(*s, syn.tcp.seq, *hs.synack);
    Segment data = ctx.make(*s, tcp_flag::kAck | tcp_flag::kPsh, syn.tcp.seq + 1, hs.synack->tcp.seq + 1);
    data.payload = elicitor(ctx.target(), ctx.host());
    for (;;) {
      finalize(data);
      corrupt(data);
      if (!verify_tcp_checksum(data)) break;
      data.tcp.window -= 1;
    }
    s->send(data, "elicitor");
    s->drain(cfg.deadline, cfg.deadline);
    ctx.reset(*s, syn.tcp.seq + 1);
  }
}

void run_option(TestContext& ctx, std::vector<TcpOption> options) {
  const auto& cfg = ctx.cfg();
  auto s = ctx.open("syn", true);
  Segment syn = ctx.make(*s, tcp_flag::kSyn, ctx.fresh_iss(), 0);
  syn.tcp.options = std::move(options);
  finalize(syn);
  ctx.send_with_fan(*s, syn);
  auto hs = await_handshake(*s, syn.tcp.seq, cfg.deadline);
  s->drain(cfg.settle, cfg.deadline);
  if (hs.synack) ctx.reset(*s, syn.tcp.seq + 1);
}

void run_mss(TestContext& ctx, std::optional<std::uint16_t> mss) {
  const auto& cfg = ctx.cfg();
  auto& ex = ctx.exchange();
  ex.params["mss_limit"] = std::to_string(mss ? *mss : cfg.mss_default_limit);
  auto s = ctx.open("main", true);
  Segment syn = ctx.make(*s, tcp_flag::kSyn, ctx.fresh_iss(), 0);
  if (mss) syn.tcp.options.push_back(TcpOption::mss(*mss));
  finalize(syn);
  ctx.send_with_fan(*s, syn);
  auto hs = await_handshake(*s, syn.tcp.seq, cfg.deadline);
  s->drain(cfg.settle, cfg.deadline);
  if (!hs.synack) return;
  const std::uint32_t iss = syn.tcp.seq;
  ctx.complete(*s, iss, *hs.synack);
  Segment data = ctx.make(*s, tcp_flag::kAck | tcp_flag::kPsh, iss + 1, hs.synack->tcp.seq + 1);
  data.payload = elicitor(ctx.target(), ctx.host());
  finalize(data);
  s->send(data, "elicitor");
  const auto our_next = iss + 1 + static_cast<std::uint32_t>(data.payload.size());
  ctx.collect(*s, our_next, hs.synack->tcp.seq + 1);
  ctx.reset(*s, our_next);
}

void run_reserved(TestContext& ctx) {
  const auto& cfg = ctx.cfg();
  auto& ex = ctx.exchange();
  ex.params["reserved_mask"] = std::to_string(cfg.reserved_mask);
  auto s = ctx.open("main", true);
  Segment syn = ctx.make(*s, tcp_flag::kSyn, ctx.fresh_iss(), 0);
  syn.tcp.reserved = cfg.reserved_mask;
  finalize(syn);
  ctx.send_with_fan(*s, syn);
  auto hs = await_handshake(*s, syn.tcp.seq, cfg.deadline);
  s->drain(cfg.settle, cfg.deadline);
  if (!hs.synack) return;
  const std::uint32_t iss = syn.tcp.seq;
  ctx.complete(*s, iss, *hs.synack, cfg.reserved_mask);
  s->drain(cfg.reserved_window, cfg.reserved_window);
  std::uint32_t our_next = iss + 1;
  if (cfg.disambiguate_defer_accept) {
    Segment probe = ctx.make(*s, tcp_flag::kAck | tcp_flag::kPsh, iss + 1, hs.synack->tcp.seq + 1);
    probe.payload = {elicitor(ctx.target(), ctx.host()).front()};
    finalize(probe);
    s->send(probe, "disambiguate");
    our_next += 1;
    s->drain(cfg.quiesce, cfg.deadline);
  }
  ctx.reset(*s, our_next);
}

void run_urgent(TestContext& ctx) {
  const auto& cfg = ctx.cfg();
  auto& ex = ctx.exchange();
  ex.params["urgent_total"] = std::to_string(cfg.urgent_total);
  ex.params["urgent_segments"] = std::to_string(cfg.urgent_segments);
  auto s = ctx.open("main", true);
  Segment syn = ctx.make(*s, tcp_flag::kSyn, ctx.fresh_iss(), 0);
  finalize(syn);
  s->send(syn, "probe");
  auto hs = await_handshake(*s, syn.tcp.seq, cfg.deadline);
  s->drain(cfg.settle, cfg.deadline);
  if (!hs.synack) return;
  const std::uint32_t iss = syn.tcp.seq;
  const std::uint32_t their = hs.synack->tcp.seq + 1;
  ctx.complete(*s, iss, *hs.synack);

  const Bytes payload = elicitor(ctx.target(), ctx.host(), cfg.urgent_total);
  const std::uint32_t urgent_end = iss + 1 + static_cast<std::uint32_t>(cfg.urgent_total);
  const auto n = static_cast<std::size_t>(cfg.urgent_segments);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = cfg.urgent_total / n + (i < cfg.urgent_total % n ? 1 : 0);
    Segment seg = ctx.make(*s, tcp_flag::kAck | tcp_flag::kUrg, iss + 1 + static_cast<std::uint32_t>(offset), their);
    if (i + 1 == n) seg.tcp.flags |= tcp_flag::kPsh;
    seg.tcp.urgent_pointer = static_cast<std::uint16_t>(urgent_end - seg.tcp.seq);
    seg.payload.assign(payload.begin() + static_cast<std::ptrdiff_t>(offset),
                       payload.begin() + static_cast<std::ptrdiff_t>(offset + len));
    finalize(seg);
    s->send(seg, "urgent");
    if (i == 0) ctx.send_fan_copies(*s, seg);
    offset += len;
  }
  ctx.collect(*s, urgent_end, their, [&](const Segment& in) {
    return in.tcp.has(tcp_flag::kAck) && static_cast<std::int32_t>(in.tcp.ack - urgent_end) >= 0;
  });

  {
    auto post = ctx.open("post", false);
    Segment probe = ctx.make(*post, tcp_flag::kSyn, ctx.fresh_iss(), 0);
    finalize(probe);
    post->send(probe, "probe");
    auto phs = await_handshake(*post, probe.tcp.seq, cfg.deadline);
    if (phs.synack) ctx.reset(*post, probe.tcp.seq + 1);
  }
  s->restage("old");
  Segment old = ctx.make(*s, tcp_flag::kAck, urgent_end, ctx.last_their_next());
  finalize(old);
  s->send(old, "probe");
  auto reply = s->next_tcp(cfg.deadline);
  if (!reply || !reply->tcp.has(tcp_flag::kRst)) ctx.reset(*s, urgent_end);
}

Bytes http_request(const std::string& host, std::size_t pad_to) {
  std::string head = "GET / HTTP/1.1\r\nHost: " + host + "\r\nUser-Agent: tcpconf\r\nAccept: */*\r\n";
  std::string req = head + "\r\n";
  if (pad_to > 0) {
    const std::string prefix = "X-Padding: ";
    const std::size_t overhead = req.size() + prefix.size() + 2;
    if (pad_to < overhead) throw Error(Errc::ValueOutOfRange, "elicitor cannot be padded to " + std::to_string(pad_to));
    req = head + prefix + std::string(pad_to - overhead, 'x') + "\r\n\r\n";
  }
  return Bytes(req.begin(), req.end());
}

void put16(Bytes& b, std::size_t v) {
  b.push_back(static_cast<std::uint8_t>(v >> 8));
  b.push_back(static_cast<std::uint8_t>(v));
}

Bytes tls_client_hello(const std::string& host, std::size_t pad_to) {
  Bytes body{0x03, 0x03};
  for (int i = 0; i < 32; ++i) body.push_back(static_cast<std::uint8_t>(i * 7 + 1));
  body.push_back(0x00);  // no session id
  const std::uint16_t suites[] = {0x1301, 0x1302, 0xc02f, 0xc030, 0x009c, 0x002f};
  put16(body, sizeof(suites));
  for (auto c : suites) put16(body, c);
  body.push_back(0x01);
  body.push_back(0x00);

  Bytes ext;
  if (!Ipv4Addr::parse(host) && !host.empty()) {
    put16(ext, 0x0000);
    put16(ext, host.size() + 5);
    put16(ext, host.size() + 3);
    ext.push_back(0x00);
    put16(ext, host.size());
    ext.insert(ext.end(), host.begin(), host.end());
  }
  for (std::uint16_t v : {0x000a, 0x0004, 0x0002, 0x001d}) put16(ext, v);  // supported_groups: x25519
  for (std::uint16_t v : {0x000d, 0x0004, 0x0002, 0x0804}) put16(ext, v);  // signature_algorithms
  for (std::uint16_t v : {0x002b, 0x0003}) put16(ext, v);                  // supported_versions: TLS 1.3
  ext.push_back(0x02);
  put16(ext, 0x0304);

  // record(5) + handshake(4) + body + extensions length(2) + extensions
  const std::size_t fixed = 5 + 4 + body.size() + 2;
  if (pad_to > 0) {
    if (pad_to < fixed + ext.size() + 4)
      throw Error(Errc::ValueOutOfRange, "ClientHello cannot be padded to " + std::to_string(pad_to));
    const std::size_t n = pad_to - fixed - ext.size() - 4;
    put16(ext, 0x0015);
    put16(ext, n);
    ext.insert(ext.end(), n, 0x00);
  }
  put16(body, ext.size());
  body.insert(body.end(), ext.begin(), ext.end());

  Bytes hs{0x01, 0x00};
  put16(hs, body.size());
  hs.insert(hs.end(), body.begin(), body.end());
  Bytes rec{0x16, 0x03, 0x01};
  put16(rec, hs.size());
  rec.insert(rec.end(), hs.begin(), hs.end());
  return rec;
}

}  // namespace

void validate(const SuiteConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(Errc::ConfigError, what); };
  if (cfg.deadline <= Micros{0} || cfg.quiesce <= Micros{0} || cfg.settle <= Micros{0} ||
      cfg.reserved_window <= Micros{0})
    fail("timeouts must be positive");
  if (cfg.max_ttl < 1 || cfg.max_ttl > kMaxFanTtl) fail("max_ttl must be within 1..30");
  if (cfg.mss_support_value == 0) fail("mss_support_value must be positive");
  if (cfg.urgent_segments < 1 || cfg.urgent_total < static_cast<std::size_t>(cfg.urgent_segments))
    fail("urgent payload must give every segment at least one byte");
  if (cfg.urgent_total > 0xffff) fail("urgent_total must fit the urgent pointer");
  if (cfg.reserved_mask == 0 || cfg.reserved_mask > 0x0f) fail("reserved_mask must be a nonzero 4-bit value");
  if (cfg.unknown_option_kind <= 1) fail("unknown_option_kind must not be EOOL or NOOP");
  if (cfg.tests.empty()) fail("no tests enabled");
}

void apply_suite_overrides(SuiteConfig& cfg, const json& j) {
  try {
    auto micros = [&](const char* key, Micros& field) {
      if (j.contains(key)) field = Micros{j.at(key).get<std::int64_t>()};
    };
    micros("deadline_us", cfg.deadline);
    micros("reserved_window_us", cfg.reserved_window);
    micros("quiesce_us", cfg.quiesce);
    micros("settle_us", cfg.settle);
    if (j.contains("fan")) cfg.fan = j.at("fan").get<bool>();
    if (j.contains("max_ttl")) cfg.max_ttl = j.at("max_ttl").get<int>();
    if (j.contains("mss_support_value")) cfg.mss_support_value = j.at("mss_support_value").get<std::uint16_t>();
    if (j.contains("mss_default_limit")) cfg.mss_default_limit = j.at("mss_default_limit").get<std::uint16_t>();
    if (j.contains("unknown_option_kind")) cfg.unknown_option_kind = j.at("unknown_option_kind").get<std::uint8_t>();
    if (j.contains("urgent_total")) cfg.urgent_total = j.at("urgent_total").get<std::size_t>();
    if (j.contains("urgent_segments")) cfg.urgent_segments = j.at("urgent_segments").get<int>();
    if (j.contains("reserved_mask")) cfg.reserved_mask = j.at("reserved_mask").get<std::uint8_t>();
    if (j.contains("disambiguate_defer_accept"))
      cfg.disambiguate_defer_accept = j.at("disambiguate_defer_accept").get<bool>();
    if (j.contains("tests")) {
      cfg.tests.clear();
      for (const auto& t : j.at("tests")) {
        auto id = test_from_string(t.get<std::string>());
        if (!id) throw Error(Errc::ConfigError, "unknown test '" + t.get<std::string>() + "'");
        cfg.tests.push_back(*id);
      }
    }
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("bad suite parameter: ") + e.what());
  }
  validate(cfg);
}

PortAllocator::PortAllocator(std::uint16_t first, std::uint16_t last) : first_(first), last_(last), next_(first) {
  if (first > last) throw Error(Errc::ConfigError, "empty port range");
}

std::uint16_t PortAllocator::acquire() {
  std::lock_guard lock(mu_);
  const std::size_t span = static_cast<std::size_t>(last_ - first_) + 1;
  for (std::size_t i = 0; i < span; ++i) {
    const std::uint16_t p = next_;
    next_ = next_ == last_ ? first_ : static_cast<std::uint16_t>(next_ + 1);
    if (in_use_.insert(p).second) return p;
  }
  throw Error(Errc::PortInUse, "no free local port");
}

void PortAllocator::release(std::uint16_t port) {
  std::lock_guard lock(mu_);
  in_use_.erase(port);
}

Bytes elicitor(const Endpoint& target, const std::string& host, std::size_t pad_to) {
  const std::string h = host.empty() ? target.addr.to_string() : host;
  return target.port == 443 ? tls_client_hello(h, pad_to) : http_request(h, pad_to);
}

SuiteRunner::SuiteRunner(Transport& transport, SuiteConfig config, PortAllocator& ports)
    : transport_(transport), config_(std::move(config)), ports_(ports) {
  validate(config_);
}

Liveness SuiteRunner::liveness(const Endpoint& target, ProbeExchange* record) {
  ProbeExchange ex;
  ex.test = "Liveness";
  ex.target = target;
  Liveness result = Liveness::Dead;
  {
    Rng rng(mix64(config_.seed ^ mix64((std::uint64_t{target.addr.value} << 16) | target.port)));
    Session s(transport_, ports_, ex, "liveness", target, std::nullopt);
    Segment syn;
    syn.ip.source = s.local().addr;
    syn.ip.destination = target.addr;
    syn.ip.identification = rng.next16();
    syn.tcp.source_port = s.local().port;
    syn.tcp.dest_port = target.port;
    syn.tcp.seq = rng.next32();
    syn.tcp.flags = tcp_flag::kSyn;
    finalize(syn);
    s.send(syn, "probe");
    auto hs = await_handshake(s, syn.tcp.seq, config_.deadline);
    if (hs.synack) {
      result = Liveness::Alive;
      Segment rst = syn;
      rst.tcp.flags = tcp_flag::kRst;
      rst.tcp.seq = syn.tcp.seq + 1;
      finalize(rst);
      s.send(rst, "rst");
    }
  }
  if (record) *record = std::move(ex);
  return result;
}

TestRun SuiteRunner::run_test(TestId test, const Endpoint& target, const std::string& host) {
  TestContext ctx(transport_, config_, ports_, test, target, host);
  TestRun run;
  run.started = transport_.now();
  switch (test) {
    case TestId::ChecksumIncorrect:
      run_checksum(ctx, false);
      break;
    case TestId::ChecksumZero:
      run_checksum(ctx, true);
      break;
    case TestId::OptionSupport:
      run_option(ctx, {TcpOption::noop(), TcpOption::noop(), TcpOption::eool()});
      break;
    case TestId::OptionUnknown:
      run_option(ctx, {TcpOption::unknown(config_.unknown_option_kind, {0xDE, 0xAD})});
      break;
    case TestId::MssSupport:
      run_mss(ctx, config_.mss_support_value);
      break;
    case TestId::MssMissing:
      run_mss(ctx, std::nullopt);
      break;
    case TestId::Reserved:
      run_reserved(ctx);
      break;
    case TestId::UrgentPointer:
      run_urgent(ctx);
      break;
  }
  run.finished = transport_.now();
  run.exchange = std::move(ctx.exchange());
  run.verdict = classify(run.exchange);
  return run;
}

TargetReport SuiteRunner::run_suite(const Endpoint& target, const std::string& host) {
  TargetReport report;
  report.target = target;
  report.liveness = liveness(target, &report.liveness_exchange);
  if (report.liveness == Liveness::Dead) return report;
  // canonical order keeps the crash-prone urgent test last
  std::vector<TestId> order;
  for (auto t : all_tests())
    if (std::find(config_.tests.begin(), config_.tests.end(), t) != config_.tests.end()) order.push_back(t);
  for (auto t : order) report.runs.push_back(run_test(t, target, host));
  return report;
}

}  // namespace tcpconf
