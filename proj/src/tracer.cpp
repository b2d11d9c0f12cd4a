#include "tcpconf/tracer.hpp"

#include <algorithm>
#include <array>
#include <map>

#include "tcpconf/error.hpp"

namespace tcpconf {

std::string to_string(CarrierSet set) {
  static constexpr std::array<std::pair<Carrier, const char*>, 5> kNames{{
      {Carrier::IpId, "ip_id"},
      {Carrier::AckNum, "ack"},
      {Carrier::Window, "window"},
      {Carrier::UrgentPtr, "urgent_pointer"},
      {Carrier::NoopCount, "noop_count"},
  }};
  std::string out;
  for (const auto& [c, name] : kNames) {
    if (!set.contains(c)) continue;
    if (!out.empty()) out += ',';
    out += name;
  }
  return out;
}

namespace {

void check_range(int value) {
  if (value < 1 || value > kMaxFanTtl) {
    throw Error(Errc::ValueOutOfRange, "TTL value " + std::to_string(value) + " outside 1..30");
  }
}

struct Copies {
  std::vector<int> values;
  bool consistent = true;
};

Copies unpack(std::uint32_t field, int copies, int width) {
  Copies c;
  for (int i = copies - 1; i >= 0; --i) c.values.push_back(static_cast<int>((field >> (5 * i)) & 0x1f));
  const std::uint32_t leftover = width == 32 ? field >> 30 : (field >> 15) & 0x1;
  c.consistent = leftover == 0;
  for (int v : c.values) {
    if (v != c.values.front() || v < 1 || v > kMaxFanTtl) c.consistent = false;
  }
  return c;
}

int count_noops(const std::vector<TcpOption>& options) {
  return static_cast<int>(std::count_if(options.begin(), options.end(),
                                        [](const TcpOption& o) { return o.kind == option_kind::kNoop; }));
}

std::string hex16(std::uint16_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 12; shift >= 0; shift -= 4) s.push_back(kDigits[(v >> shift) & 0xf]);
  return s;
}

Bytes padded_options(const std::vector<TcpOption>& options) {
  Segment tmp;
  tmp.tcp.options = options;
  Bytes wire = serialize(tmp);
  return Bytes(wire.begin() + kIpv4HeaderLen + kTcpHeaderLen, wire.end());
}

}  // namespace

std::uint16_t pack_ttl16(int value) {
  check_range(value);
  const auto v = static_cast<std::uint16_t>(value);
  return static_cast<std::uint16_t>((v << 10) | (v << 5) | v);
}

std::uint32_t pack_ttl32(int value) {
  check_range(value);
  std::uint32_t out = 0;
  for (int i = 0; i < 6; ++i) out |= static_cast<std::uint32_t>(value) << (5 * i);
  return out;
}

TtlFields encode_ttl(int value, CarrierSet carriers) {
  check_range(value);
  TtlFields f;
  if (carriers.contains(Carrier::IpId)) f.ip_id = pack_ttl16(value);
  if (carriers.contains(Carrier::AckNum)) f.ack = pack_ttl32(value);
  if (carriers.contains(Carrier::Window)) f.window = pack_ttl16(value);
  if (carriers.contains(Carrier::UrgentPtr)) f.urgent_pointer = pack_ttl16(value);
  if (carriers.contains(Carrier::NoopCount)) f.noop_count = value;
  return f;
}

void apply_ttl_encoding(Segment& seg, int value, CarrierSet carriers) {
  const TtlFields f = encode_ttl(value, carriers);
  if (f.ip_id) seg.ip.identification = *f.ip_id;
  if (f.ack) seg.tcp.ack = *f.ack;
  if (f.window) seg.tcp.window = *f.window;
  if (f.urgent_pointer) seg.tcp.urgent_pointer = *f.urgent_pointer;
  if (f.noop_count > 0) {
    seg.tcp.options.insert(seg.tcp.options.begin(), static_cast<std::size_t>(f.noop_count), TcpOption::noop());
  }
}

TtlDecode decode_ttl(const QuotedSegment& q, CarrierSet carriers) {
  std::vector<Copies> found;
  const auto& s = q.segment;
  if (carriers.contains(Carrier::IpId)) found.push_back(unpack(s.ip.identification, 3, 16));
  if (carriers.contains(Carrier::AckNum) && q.has(Field::Ack)) found.push_back(unpack(s.tcp.ack, 6, 32));
  if (carriers.contains(Carrier::Window) && q.has(Field::Window)) found.push_back(unpack(s.tcp.window, 3, 16));
  if (carriers.contains(Carrier::UrgentPtr) && q.has(Field::UrgentPointer)) {
    found.push_back(unpack(s.tcp.urgent_pointer, 3, 16));
  }
  if (carriers.contains(Carrier::NoopCount) && q.has(Field::Options)) {
    const int n = count_noops(s.tcp.options);
    found.push_back(Copies{{n}, n >= 1 && n <= kMaxFanTtl});
  }
  if (found.empty()) throw Error(Errc::NoCarrierAvailable, "no TTL carrier present in quote");

  std::map<int, int> votes;
  int voting = 0;
  TtlDecode out;
  for (const auto& c : found) {
    out.total += static_cast<int>(c.values.size());
    if (!c.consistent) continue;
    votes[c.values.front()] += static_cast<int>(c.values.size());
    voting += static_cast<int>(c.values.size());
  }
  for (const auto& [value, count] : votes) {
    if (2 * count > voting) {
      out.value = value;
      out.agreeing = count;
    }
  }
  out.confidence = out.total > 0 ? static_cast<double>(out.agreeing) / out.total : 0.0;
  return out;
}

std::vector<Segment> build_fan(const Segment& base, CarrierSet carriers, int max_ttl) {
  const bool valid_checksum = verify_tcp_checksum(base);
  std::vector<Segment> fan;
  fan.reserve(static_cast<std::size_t>(std::max(max_ttl, 0)));
  for (int k = 1; k <= max_ttl; ++k) {
    Segment copy = base;
    copy.ip.ttl = static_cast<std::uint8_t>(k);
    apply_ttl_encoding(copy, k, carriers);
    update_lengths(copy);
    copy.ip.header_checksum = compute_ip_checksum(copy.ip);
    if (valid_checksum) copy.tcp.checksum = compute_tcp_checksum(copy);
    fan.push_back(std::move(copy));
  }
  return fan;
}

std::vector<FieldDiff> diff_fields(const Segment& sent, const QuotedSegment& q) {
  std::vector<FieldDiff> diffs;
  const auto& o = q.segment;
  auto check = [&](Field f, auto a, auto b) {
    if (!q.has(f) || a == b) return;
    diffs.push_back({f, std::to_string(a), std::to_string(b)});
  };
  check(Field::IpTos, unsigned{sent.ip.tos}, unsigned{o.ip.tos});
  check(Field::IpId, unsigned{sent.ip.identification}, unsigned{o.ip.identification});
  check(Field::SrcPort, unsigned{sent.tcp.source_port}, unsigned{o.tcp.source_port});
  check(Field::DstPort, unsigned{sent.tcp.dest_port}, unsigned{o.tcp.dest_port});
  check(Field::Seq, sent.tcp.seq, o.tcp.seq);
  check(Field::Ack, sent.tcp.ack, o.tcp.ack);
  check(Field::Reserved, unsigned{sent.tcp.reserved}, unsigned{o.tcp.reserved});
  check(Field::Flags, unsigned{sent.tcp.flags}, unsigned{o.tcp.flags});
  check(Field::Urg, unsigned{sent.tcp.has(tcp_flag::kUrg)}, unsigned{o.tcp.has(tcp_flag::kUrg)});
  check(Field::Window, unsigned{sent.tcp.window}, unsigned{o.tcp.window});
  if (q.has(Field::Checksum) && sent.tcp.checksum != o.tcp.checksum) {
    diffs.push_back({Field::Checksum, hex16(sent.tcp.checksum), hex16(o.tcp.checksum)});
  }
  if (q.has(Field::ChecksumValid) && q.checksum_valid) {
    const bool sent_valid = verify_tcp_checksum(sent);
    if (sent_valid != *q.checksum_valid) {
      diffs.push_back({Field::ChecksumValid, sent_valid ? "true" : "false", *q.checksum_valid ? "true" : "false"});
    }
  }
  check(Field::UrgentPointer, unsigned{sent.tcp.urgent_pointer}, unsigned{o.tcp.urgent_pointer});
  if (q.has(Field::Options)) {
    const Bytes sent_opts = padded_options(sent.tcp.options);
    if (sent_opts != q.option_bytes) diffs.push_back({Field::Options, to_hex(sent_opts), to_hex(q.option_bytes)});
  }
  if (q.has(Field::Mss)) {
    auto show = [](std::optional<std::uint16_t> v) { return v ? std::to_string(*v) : std::string("absent"); };
    const auto a = sent.tcp.mss();
    const auto b = o.tcp.mss();
    if (a != b) diffs.push_back({Field::Mss, show(a), show(b)});
  }
  if (q.has(Field::Payload) && sent.payload != o.payload) {
    diffs.push_back({Field::Payload, to_hex(sent.payload), to_hex(o.payload)});
  }
  return diffs;
}

std::optional<PathObservation> observe(const IcmpTimeExceeded& icmp, std::span<const Segment> fan,
                                       CarrierSet carriers) {
  TtlDecode d;
  try {
    d = decode_ttl(icmp.quote, carriers);
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!d.value || *d.value > static_cast<int>(fan.size())) return std::nullopt;
  PathObservation obs;
  obs.hop = *d.value;
  obs.router = icmp.router;
  obs.quoted = icmp.quote;
  obs.confidence = d.confidence;
  obs.diffs = diff_fields(fan[static_cast<std::size_t>(obs.hop - 1)], icmp.quote);
  return obs;
}

PathDiagnosis diagnose(std::span<const PathObservation> observations, std::span<const Field> relevant) {
  PathDiagnosis out;
  out.relevant_fields.assign(relevant.begin(), relevant.end());
  for (const auto& obs : observations) {
    for (const auto& d : obs.diffs) {
      if (std::find(relevant.begin(), relevant.end(), d.field) == relevant.end()) continue;
      out.modified = true;
      out.evidence.emplace_back(obs.hop, d);
      if (!out.first_modifying_hop || obs.hop < *out.first_modifying_hop) out.first_modifying_hop = obs.hop;
    }
  }
  std::stable_sort(out.evidence.begin(), out.evidence.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  return out;
}

}  // namespace tcpconf
