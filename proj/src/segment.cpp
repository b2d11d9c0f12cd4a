#include "tcpconf/segment.hpp"

#include <array>

#include "tcpconf/checksum.hpp"
#include "tcpconf/error.hpp"

namespace tcpconf {

std::optional<std::uint16_t> TcpOption::mss_value() const {
  if (kind != option_kind::kMss || data.size() != 2) return std::nullopt;
  return static_cast<std::uint16_t>((data[0] << 8) | data[1]);
}

std::optional<std::uint16_t> TcpHeader::mss() const {
  for (const auto& opt : options) {
    if (auto v = opt.mss_value()) return v;
  }
  return std::nullopt;
}

std::size_t options_length(const std::vector<TcpOption>& options) {
  std::size_t n = 0;
  for (const auto& opt : options) n += opt.wire_size();
  return n;
}

namespace {

std::size_t padded(std::size_t n) { return (n + 3) & ~std::size_t{3}; }

void check_sizes(const Segment& seg) {
  const std::size_t opt_len = padded(options_length(seg.tcp.options));
  if (opt_len > kMaxOptionBytes) {
    throw Error(Errc::OversizeOptions, std::to_string(opt_len) + " option bytes exceed 40");
  }
  const std::size_t total = kIpv4HeaderLen + kTcpHeaderLen + opt_len + seg.payload.size();
  if (total > 0xffff) {
    throw Error(Errc::OversizePacket, std::to_string(total) + " bytes exceed 65535");
  }
  for (const auto& opt : seg.tcp.options) {
    if (!opt.single_byte() && opt.data.size() > 253) {
      throw Error(Errc::OversizeOptions, "option data too long");
    }
  }
}

void write_ip_header(const Ipv4Header& ip, std::uint16_t total_length, std::uint16_t checksum,
                     std::span<std::uint8_t> out) {
  out[0] = 0x45;
  out[1] = ip.tos;
  store_be16(out, 2, total_length);
  store_be16(out, 4, ip.identification);
  store_be16(out, 6, ip.flags_fragment);
  out[8] = ip.ttl;
  out[9] = ip.protocol;
  store_be16(out, 10, checksum);
  store_be32(out, 12, ip.source.value);
  store_be32(out, 16, ip.destination.value);
}

// TCP header, options and payload with the given checksum value.
Bytes tcp_bytes(const Segment& seg, std::uint16_t checksum) {
  const std::size_t opt_len = padded(options_length(seg.tcp.options));
  const std::size_t hlen = kTcpHeaderLen + opt_len;
  Bytes out(hlen + seg.payload.size(), 0);
  const auto& t = seg.tcp;
  store_be16(out, 0, t.source_port);
  store_be16(out, 2, t.dest_port);
  store_be32(out, 4, t.seq);
  store_be32(out, 8, t.ack);
  out[12] = static_cast<std::uint8_t>(((hlen / 4) << 4) | ((t.reserved & 0x0f)));
  out[13] = t.flags;
  store_be16(out, 14, t.window);
  store_be16(out, 16, checksum);
  store_be16(out, 18, t.urgent_pointer);
  std::size_t at = kTcpHeaderLen;
  for (const auto& opt : t.options) {
    out[at++] = opt.kind;
    if (opt.single_byte()) continue;
    out[at++] = static_cast<std::uint8_t>(2 + opt.data.size());
    for (auto b : opt.data) out[at++] = b;
  }
  // remaining option bytes stay zero (EOOL padding)
  std::copy(seg.payload.begin(), seg.payload.end(), out.begin() + static_cast<std::ptrdiff_t>(hlen));
  return out;
}

struct OptionParse {
  std::vector<TcpOption> options;
  bool malformed = false;
};

OptionParse parse_options(ByteView region) {
  OptionParse result;
  std::size_t i = 0;
  while (i < region.size()) {
    const std::uint8_t kind = region[i];
    if (kind == option_kind::kEool) {
      result.options.push_back(TcpOption::eool());
      break;
    }
    if (kind == option_kind::kNoop) {
      result.options.push_back(TcpOption::noop());
      ++i;
      continue;
    }
    if (i + 1 >= region.size()) {
      result.malformed = true;
      break;
    }
    const std::size_t len = region[i + 1];
    if (len < 2 || i + len > region.size()) {
      result.malformed = true;
      break;
    }
    result.options.push_back(TcpOption::unknown(kind, Bytes(region.begin() + static_cast<std::ptrdiff_t>(i + 2),
                                                             region.begin() + static_cast<std::ptrdiff_t>(i + len))));
    i += len;
  }
  return result;
}

struct IpParse {
  Ipv4Header ip;
  std::size_t header_len = 0;
};

IpParse parse_ip(ByteView bytes) {
  if (bytes.size() < kIpv4HeaderLen) throw Error(Errc::Truncated, "short IPv4 header");
  if ((bytes[0] >> 4) != 4) throw Error(Errc::BadIpVersion, "version " + std::to_string(bytes[0] >> 4));
  IpParse r;
  r.header_len = static_cast<std::size_t>(bytes[0] & 0x0f) * 4;
  if (r.header_len < kIpv4HeaderLen || r.header_len > bytes.size()) {
    throw Error(Errc::Truncated, "bad IPv4 header length");
  }
  r.ip.tos = bytes[1];
  r.ip.total_length = load_be16(bytes, 2);
  r.ip.identification = load_be16(bytes, 4);
  r.ip.flags_fragment = load_be16(bytes, 6);
  r.ip.ttl = bytes[8];
  r.ip.protocol = bytes[9];
  r.ip.header_checksum = load_be16(bytes, 10);
  r.ip.source = Ipv4Addr{load_be32(bytes, 12)};
  r.ip.destination = Ipv4Addr{load_be32(bytes, 16)};
  return r;
}

}  // namespace

void update_lengths(Segment& seg) {
  check_sizes(seg);
  const std::size_t opt_len = padded(options_length(seg.tcp.options));
  seg.tcp.data_offset = static_cast<std::uint8_t>((kTcpHeaderLen + opt_len) / 4);
  seg.ip.total_length =
      static_cast<std::uint16_t>(kIpv4HeaderLen + kTcpHeaderLen + opt_len + seg.payload.size());
}

void finalize(Segment& seg) {
  update_lengths(seg);
  seg.ip.header_checksum = compute_ip_checksum(seg.ip);
  seg.tcp.checksum = compute_tcp_checksum(seg);
}

Bytes serialize(const Segment& seg) {
  check_sizes(seg);
  Bytes tcp = tcp_bytes(seg, seg.tcp.checksum);
  Bytes out(kIpv4HeaderLen + tcp.size());
  write_ip_header(seg.ip, static_cast<std::uint16_t>(out.size()), seg.ip.header_checksum, out);
  std::copy(tcp.begin(), tcp.end(), out.begin() + kIpv4HeaderLen);
  return out;
}

std::uint16_t compute_ip_checksum(const Ipv4Header& ip) {
  std::array<std::uint8_t, kIpv4HeaderLen> hdr{};
  write_ip_header(ip, ip.total_length, 0, hdr);
  return internet_checksum(hdr);
}

std::uint16_t compute_tcp_checksum(const Segment& seg) {
  const Bytes tcp = tcp_bytes(seg, 0);
  const std::uint16_t c = tcp_pseudo_checksum(seg.ip.source, seg.ip.destination, tcp);
  return c == 0 ? 0xffff : c;
}

bool verify_tcp_checksum(const Segment& seg) {
  const Bytes tcp = tcp_bytes(seg, seg.tcp.checksum);
  OnesComplementSum sum;
  sum.add32(seg.ip.source.value).add32(seg.ip.destination.value).add16(kProtoTcp);
  sum.add16(static_cast<std::uint16_t>(tcp.size())).add(tcp);
  return sum.folded() == 0xffff;
}

Segment parse(ByteView bytes) {
  if (bytes.size() < kIpv4HeaderLen + kTcpHeaderLen) {
    throw Error(Errc::Truncated, std::to_string(bytes.size()) + " bytes, need 40");
  }
  const IpParse ipp = parse_ip(bytes);
  const std::size_t total = ipp.ip.total_length;
  if (total > bytes.size() || total < ipp.header_len + kTcpHeaderLen) {
    throw Error(Errc::Truncated, "total length " + std::to_string(total) + " vs " +
                                     std::to_string(bytes.size()) + " bytes");
  }
  Segment seg;
  seg.ip = ipp.ip;
  const ByteView tcp = bytes.subspan(ipp.header_len, total - ipp.header_len);
  auto& t = seg.tcp;
  t.source_port = load_be16(tcp, 0);
  t.dest_port = load_be16(tcp, 2);
  t.seq = load_be32(tcp, 4);
  t.ack = load_be32(tcp, 8);
  t.data_offset = tcp[12] >> 4;
  t.reserved = tcp[12] & 0x0f;
  t.flags = tcp[13];
  t.window = load_be16(tcp, 14);
  t.checksum = load_be16(tcp, 16);
  t.urgent_pointer = load_be16(tcp, 18);
  if (t.data_offset < 5) throw Error(Errc::BadDataOffset, "data offset " + std::to_string(t.data_offset));
  const std::size_t hlen = std::size_t{t.data_offset} * 4;
  if (hlen > tcp.size()) throw Error(Errc::BadDataOffset, "data offset beyond segment end");
  auto opts = parse_options(tcp.subspan(kTcpHeaderLen, hlen - kTcpHeaderLen));
  if (opts.malformed) throw Error(Errc::MalformedOption, "option region not parseable");
  t.options = std::move(opts.options);
  seg.payload.assign(tcp.begin() + static_cast<std::ptrdiff_t>(hlen), tcp.end());
  return seg;
}

QuotedSegment parse_partial(ByteView bytes) {
  const IpParse ipp = parse_ip(bytes);
  if (bytes.size() < ipp.header_len + 8) throw Error(Errc::Truncated, "quote lacks 8 TCP bytes");
  QuotedSegment q;
  q.segment.ip = ipp.ip;
  const std::size_t total = ipp.ip.total_length;
  q.tcp_total_len = total > ipp.header_len ? total - ipp.header_len : 0;
  std::size_t avail = bytes.size() - ipp.header_len;
  if (q.tcp_total_len > 0 && avail > q.tcp_total_len) avail = q.tcp_total_len;
  q.tcp_bytes = avail;
  const ByteView tcp = bytes.subspan(ipp.header_len, avail);
  auto& t = q.segment.tcp;
  t.source_port = load_be16(tcp, 0);
  t.dest_port = load_be16(tcp, 2);
  t.seq = load_be32(tcp, 4);
  t.data_offset = 0;
  if (avail >= 12) t.ack = load_be32(tcp, 8);
  if (avail >= 14) {
    t.data_offset = tcp[12] >> 4;
    t.reserved = tcp[12] & 0x0f;
    t.flags = tcp[13];
  }
  t.window = avail >= 16 ? load_be16(tcp, 14) : 0;
  if (avail >= 18) t.checksum = load_be16(tcp, 16);
  if (avail >= 20) t.urgent_pointer = load_be16(tcp, 18);
  const std::size_t hlen = std::size_t{t.data_offset} * 4;
  if (t.data_offset >= 5 && avail >= hlen) {
    q.tcp_header_len = hlen;
    const ByteView region = tcp.subspan(kTcpHeaderLen, hlen - kTcpHeaderLen);
    q.option_bytes.assign(region.begin(), region.end());
    auto opts = parse_options(region);
    q.options_malformed = opts.malformed;
    t.options = std::move(opts.options);
    q.segment.payload.assign(tcp.begin() + static_cast<std::ptrdiff_t>(hlen), tcp.end());
  }
  if (q.tcp_total_len > 0 && avail >= q.tcp_total_len) {
    OnesComplementSum sum;
    sum.add32(q.segment.ip.source.value).add32(q.segment.ip.destination.value).add16(kProtoTcp);
    sum.add16(static_cast<std::uint16_t>(avail)).add(tcp);
    q.checksum_valid = sum.folded() == 0xffff;
  }
  return q;
}

bool QuotedSegment::has(Field f) const {
  switch (f) {
    case Field::IpTos:
    case Field::IpId:
      return true;
    case Field::SrcPort:
    case Field::DstPort:
    case Field::Seq:
      return tcp_bytes >= 8;
    case Field::Ack:
      return tcp_bytes >= 12;
    case Field::Reserved:
    case Field::Flags:
    case Field::Urg:
      return tcp_bytes >= 14;
    case Field::Window:
      return tcp_bytes >= 16;
    case Field::Checksum:
      return tcp_bytes >= 18;
    case Field::UrgentPointer:
      return tcp_bytes >= 20;
    case Field::Options:
      return tcp_header_len > 0;
    case Field::Mss:
      return tcp_header_len > 0 && !options_malformed;
    case Field::Payload:
    case Field::ChecksumValid:
      return tcp_header_len > 0 && complete();
  }
  return false;
}

namespace {
constexpr std::array<std::pair<Field, std::string_view>, 16> kFieldNames{{
    {Field::IpTos, "ip_tos"},
    {Field::IpId, "ip_id"},
    {Field::SrcPort, "src_port"},
    {Field::DstPort, "dst_port"},
    {Field::Seq, "seq"},
    {Field::Ack, "ack"},
    {Field::Reserved, "reserved"},
    {Field::Flags, "flags"},
    {Field::Urg, "urg"},
    {Field::Window, "window"},
    {Field::Checksum, "checksum"},
    {Field::ChecksumValid, "checksum_valid"},
    {Field::UrgentPointer, "urgent_pointer"},
    {Field::Options, "options"},
    {Field::Mss, "mss"},
    {Field::Payload, "payload"},
}};
}  // namespace

std::string to_string(Field f) {
  for (const auto& [field, name] : kFieldNames) {
    if (field == f) return std::string(name);
  }
  return "unknown";
}

std::optional<Field> field_from_string(std::string_view name) {
  for (const auto& [field, n] : kFieldNames) {
    if (n == name) return field;
  }
  return std::nullopt;
}

}  // namespace tcpconf
