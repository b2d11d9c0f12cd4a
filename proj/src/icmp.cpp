#include "tcpconf/icmp.hpp"

#include "tcpconf/checksum.hpp"
#include "tcpconf/error.hpp"

namespace tcpconf {

IcmpTimeExceeded parse_icmp_time_exceeded(ByteView pkt) {
  if (pkt.size() < kIpv4HeaderLen) throw Error(Errc::Truncated, "short IPv4 header");
  if ((pkt[0] >> 4) != 4) throw Error(Errc::BadIpVersion, "outer header is not IPv4");
  const std::size_t ihl = std::size_t{pkt[0] & 0x0fu} * 4;
  if (ihl < kIpv4HeaderLen || pkt.size() < ihl + 8) throw Error(Errc::Truncated, "short ICMP header");
  if (pkt[9] != kProtoIcmp) throw Error(Errc::NotTimeExceeded, "protocol " + std::to_string(pkt[9]));
  const std::uint8_t type = pkt[ihl];
  const std::uint8_t code = pkt[ihl + 1];
  if (type != kIcmpTimeExceeded || code != 0) {
    throw Error(Errc::NotTimeExceeded, "type " + std::to_string(type) + " code " + std::to_string(code));
  }
  std::size_t end = load_be16(pkt, 2);
  if (end > pkt.size() || end < ihl + 8) end = pkt.size();
  const ByteView quote = pkt.subspan(ihl + 8, end - ihl - 8);
  if (quote.size() < kMinQuoteLen) {
    throw Error(Errc::TruncatedQuote, std::to_string(quote.size()) + " quoted bytes");
  }
  IcmpTimeExceeded out;
  out.router = Ipv4Addr{load_be32(pkt, 12)};
  out.quote = parse_partial(quote);
  return out;
}

Bytes build_icmp_time_exceeded(Ipv4Addr router, Ipv4Addr destination, ByteView quoted,
                               std::uint16_t ip_id) {
  Bytes out(kIpv4HeaderLen + 8 + quoted.size(), 0);
  out[0] = 0x45;
  store_be16(out, 2, static_cast<std::uint16_t>(out.size()));
  store_be16(out, 4, ip_id);
  out[8] = 64;
  out[9] = kProtoIcmp;
  store_be32(out, 12, router.value);
  store_be32(out, 16, destination.value);
  store_be16(out, 10, internet_checksum(ByteView(out).first(kIpv4HeaderLen)));
  out[kIpv4HeaderLen] = kIcmpTimeExceeded;
  std::copy(quoted.begin(), quoted.end(), out.begin() + kIpv4HeaderLen + 8);
  store_be16(out, kIpv4HeaderLen + 2, internet_checksum(ByteView(out).subspan(kIpv4HeaderLen)));
  return out;
}

}  // namespace tcpconf
