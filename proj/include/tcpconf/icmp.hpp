#pragma once

#include "tcpconf/bytes.hpp"
#include "tcpconf/segment.hpp"

namespace tcpconf {

inline constexpr std::uint8_t kIcmpTimeExceeded = 11;
inline constexpr std::size_t kMinQuoteLen = kIpv4HeaderLen + 8;

struct IcmpTimeExceeded {
  Ipv4Addr router;      // outer source address
  QuotedSegment quote;  // the expired datagram as the router saw it
};

// Parses a full IPv4 datagram carrying ICMP type 11 code 0.
IcmpTimeExceeded parse_icmp_time_exceeded(ByteView ip_packet);

// Builds a complete IPv4/ICMP time-exceeded datagram quoting `quoted` verbatim.
Bytes build_icmp_time_exceeded(Ipv4Addr router, Ipv4Addr destination, ByteView quoted,
                               std::uint16_t ip_id = 0);

}  // namespace tcpconf
