#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tcpconf/bytes.hpp"

namespace tcpconf {

namespace tcp_flag {
inline constexpr std::uint8_t kFin = 0x01;
inline constexpr std::uint8_t kSyn = 0x02;
inline constexpr std::uint8_t kRst = 0x04;
inline constexpr std::uint8_t kPsh = 0x08;
inline constexpr std::uint8_t kAck = 0x10;
inline constexpr std::uint8_t kUrg = 0x20;
inline constexpr std::uint8_t kEce = 0x40;
inline constexpr std::uint8_t kCwr = 0x80;
}  // namespace tcp_flag

namespace option_kind {
inline constexpr std::uint8_t kEool = 0;
inline constexpr std::uint8_t kNoop = 1;
inline constexpr std::uint8_t kMss = 2;
}  // namespace option_kind

inline constexpr std::size_t kIpv4HeaderLen = 20;
inline constexpr std::size_t kTcpHeaderLen = 20;
inline constexpr std::size_t kMaxOptionBytes = 40;
inline constexpr std::uint8_t kProtoTcp = 6;
inline constexpr std::uint8_t kProtoIcmp = 1;

struct Ipv4Header {
  std::uint8_t tos = 0;
  std::uint16_t total_length = 0;
  std::uint16_t identification = 0;
  std::uint16_t flags_fragment = 0;
  std::uint8_t ttl = 64;
  std::uint8_t protocol = kProtoTcp;
  std::uint16_t header_checksum = 0;
  Ipv4Addr source;
  Ipv4Addr destination;

  bool operator==(const Ipv4Header&) const = default;
};

// EOOL (kind 0) and NOOP (kind 1) are single bytes with empty data; every other
// kind is emitted as kind, length, data.
struct TcpOption {
  std::uint8_t kind = option_kind::kNoop;
  Bytes data;

  static TcpOption eool() { return {option_kind::kEool, {}}; }
  static TcpOption noop() { return {option_kind::kNoop, {}}; }
  static TcpOption mss(std::uint16_t value) {
    return {option_kind::kMss, {static_cast<std::uint8_t>(value >> 8), static_cast<std::uint8_t>(value)}};
  }
  static TcpOption unknown(std::uint8_t kind, Bytes data) { return {kind, std::move(data)}; }

  bool single_byte() const { return kind == option_kind::kEool || kind == option_kind::kNoop; }
  std::size_t wire_size() const { return single_byte() ? 1 : 2 + data.size(); }
  std::optional<std::uint16_t> mss_value() const;

  bool operator==(const TcpOption&) const = default;
};

// Reserved bits are numbered 0-3 from the least-significant end of the 4-bit
// field, so bit 0 sits next to CWR. kReservedFlag2 is "reserved flag #2".
inline constexpr std::uint8_t kReservedFlag2 = 0b0100;

struct TcpHeader {
  std::uint16_t source_port = 0;
  std::uint16_t dest_port = 0;
  std::uint32_t seq = 0;
  std::uint32_t ack = 0;
  std::uint8_t data_offset = 5;  // 32-bit words
  std::uint8_t reserved = 0;     // 4 bits
  std::uint8_t flags = 0;
  std::uint16_t window = 65535;
  std::uint16_t checksum = 0;
  std::uint16_t urgent_pointer = 0;
  std::vector<TcpOption> options;

  bool has(std::uint8_t flag) const { return (flags & flag) == flag; }
  std::optional<std::uint16_t> mss() const;

  bool operator==(const TcpHeader&) const = default;
};

struct Segment {
  Ipv4Header ip;
  TcpHeader tcp;
  Bytes payload;

  bool operator==(const Segment&) const = default;
};

// Unpadded byte length of an option list.
std::size_t options_length(const std::vector<TcpOption>& options);

// Sets data_offset and total_length from the current options and payload.
// Checksums are left untouched.
void update_lengths(Segment& seg);

// update_lengths, then fills in correct IPv4 header and TCP checksums.
void finalize(Segment& seg);

// Checksum fields are emitted verbatim so callers can craft invalid ones;
// data_offset and total_length are always derived from content.
Bytes serialize(const Segment& seg);

// Full parse. Requires a complete datagram of at least 40 bytes; bytes past
// total_length are ignored. Option parsing stops after an EOOL, so an option list
// that needed padding and did not end in EOOL reads back with one appended.
Segment parse(ByteView bytes);

std::uint16_t compute_ip_checksum(const Ipv4Header& ip);

// Ones-complement checksum over pseudo-header, TCP header and payload with the
// checksum field taken as zero. A computed 0x0000 is returned as 0xFFFF.
std::uint16_t compute_tcp_checksum(const Segment& seg);
bool verify_tcp_checksum(const Segment& seg);

// Header fields addressable for availability checks and modification diffs.
enum class Field {
  IpTos,
  IpId,
  SrcPort,
  DstPort,
  Seq,
  Ack,
  Reserved,
  Flags,
  Urg,
  Window,
  Checksum,
  ChecksumValid,
  UrgentPointer,
  Options,
  Mss,
  Payload,
};

std::string to_string(Field f);
std::optional<Field> field_from_string(std::string_view name);

// A segment reconstructed from a possibly truncated copy (an ICMP quote). Fields
// outside the quoted bytes are zero/empty and report has() == false.
struct QuotedSegment {
  Segment segment;
  std::size_t tcp_bytes = 0;      // TCP bytes present in the quote
  std::size_t tcp_header_len = 0; // from data offset; 0 when not quoted
  std::size_t tcp_total_len = 0;  // original TCP length from the IPv4 total length
  Bytes option_bytes;             // raw option region, padding included
  bool options_malformed = false; // option region quoted but not parseable
  std::optional<bool> checksum_valid;  // set only for a complete quote

  bool has(Field f) const;
  bool complete() const { return tcp_total_len > 0 && tcp_bytes >= tcp_total_len; }
};

// Partial parse. Requires the IPv4 header plus at least 8 TCP bytes (ports and seq).
QuotedSegment parse_partial(ByteView bytes);

}  // namespace tcpconf
