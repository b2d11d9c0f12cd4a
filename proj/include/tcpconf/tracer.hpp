#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tcpconf/icmp.hpp"
#include "tcpconf/segment.hpp"

namespace tcpconf {

inline constexpr int kMaxFanTtl = 30;

// Header fields that carry the hop count of a fan probe.
enum class Carrier : std::uint8_t {
  IpId = 1 << 0,
  AckNum = 1 << 1,
  Window = 1 << 2,
  UrgentPtr = 1 << 3,
  NoopCount = 1 << 4,
};

class CarrierSet {
 public:
  constexpr CarrierSet() = default;
  constexpr CarrierSet(std::initializer_list<Carrier> list) {
    for (auto c : list) bits_ |= static_cast<std::uint8_t>(c);
  }
  static constexpr CarrierSet from_bits(std::uint8_t bits) {
    CarrierSet s;
    s.bits_ = bits & 0x1f;
    return s;
  }
  static constexpr CarrierSet all() { return from_bits(0x1f); }

  constexpr bool contains(Carrier c) const { return (bits_ & static_cast<std::uint8_t>(c)) != 0; }
  constexpr CarrierSet without(Carrier c) const { return from_bits(bits_ & ~static_cast<std::uint8_t>(c)); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  constexpr bool operator==(const CarrierSet&) const = default;

 private:
  std::uint8_t bits_ = 0;
};

std::string to_string(CarrierSet set);

// A 5-bit value packed three times into 16 bits ([14..10], [9..5], [4..0]) or six
// times into 32 bits ([29..25] .. [4..0]); leftover high bits are zero.
std::uint16_t pack_ttl16(int value);
std::uint32_t pack_ttl32(int value);

struct TtlFields {
  std::optional<std::uint16_t> ip_id;
  std::optional<std::uint32_t> ack;
  std::optional<std::uint16_t> window;
  std::optional<std::uint16_t> urgent_pointer;
  int noop_count = 0;
};

// Throws ValueOutOfRange unless 1 <= value <= 30.
TtlFields encode_ttl(int value, CarrierSet carriers);

// Writes the encoding into a segment. NOOPs go directly after the fixed header,
// ahead of the segment's own options.
void apply_ttl_encoding(Segment& seg, int value, CarrierSet carriers);

struct TtlDecode {
  std::optional<int> value;
  double confidence = 0.0;  // agreeing copies / all extracted copies
  int agreeing = 0;
  int total = 0;
};

// Majority decode over every 5-bit copy found in the quoted carriers. A carrier
// whose copies disagree with each other, have leftover high bits set, or decode
// outside 1..30 has been rewritten and does not vote (its copies still count in
// the confidence denominator). Throws NoCarrierAvailable when no carrier in the
// set is present in the quote.
TtlDecode decode_ttl(const QuotedSegment& quote, CarrierSet carriers);

// Copy k (1-based) has IP TTL k and the encoding of k applied. Lengths and the
// IPv4 checksum are recomputed; the TCP checksum is recomputed only when the
// base's checksum is valid, otherwise the base's field value is carried over.
std::vector<Segment> build_fan(const Segment& base, CarrierSet carriers, int max_ttl = kMaxFanTtl);

struct FieldDiff {
  Field field;
  std::string sent;
  std::string observed;

  bool operator==(const FieldDiff&) const = default;
};

// Compares every field present in the quote against the segment that was sent.
std::vector<FieldDiff> diff_fields(const Segment& sent, const QuotedSegment& quote);

struct PathObservation {
  int hop = 0;
  Ipv4Addr router;
  QuotedSegment quoted;
  std::vector<FieldDiff> diffs;
  double confidence = 0.0;
};

// Correlates an ICMP quote with the fan by decoded TTL; nullopt when the hop
// cannot be decoded or is outside the fan.
std::optional<PathObservation> observe(const IcmpTimeExceeded& icmp, std::span<const Segment> fan,
                                       CarrierSet carriers);

struct PathDiagnosis {
  bool modified = false;
  std::optional<int> first_modifying_hop;
  std::vector<Field> relevant_fields;
  std::vector<std::pair<int, FieldDiff>> evidence;  // every relevant diff, by hop

  bool operator==(const PathDiagnosis&) const = default;
};

// Only diffs on relevant fields attest a modification; when several hops modify
// the same field the first is reported and all are kept as evidence.
PathDiagnosis diagnose(std::span<const PathObservation> observations, std::span<const Field> relevant);

}  // namespace tcpconf
