#pragma once

#include <cstdint>

#include "tcpconf/bytes.hpp"

namespace tcpconf {

// Incremental ones-complement accumulator over big-endian 16-bit words.
// Pieces may have odd length; a dangling byte carries over into the next piece.
class OnesComplementSum {
 public:
  OnesComplementSum& add(ByteView data);
  OnesComplementSum& add16(std::uint16_t word);
  OnesComplementSum& add32(std::uint32_t word);

  // Folded 16-bit sum (not complemented).
  std::uint16_t folded() const;
  // Complement of the folded sum, i.e. the value placed in a checksum field.
  std::uint16_t checksum() const { return static_cast<std::uint16_t>(~folded()); }

 private:
  std::uint64_t sum_ = 0;
  bool odd_ = false;
  std::uint8_t pending_ = 0;
};

inline std::uint16_t internet_checksum(ByteView data) {
  return OnesComplementSum{}.add(data).checksum();
}

// Checksum over the TCP pseudo-header plus the given TCP bytes (header + payload).
// The checksum field inside tcp_bytes must already be zero for computation.
std::uint16_t tcp_pseudo_checksum(Ipv4Addr src, Ipv4Addr dst, ByteView tcp_bytes);

}  // namespace tcpconf
