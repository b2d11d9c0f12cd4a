#include "tcpconf/checksum.hpp"

namespace tcpconf {

OnesComplementSum& OnesComplementSum::add(ByteView data) {
  std::size_t i = 0;
  if (odd_ && !data.empty()) {
    sum_ += (std::uint32_t{pending_} << 8) | data[0];
    odd_ = false;
    i = 1;
  }
  for (; i + 1 < data.size(); i += 2) {
    sum_ += (std::uint32_t{data[i]} << 8) | data[i + 1];
  }
  if (i < data.size()) {
    pending_ = data[i];
    odd_ = true;
  }
  return *this;
}

OnesComplementSum& OnesComplementSum::add16(std::uint16_t word) {
  const std::uint8_t b[2] = {static_cast<std::uint8_t>(word >> 8), static_cast<std::uint8_t>(word)};
  return add(b);
}

OnesComplementSum& OnesComplementSum::add32(std::uint32_t word) {
  add16(static_cast<std::uint16_t>(word >> 16));
  return add16(static_cast<std::uint16_t>(word));
}

std::uint16_t OnesComplementSum::folded() const {
  std::uint64_t s = sum_;
  if (odd_) s += std::uint32_t{pending_} << 8;
  while (s >> 16) s = (s & 0xffff) + (s >> 16);
  return static_cast<std::uint16_t>(s);
}

std::uint16_t tcp_pseudo_checksum(Ipv4Addr src, Ipv4Addr dst, ByteView tcp_bytes) {
  OnesComplementSum sum;
  sum.add32(src.value).add32(dst.value).add16(6).add16(static_cast<std::uint16_t>(tcp_bytes.size()));
  sum.add(tcp_bytes);
  return sum.checksum();
}

}  // namespace tcpconf
