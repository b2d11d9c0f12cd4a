#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "tcpconf/bytes.hpp"
#include "tcpconf/segment.hpp"

namespace tcpconf::testing {

inline std::string data_path(const std::string& name) { return std::string(TCPCONF_TEST_DATA) + "/" + name; }

// Non-comment lines of a fixture, split on whitespace.
inline std::vector<std::vector<std::string>> fixture(const std::string& name) {
  std::ifstream in(data_path(name));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<std::string> row;
    for (std::string w; ss >> w;) row.push_back(w);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Bytes hex(const std::string& s) { return *from_hex(s); }

// RFC 1071 over raw wire bytes: pseudo-header plus the TCP bytes with the
// checksum field skipped. Knows nothing about Segment.
inline std::uint16_t oracle_tcp_checksum(const Bytes& wire) {
  const std::size_t ihl = (wire[0] & 0x0f) * 4u;
  const std::size_t total = (std::size_t{wire[2]} << 8) | wire[3];
  const std::size_t tcp_len = total - ihl;
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), wire.begin() + 12, wire.begin() + 20);
  buf.push_back(0);
  buf.push_back(wire[9]);
  buf.push_back(static_cast<std::uint8_t>(tcp_len >> 8));
  buf.push_back(static_cast<std::uint8_t>(tcp_len));
  for (std::size_t i = 0; i < tcp_len; ++i) buf.push_back((i == 16 || i == 17) ? 0 : wire[ihl + i]);
  if (buf.size() % 2) buf.push_back(0);
  std::uint64_t sum = 0;
  for (std::size_t i = 0; i < buf.size(); i += 2) sum += (std::uint64_t{buf[i]} << 8) | buf[i + 1];
  while (sum >> 16) sum = (sum & 0xffff) + (sum >> 16);
  const auto c = static_cast<std::uint16_t>(~sum);
  return c == 0 ? 0xffff : c;
}

// Options that survive a round trip: EOOL only as the last entry, and present
// whenever the unpadded length is not a multiple of four.
inline std::vector<TcpOption> random_options(Rng& rng, std::size_t max_bytes = kMaxOptionBytes) {
  std::vector<TcpOption> opts;
  std::size_t used = 0;
  const std::size_t budget = rng.below(max_bytes + 1);
  for (;;) {
    const auto pick = rng.below(4);
    if (pick == 0 && used + 1 <= budget) {
      opts.push_back(TcpOption::noop());
      used += 1;
    } else if (pick == 1 && used + 4 <= budget) {
      opts.push_back(TcpOption::mss(rng.next16()));
      used += 4;
    } else if (pick == 2) {
      const std::size_t n = rng.below(7);
      if (used + 2 + n > budget) break;
      static constexpr std::uint8_t kinds[] = {3, 4, 5, 8, 30, 158, 200, 254};
      Bytes data(n);
      for (auto& b : data) b = static_cast<std::uint8_t>(rng.below(256));
      opts.push_back(TcpOption::unknown(kinds[rng.below(8)], std::move(data)));
      used += 2 + n;
    } else {
      break;
    }
  }
  if (used % 4 != 0 || (rng.below(4) == 0 && used + 1 <= max_bytes)) opts.push_back(TcpOption::eool());
  return opts;
}

inline Segment random_segment(Rng& rng) {
  Segment s;
  s.ip.tos = static_cast<std::uint8_t>(rng.below(256));
  s.ip.identification = rng.next16();
  s.ip.flags_fragment = static_cast<std::uint16_t>(rng.below(2) ? 0x4000 : 0);
  s.ip.ttl = static_cast<std::uint8_t>(1 + rng.below(255));
  s.ip.source = Ipv4Addr{rng.next32()};
  s.ip.destination = Ipv4Addr{rng.next32()};
  s.tcp.source_port = rng.next16();
  s.tcp.dest_port = rng.next16();
  s.tcp.seq = rng.next32();
  s.tcp.ack = rng.next32();
  s.tcp.reserved = static_cast<std::uint8_t>(rng.below(16));
  s.tcp.flags = static_cast<std::uint8_t>(rng.below(256));
  s.tcp.window = rng.next16();
  s.tcp.urgent_pointer = rng.next16();
  s.tcp.options = random_options(rng);
  static constexpr std::size_t sizes[] = {0, 0, 1, 2, 3, 167, 515, 536, 1024, 1460};
  s.payload.resize(sizes[rng.below(10)]);
  for (auto& b : s.payload) b = static_cast<std::uint8_t>(rng.below(256));
  finalize(s);
  return s;
}

}  // namespace tcpconf::testing
