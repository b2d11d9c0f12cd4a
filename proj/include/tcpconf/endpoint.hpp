#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "tcpconf/bytes.hpp"
#include "tcpconf/segment.hpp"

namespace tcpconf::netsim {

// Named departures from a conformant responder.
enum class Deviation {
  IgnoreBadChecksum,   // processes bad-checksum segments as if valid
  MssFloor536,         // uses 536 as a lower bound on the peer's advertised MSS
  DefaultMss1024,      // assumes 1024 when the peer sends no MSS option
  CrashOnUrgent,       // stack dies on the first URG-flagged data segment
  DropUrgentSilently,  // URG-flagged data is discarded without an ACK
  RstOnUrgent,         // URG-flagged data resets the connection
  DropReservedSyn,     // SYNs with any reserved bit set are discarded
  EchoReservedBits,    // SYN/ACK copies the SYN's reserved bits
  DeferAccept,         // a data-less handshake ACK is ignored; SYN/ACK retransmits continue
  DropUnknownOption,   // SYNs carrying an unassigned option kind are discarded
  RstOnOptions,        // SYNs carrying any option are answered with RST
};

std::string to_string(Deviation d);
std::optional<Deviation> deviation_from_string(std::string_view name);
const std::vector<Deviation>& all_deviations();

struct StackProfile {
  std::string name = "conformant";
  std::set<Deviation> deviations;
  std::size_t response_body_len = 2000;
  bool restart_after_crash = false;
  Micros restart_delay{100'000};
  std::set<std::uint16_t> listen_ports{80, 443};
  std::uint16_t own_mss = 1460;

  bool has(Deviation d) const { return deviations.contains(d); }
};

// Testbed stacks: Linux, Windows, macOS, uIP, lwIP, Seastar.
StackProfile profile_linux();
StackProfile profile_windows();
StackProfile profile_macos();
StackProfile profile_uip();
StackProfile profile_lwip();
StackProfile profile_seastar();
std::optional<StackProfile> profile_by_name(std::string_view name);

inline constexpr Micros kInitialRto{1'000'000};
inline constexpr int kMaxSynAckRetries = 3;
inline constexpr std::uint16_t kDefaultIpv4Mss = 536;

struct Connection {
  enum class Phase { SynReceived, Established };
  Phase phase = Phase::SynReceived;
  std::uint32_t irs = 0;
  std::uint32_t iss = 0;
  std::uint32_t snd_nxt = 0;
  std::uint32_t rcv_nxt = 0;
  std::uint16_t send_mss = kDefaultIpv4Mss;
  std::uint8_t synack_reserved = 0;
  bool responded = false;
  int retries = 0;
  Micros rto{kInitialRto};
  Micros rto_at{0};

  bool operator==(const Connection&) const = default;
};

// (peer address, peer port, local port)
using ConnKey = std::tuple<std::uint32_t, std::uint16_t, std::uint16_t>;

struct EndpointState {
  Ipv4Addr addr;
  std::uint64_t seed = 0;
  std::map<ConnKey, Connection> connections;
  bool crashed = false;
  std::optional<Micros> restart_at;
  std::uint16_t next_ip_id = 1;

  bool operator==(const EndpointState&) const = default;
};

EndpointState initial_state(Ipv4Addr addr, std::uint64_t seed);

struct StepResult {
  EndpointState state;
  std::vector<Segment> outgoing;  // finalized, ready to serialize
};

// Pure transition on one inbound segment.
StepResult endpoint_step(const StackProfile& profile, EndpointState state, const Segment& incoming, Micros now);
// Pure transition for expired SYN/ACK retransmission timers.
StepResult endpoint_timers(const StackProfile& profile, EndpointState state, Micros now);
std::optional<Micros> next_timer(const EndpointState& state);

}  // namespace tcpconf::netsim
