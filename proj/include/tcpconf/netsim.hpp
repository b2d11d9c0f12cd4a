#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "tcpconf/endpoint.hpp"
#include "tcpconf/sim_transport.hpp"

namespace tcpconf::netsim {

enum class MiddleboxKind {
  MssClamp,            // overwrites the MSS option value of SYNs that carry one
  MssInsert,           // adds an MSS option to SYNs that lack one
  StripPadding,        // removes EOOL and NOOP options
  StripUnknownOption,  // removes option kinds outside the assigned set
  ClearReserved,       // zeroes the reserved bits
  FixChecksum,         // recomputes the TCP checksum of every segment
  NatRewrite,          // rewrites the source port, reverse-translates replies
};

enum class QuoteLen { Full, Min28 };

std::string to_string(MiddleboxKind k);
std::optional<MiddleboxKind> middlebox_from_string(std::string_view name);

// A middlebox is the hop-th router on the path. It rewrites a segment before the
// TTL check, so an ICMP quote from that hop already shows its modification.
struct MiddleboxSpec {
  int hop = 1;
  MiddleboxKind kind = MiddleboxKind::FixChecksum;
  std::uint16_t value = 0;  // MSS for MssClamp / MssInsert
  QuoteLen quote_len = QuoteLen::Full;
};

struct SimTarget {
  Ipv4Addr addr;
  StackProfile profile;
  int path_length = 8;  // routers between scanner and endpoint
  std::vector<MiddleboxSpec> middleboxes;
  QuoteLen router_quote = QuoteLen::Full;
  bool blackhole = false;  // endpoint never answers
  std::map<std::string, std::string> labels;
};

struct Topology {
  Ipv4Addr scanner{10, 0, 0, 1};
  Micros hop_latency{1000};
  std::uint64_t seed = 1;
  std::vector<SimTarget> targets;
};

// Throws InvalidSpec.
void validate(const Topology& topo);
Topology load_topology(const std::filesystem::path& path);
Topology topology_from_json(std::string_view json_text);

// Address of the hop-th router on the path towards `target` (inside 100.64.0.0/10).
Ipv4Addr router_address(Ipv4Addr target, int hop);

// Copy of the topology holding only the target with this address; endpoint
// seeds and router addresses do not depend on the other targets.
Topology single_target(const Topology& topo, Ipv4Addr target);

struct TranscriptEntry {
  Micros time{0};
  std::size_t target = 0;
  int location = 0;  // 0 scanner, 1..path_length routers, path_length + 1 endpoint
  std::string direction;  // "fwd" or "rev"
  std::string action;     // arrive, expire, icmp, deliver, drop
  Bytes frame;
};

class Network final : public SimLink {
 public:
  explicit Network(Topology topo, bool record_transcript = false);

  void inject(Micros at, Bytes datagram) override;
  std::optional<Micros> next_event_time() const override;
  std::vector<std::pair<Micros, Bytes>> step() override;
  bool has_route(Ipv4Addr destination) const override;
  Ipv4Addr scanner_address() const override { return topo_.scanner; }

  // Sends a datagram from the endpoint side towards the scanner at time `at`.
  void inject_from_endpoint(Micros at, Bytes datagram);

  const Topology& topology() const { return topo_; }
  const std::vector<TranscriptEntry>& transcript() const { return transcript_; }
  const EndpointState& endpoint_state(std::size_t target) const { return endpoints_.at(target); }

 private:
  enum class EventKind { ArriveEndpoint, ArriveScanner, Timer };
  struct Event {
    Micros time;
    std::uint64_t order;
    EventKind kind;
    std::size_t target;
    Bytes frame;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.order > b.order;
    }
  };
  struct NatEntry {
    std::uint16_t original;
  };

  void push(Micros t, EventKind kind, std::size_t target, Bytes frame);
  void forward(std::size_t target, Micros t, Segment seg);
  void reverse(std::size_t target, Micros t, Segment seg);
  bool rewrite_forward(std::size_t target, const MiddleboxSpec& mb, Segment& seg);
  void on_endpoint(std::size_t target, Micros t, const Bytes& frame);
  void on_timer(std::size_t target, Micros t);
  void emit_endpoint_output(std::size_t target, Micros t, std::vector<Segment> out);
  void schedule_timer(std::size_t target);
  void record(Micros t, std::size_t target, int location, const char* dir, const char* action, const Bytes& frame);
  std::optional<std::size_t> target_index(Ipv4Addr addr) const;

  Topology topo_;
  bool record_;
  std::vector<EndpointState> endpoints_;
  std::vector<std::optional<Micros>> timer_at_;
  std::map<std::pair<std::size_t, int>, std::map<std::uint16_t, NatEntry>> nat_;  // (target, hop) -> mapped port
  std::priority_queue<Event, std::vector<Event>, Later> events_;
  std::uint64_t order_ = 0;
  std::vector<TranscriptEntry> transcript_;
};

enum class ScriptDirection { ToEndpoint, ToScanner };

struct ScriptEntry {
  ScriptDirection direction = ScriptDirection::ToEndpoint;
  Segment segment;  // emitted verbatim, checksums included
  Micros at{0};
};

// Runs the entries in virtual time until the network is idle and returns every
// frame at every hop. Throws ScriptError on decreasing times or an address that
// is not part of the topology.
std::vector<TranscriptEntry> run_script(const Topology& topo, std::span<const ScriptEntry> script);

}  // namespace tcpconf::netsim
