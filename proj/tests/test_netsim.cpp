#include <gtest/gtest.h>

#include "tcpconf/error.hpp"
#include "tcpconf/netsim.hpp"

using namespace tcpconf;
using namespace tcpconf::netsim;

namespace {

const Ipv4Addr kScanner{10, 0, 0, 1};
const Ipv4Addr kTarget{10, 0, 1, 1};

Segment make(std::uint8_t flags, std::uint32_t seq, std::uint32_t ack = 0, std::vector<TcpOption> opts = {},
             Bytes payload = {}) {
  Segment s;
  s.ip.source = kScanner;
  s.ip.destination = kTarget;
  s.tcp.source_port = 40000;
  s.tcp.dest_port = 80;
  s.tcp.seq = seq;
  s.tcp.ack = ack;
  s.tcp.flags = flags;
  s.tcp.options = std::move(opts);
  s.payload = std::move(payload);
  finalize(s);
  return s;
}

// Handshake with `syn`, then sends a request; returns every segment the endpoint emitted.
std::vector<Segment> converse(const StackProfile& p, const Segment& syn) {
  std::vector<Segment> all;
  auto r = endpoint_step(p, initial_state(kTarget, 9), syn, Micros{0});
  all.insert(all.end(), r.outgoing.begin(), r.outgoing.end());
  if (r.outgoing.empty() || !r.outgoing[0].tcp.has(tcp_flag::kSyn | tcp_flag::kAck)) return all;
  const auto& sa = r.outgoing[0];
  const Segment req = make(tcp_flag::kAck | tcp_flag::kPsh, syn.tcp.seq + 1, sa.tcp.seq + 1, {},
                           Bytes{'G', 'E', 'T', ' ', '/', '\r', '\n', '\r', '\n'});
  r = endpoint_step(p, std::move(r.state), req, Micros{1000});
  all.insert(all.end(), r.outgoing.begin(), r.outgoing.end());
  return all;
}

std::vector<std::size_t> data_sizes(const std::vector<Segment>& segs) {
  std::vector<std::size_t> out;
  for (const auto& s : segs)
    if (!s.payload.empty()) out.push_back(s.payload.size());
  return out;
}

Topology path_of(int length, std::vector<MiddleboxSpec> mbs = {}) {
  Topology t;
  SimTarget tgt;
  tgt.addr = kTarget;
  tgt.profile = profile_linux();
  tgt.path_length = length;
  tgt.middleboxes = std::move(mbs);
  t.targets.push_back(tgt);
  return t;
}

}  // namespace

TEST(Endpoint, SegmentsBodyByAdvertisedMss) {
  const auto out = converse(profile_linux(), make(tcp_flag::kSyn, 100, 0, {TcpOption::mss(515)}));
  const auto sizes = data_sizes(out);
  ASSERT_EQ(sizes.size(), 4u);
  for (auto n : sizes) EXPECT_LE(n, 515u);
  EXPECT_EQ(sizes[0] + sizes[1] + sizes[2] + sizes[3], 2000u);
}

TEST(Endpoint, MssFloor536) {
  const auto sizes =
      data_sizes(converse(profile_windows(), make(tcp_flag::kSyn, 100, 0, {TcpOption::mss(515)})));
  ASSERT_FALSE(sizes.empty());
  EXPECT_EQ(sizes[0], 536u);
}

TEST(Endpoint, DefaultMssWithoutOption) {
  EXPECT_EQ(data_sizes(converse(profile_linux(), make(tcp_flag::kSyn, 100)))[0], 536u);
  EXPECT_EQ(data_sizes(converse(profile_macos(), make(tcp_flag::kSyn, 100)))[0], 1024u);
}

TEST(Endpoint, BadChecksumIgnoredUnlessDeviation) {
  Segment syn = make(tcp_flag::kSyn, 5);
  syn.tcp.checksum ^= 0xffff;
  EXPECT_TRUE(endpoint_step(profile_linux(), initial_state(kTarget, 1), syn, Micros{0}).outgoing.empty());
  EXPECT_EQ(endpoint_step(profile_seastar(), initial_state(kTarget, 1), syn, Micros{0}).outgoing.size(), 1u);
}

TEST(Endpoint, ClosedPortResets) {
  Segment syn = make(tcp_flag::kSyn, 5);
  syn.tcp.dest_port = 8080;
  finalize(syn);
  const auto r = endpoint_step(profile_linux(), initial_state(kTarget, 1), syn, Micros{0});
  ASSERT_EQ(r.outgoing.size(), 1u);
  EXPECT_TRUE(r.outgoing[0].tcp.has(tcp_flag::kRst));
  EXPECT_EQ(r.outgoing[0].tcp.ack, 6u);
}

TEST(Endpoint, DeferAcceptRetransmitsSynAck) {
  StackProfile p = profile_linux();
  p.deviations.insert(Deviation::DeferAccept);
  auto r = endpoint_step(p, initial_state(kTarget, 3), make(tcp_flag::kSyn, 10), Micros{0});
  const auto iss = r.outgoing.at(0).tcp.seq;
  r = endpoint_step(p, std::move(r.state), make(tcp_flag::kAck, 11, iss + 1), Micros{1000});
  EXPECT_TRUE(r.outgoing.empty());
  ASSERT_EQ(next_timer(r.state), kInitialRto);
  r = endpoint_timers(p, std::move(r.state), kInitialRto);
  ASSERT_EQ(r.outgoing.size(), 1u);
  EXPECT_TRUE(r.outgoing[0].tcp.has(tcp_flag::kSyn | tcp_flag::kAck));

  // A conformant stack completes the handshake and stops retransmitting.
  auto c = endpoint_step(profile_linux(), initial_state(kTarget, 3), make(tcp_flag::kSyn, 10), Micros{0});
  c = endpoint_step(profile_linux(), std::move(c.state), make(tcp_flag::kAck, 11, iss + 1), Micros{1000});
  EXPECT_TRUE(endpoint_timers(profile_linux(), c.state, Micros{10'000'000}).outgoing.empty());
}

TEST(Endpoint, ReservedDeviations) {
  Segment syn = make(tcp_flag::kSyn, 10);
  syn.tcp.reserved = kReservedFlag2;
  finalize(syn);
  EXPECT_EQ(endpoint_step(profile_linux(), initial_state(kTarget, 1), syn, Micros{0}).outgoing.at(0).tcp.reserved, 0);
  StackProfile echo = profile_linux();
  echo.deviations = {Deviation::EchoReservedBits};
  EXPECT_EQ(endpoint_step(echo, initial_state(kTarget, 1), syn, Micros{0}).outgoing.at(0).tcp.reserved,
            kReservedFlag2);
  StackProfile drop = profile_linux();
  drop.deviations = {Deviation::DropReservedSyn};
  EXPECT_TRUE(endpoint_step(drop, initial_state(kTarget, 1), syn, Micros{0}).outgoing.empty());
}

TEST(Endpoint, DeviationNamesRoundTrip) {
  for (auto d : all_deviations()) EXPECT_EQ(deviation_from_string(to_string(d)), d);
  EXPECT_EQ(all_deviations().size(), 11u);
}

TEST(Script, TtlTwoExpiresAtHopTwo) {
  Segment syn = make(tcp_flag::kSyn, 1);
  syn.ip.ttl = 2;
  finalize(syn);
  const ScriptEntry e{ScriptDirection::ToEndpoint, syn, Micros{0}};
  const auto tr = run_script(path_of(3), std::span(&e, 1));
  bool icmp_from_2 = false;
  for (const auto& t : tr) {
    EXPECT_NE(t.location, 4) << "endpoint reached";
    EXPECT_FALSE(t.direction == "fwd" && t.action == "deliver");
    if (t.action == "icmp") {
      EXPECT_EQ(t.location, 2);
      icmp_from_2 = true;
    }
  }
  EXPECT_TRUE(icmp_from_2);
}

TEST(Script, FixChecksumHop) {
  Segment syn = make(tcp_flag::kSyn, 1);
  syn.tcp.checksum ^= 0x00ff;
  const ScriptEntry e{ScriptDirection::ToEndpoint, syn, Micros{0}};
  const auto tr = run_script(path_of(3, {{2, MiddleboxKind::FixChecksum, 0, QuoteLen::Full}}), std::span(&e, 1));
  bool delivered = false;
  for (const auto& t : tr) {
    if (t.direction == "fwd" && t.action == "deliver") {
      EXPECT_TRUE(verify_tcp_checksum(parse(t.frame)));
      delivered = true;
    }
  }
  EXPECT_TRUE(delivered);
}

TEST(Script, MssInsertAddsOption) {
  const Segment syn = make(tcp_flag::kSyn, 1);
  const ScriptEntry e{ScriptDirection::ToEndpoint, syn, Micros{0}};
  const auto tr =
      run_script(path_of(3, {{1, MiddleboxKind::MssInsert, 1460, QuoteLen::Full}}), std::span(&e, 1));
  bool delivered = false;
  for (const auto& t : tr) {
    if (t.direction == "fwd" && t.action == "deliver") {
      EXPECT_EQ(parse(t.frame).tcp.mss(), 1460);
      delivered = true;
    }
  }
  EXPECT_TRUE(delivered);
}

TEST(Script, CleanPathDeliversUnchanged) {
  const Segment syn = make(tcp_flag::kSyn, 1);
  const ScriptEntry e{ScriptDirection::ToEndpoint, syn, Micros{0}};
  const auto tr = run_script(path_of(4), std::span(&e, 1));
  for (const auto& t : tr) {
    if (t.direction == "fwd" && t.action == "deliver") {
      Segment got = parse(t.frame);
      EXPECT_EQ(got.ip.ttl, 64 - 4);
      got.ip.ttl = syn.ip.ttl;
      got.ip.header_checksum = syn.ip.header_checksum;
      EXPECT_EQ(got, syn);
    }
  }
}

TEST(Script, DeterministicTranscript) {
  std::vector<ScriptEntry> script{
      {ScriptDirection::ToEndpoint, make(tcp_flag::kSyn, 1), Micros{0}},
      {ScriptDirection::ToEndpoint, make(tcp_flag::kSyn, 77), Micros{500}},
  };
  const auto a = run_script(path_of(5), script);
  const auto b = run_script(path_of(5), script);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].time, b[i].time);
    EXPECT_EQ(a[i].frame, b[i].frame);
    EXPECT_EQ(a[i].action, b[i].action);
  }
}

TEST(Script, Errors) {
  std::vector<ScriptEntry> backwards{
      {ScriptDirection::ToEndpoint, make(tcp_flag::kSyn, 1), Micros{10}},
      {ScriptDirection::ToEndpoint, make(tcp_flag::kSyn, 2), Micros{5}},
  };
  try {
    run_script(path_of(2), backwards);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ScriptError);
  }
  Segment stray = make(tcp_flag::kSyn, 1);
  stray.ip.destination = Ipv4Addr{192, 0, 2, 9};
  finalize(stray);
  const ScriptEntry e{ScriptDirection::ToEndpoint, stray, Micros{0}};
  try {
    run_script(path_of(2), std::span(&e, 1));
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.code(), Errc::ScriptError);
  }
}

TEST(Topology, JsonAndValidation) {
  const auto topo = topology_from_json(R"({
    "scanner": "10.0.0.1", "seed": 3,
    "targets": [{"addr": "10.0.3.1", "profile": {"base": "linux", "deviations": ["DEFER_ACCEPT"]},
                 "path_length": 4, "middleboxes": [{"hop": 2, "kind": "MSS_CLAMP", "value": 1460}]}]})");
  ASSERT_EQ(topo.targets.size(), 1u);
  EXPECT_TRUE(topo.targets[0].profile.has(Deviation::DeferAccept));
  EXPECT_EQ(topo.targets[0].middleboxes.at(0).kind, MiddleboxKind::MssClamp);

  auto bad = [](const char* text) {
    try {
      topology_from_json(text);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoError;
  };
  EXPECT_EQ(bad(R"({"targets": [{"addr": "10.0.3.1", "profile": "linux", "path_length": 2,
                 "middleboxes": [{"hop": 3, "kind": "FIX_CHECKSUM"}]}]})"),
            Errc::InvalidSpec);
  EXPECT_EQ(bad(R"({"targets": [{"addr": "10.0.3.1", "profile": "nonesuch"}]})"), Errc::InvalidSpec);
}

TEST(Topology, RouterAddressesAreDistinctPerHop) {
  EXPECT_NE(router_address(kTarget, 1), router_address(kTarget, 2));
  EXPECT_TRUE((router_address(kTarget, 1).value >> 22) == (0x64400000u >> 22));
}
