#include <gtest/gtest.h>

#include <functional>

#include "tcpconf/error.hpp"
#include "tcpconf/netsim.hpp"
#include "tcpconf/sim_transport.hpp"

using namespace tcpconf;

namespace {

netsim::Topology one_linux(int path_length = 3) {
  netsim::Topology t;
  netsim::SimTarget tgt;
  tgt.addr = Ipv4Addr{10, 0, 1, 1};
  tgt.profile = netsim::profile_linux();
  tgt.path_length = path_length;
  t.targets.push_back(tgt);
  return t;
}

Segment syn(Endpoint local, Endpoint remote, std::uint32_t seq, std::uint8_t ttl = 64) {
  Segment s;
  s.ip.source = local.addr;
  s.ip.destination = remote.addr;
  s.ip.ttl = ttl;
  s.tcp.source_port = local.port;
  s.tcp.dest_port = remote.port;
  s.tcp.seq = seq;
  s.tcp.flags = tcp_flag::kSyn;
  finalize(s);
  return s;
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::IoError;
}

}  // namespace

TEST(Pacer, RateOneSpacesBySecond) {
  Pacer p({1, 1});
  const Micros a = p.reserve(Micros{0});
  const Micros b = p.reserve(Micros{0});
  const Micros c = p.reserve(Micros{0});
  EXPECT_GE(b - a, Micros{1'000'000});
  EXPECT_GE(c - b, Micros{1'000'000});
}

TEST(Pacer, BurstGoesBackToBack) {
  Pacer p({10, 30});
  for (int i = 0; i < 30; ++i) EXPECT_EQ(p.reserve(Micros{0}), Micros{0});
  EXPECT_GT(p.reserve(Micros{0}), Micros{0});
}

TEST(Pacer, WindowBound) {
  const PacerConfig cfg{1000, 8};
  Pacer p(cfg);
  std::vector<Micros> times;
  for (int i = 0; i < 5000; ++i) times.push_back(p.reserve(Micros{static_cast<std::int64_t>(i) * 300}));
  const std::int64_t window = 250'000;
  std::size_t lo = 0;
  for (std::size_t hi = 0; hi < times.size(); ++hi) {
    while (times[hi].count() - times[lo].count() >= window) ++lo;
    EXPECT_LE(hi - lo + 1, cfg.rate_pps * window / 1'000'000 + cfg.burst);
  }
}

TEST(Pacer, ZeroRateIsConfigError) {
  EXPECT_EQ(code_of([] { Pacer p({0, 1}); }), Errc::ConfigError);
}

TEST(SimTransport, SynAckReachesSession) {
  netsim::Network net(one_linux());
  SimTransport tr(net, {});
  const Endpoint local{net.scanner_address(), 40000};
  const Endpoint remote{Ipv4Addr{10, 0, 1, 1}, 80};
  const auto h = tr.open_session(local, remote);
  tr.send(h, syn(local, remote, 100));
  const auto ev = tr.next_event(h, Micros{5'000'000});
  ASSERT_EQ(ev.kind, EventKind::TcpIn);
  EXPECT_TRUE(ev.segment.tcp.has(tcp_flag::kSyn | tcp_flag::kAck));
  EXPECT_EQ(ev.segment.tcp.ack, 101u);
}

TEST(SimTransport, TimeoutWhenSilent) {
  netsim::Network net(one_linux());
  SimTransport tr(net, {});
  const auto h = tr.open_session({net.scanner_address(), 40000}, {Ipv4Addr{10, 0, 1, 1}, 80});
  const auto ev = tr.next_event(h, Micros{1'000'000});
  EXPECT_EQ(ev.kind, EventKind::Timeout);
  EXPECT_EQ(tr.now(), Micros{1'000'000});
}

TEST(SimTransport, IcmpFromRouter) {
  netsim::Network net(one_linux());
  SimTransport tr(net, {});
  const Endpoint local{net.scanner_address(), 40000};
  const Endpoint remote{Ipv4Addr{10, 0, 1, 1}, 80};
  const auto h = tr.open_session(local, remote);
  tr.send(h, syn(local, remote, 1, 2));
  const auto ev = tr.next_event(h, Micros{1'000'000});
  ASSERT_EQ(ev.kind, EventKind::IcmpIn);
  EXPECT_EQ(ev.source, netsim::router_address(remote.addr, 2));
}

TEST(SimTransport, Errors) {
  netsim::Network net(one_linux());
  SimTransport tr(net, {});
  const Endpoint local{net.scanner_address(), 40000};
  const Endpoint remote{Ipv4Addr{10, 0, 1, 1}, 80};
  const auto h = tr.open_session(local, remote);
  EXPECT_EQ(code_of([&] { tr.open_session(local, remote); }), Errc::PortInUse);
  EXPECT_EQ(code_of([&] { tr.open_session({local.addr, 40001}, {Ipv4Addr{192, 0, 2, 1}, 80}); }), Errc::NoRoute);
  tr.close_session(h);
  EXPECT_EQ(code_of([&] { tr.send(h, syn(local, remote, 1)); }), Errc::SessionClosed);
  EXPECT_EQ(code_of([&] { tr.next_event(h, Micros{1}); }), Errc::SessionClosed);
  EXPECT_NO_THROW(tr.open_session(local, remote));
}

TEST(SimTransport, IndependentStreams) {
  netsim::Network net(one_linux());
  SimTransport tr(net, {});
  const Endpoint remote{Ipv4Addr{10, 0, 1, 1}, 80};
  const Endpoint a{net.scanner_address(), 40000};
  const Endpoint b{net.scanner_address(), 40001};
  const auto ha = tr.open_session(a, remote);
  const auto hb = tr.open_session(b, remote);
  tr.send(ha, syn(a, remote, 1000));
  tr.send(hb, syn(b, remote, 2000));
  const auto eb = tr.next_event(hb, Micros{1'000'000});
  const auto ea = tr.next_event(ha, Micros{1'000'000});
  ASSERT_EQ(ea.kind, EventKind::TcpIn);
  ASSERT_EQ(eb.kind, EventKind::TcpIn);
  EXPECT_EQ(ea.segment.tcp.ack, 1001u);
  EXPECT_EQ(eb.segment.tcp.ack, 2001u);
}

TEST(SimTransport, DeterministicEventSequence) {
  auto run = [] {
    netsim::Network net(one_linux());
    SimTransport tr(net, {});
    const Endpoint local{net.scanner_address(), 40000};
    const Endpoint remote{Ipv4Addr{10, 0, 1, 1}, 80};
    const auto h = tr.open_session(local, remote);
    tr.send(h, syn(local, remote, 7, 1));
    tr.send(h, syn(local, remote, 7));
    std::vector<std::pair<Micros, Bytes>> out;
    for (;;) {
      auto ev = tr.next_event(h, Micros{3'000'000});
      if (ev.kind == EventKind::Timeout) break;
      out.emplace_back(ev.time, ev.raw);
    }
    return out;
  };
  const auto a = run();
  EXPECT_GE(a.size(), 2u);
  EXPECT_EQ(a, run());
}
