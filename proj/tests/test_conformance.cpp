#include <gtest/gtest.h>

#include "sim_harness.hpp"
#include "tcpconf/classify.hpp"
#include "tcpconf/error.hpp"

using namespace tcpconf;
using namespace tcpconf::netsim;
using namespace tcpconf::testing;

namespace {

MiddleboxSpec mb(int hop, MiddleboxKind kind, std::uint16_t value = 0, QuoteLen q = QuoteLen::Full) {
  return {hop, kind, value, q};
}

void expect_path(const TestRun& r, int hop) {
  EXPECT_EQ(r.verdict.result, Result::FPath);
  ASSERT_TRUE(r.verdict.path);
  EXPECT_TRUE(r.verdict.path->modified);
  EXPECT_EQ(r.verdict.path->first_modifying_hop, hop);
}

}  // namespace

TEST(Liveness, States) {
  {
    SimBench b(sim_target(profile_linux()));
    EXPECT_EQ(b.runner.liveness(b.endpoint), Liveness::Alive);
  }
  {
    SimBench b(sim_target(profile_linux()), {}, 8080);
    EXPECT_EQ(b.runner.liveness(b.endpoint), Liveness::Dead);
  }
  {
    auto t = sim_target(profile_linux());
    t.blackhole = true;
    SimBench b(t);
    EXPECT_EQ(b.runner.liveness(b.endpoint), Liveness::Dead);
  }
}

TEST(Suite, DeadTargetRunsNoTests) {
  auto t = sim_target(profile_linux());
  t.blackhole = true;
  SimBench b(t);
  const auto rep = b.suite();
  EXPECT_EQ(rep.liveness, Liveness::Dead);
  EXPECT_TRUE(rep.runs.empty());
}

TEST(Suite, ConformantCleanPathAllPass) {
  SimBench b(sim_target(profile_linux()));
  const auto rep = b.suite();
  ASSERT_EQ(rep.runs.size(), 8u);
  for (const auto& r : rep.runs) EXPECT_EQ(r.verdict.result, Result::Pass) << to_string(r.verdict.test);
}

TEST(Checksum, LinuxPassesSeastarFails) {
  for (TestId t : {TestId::ChecksumIncorrect, TestId::ChecksumZero}) {
    EXPECT_EQ(run_one(sim_target(profile_linux()), t).verdict.result, Result::Pass);
    EXPECT_EQ(run_one(sim_target(profile_seastar()), t).verdict.result, Result::FTarget);
  }
}

TEST(Checksum, FixingMiddleboxIsPathFailure) {
  for (TestId t : {TestId::ChecksumIncorrect, TestId::ChecksumZero}) {
    expect_path(run_one(sim_target(profile_linux(), {mb(2, MiddleboxKind::FixChecksum)}), t), 2);
  }
}

TEST(Options, AllTestbedStacksPass) {
  for (auto p : {profile_linux(), profile_windows(), profile_macos(), profile_uip(), profile_lwip(),
                 profile_seastar()}) {
    EXPECT_EQ(run_one(sim_target(p), TestId::OptionSupport).verdict.result, Result::Pass) << p.name;
    EXPECT_EQ(run_one(sim_target(p), TestId::OptionUnknown).verdict.result, Result::Pass) << p.name;
  }
}

TEST(Options, Failures) {
  expect_path(run_one(sim_target(profile_linux(), {mb(4, MiddleboxKind::StripPadding)}), TestId::OptionSupport), 4);
  expect_path(run_one(sim_target(profile_linux(), {mb(1, MiddleboxKind::StripUnknownOption)}),
                      TestId::OptionUnknown),
              1);
  const auto rst = run_one(sim_target(with({Deviation::RstOnOptions})), TestId::OptionSupport);
  EXPECT_EQ(rst.verdict.result, Result::FTarget);
  EXPECT_EQ(rst.verdict.notes.at("response"), "rst");
  EXPECT_EQ(run_one(sim_target(with({Deviation::DropUnknownOption})), TestId::OptionUnknown).verdict.result,
            Result::FTarget);
}

TEST(Mss, Support) {
  const auto linux_run = run_one(sim_target(profile_linux()), TestId::MssSupport);
  EXPECT_EQ(linux_run.verdict.result, Result::Pass);
  EXPECT_LE(std::stoi(linux_run.verdict.notes.at("max_payload")), 515);
  EXPECT_EQ(linux_run.verdict.notes.at("data_segments"), "4");
  const auto win = run_one(sim_target(profile_windows()), TestId::MssSupport);
  EXPECT_EQ(win.verdict.result, Result::FTarget);
  EXPECT_EQ(win.verdict.notes.at("max_payload"), "536");
  expect_path(run_one(sim_target(profile_linux(), {mb(2, MiddleboxKind::MssClamp, 1460)}), TestId::MssSupport), 2);
}

TEST(Mss, Missing) {
  EXPECT_EQ(run_one(sim_target(profile_linux()), TestId::MssMissing).verdict.result, Result::Pass);
  EXPECT_EQ(run_one(sim_target(profile_macos()), TestId::MssMissing).verdict.result, Result::FTarget);
  for (int hop : {1, 3, 7}) {
    expect_path(run_one(sim_target(profile_linux(), {mb(hop, MiddleboxKind::MssInsert, 1460)}), TestId::MssMissing),
                hop);
  }
}

TEST(Reserved, SubVerdicts) {
  const auto linux_run = run_one(sim_target(profile_linux()), TestId::Reserved);
  EXPECT_EQ(linux_run.verdict.result, Result::Pass);
  EXPECT_EQ(linux_run.verdict.sub_results.at("syn_stage"), Result::Pass);
  EXPECT_EQ(linux_run.verdict.sub_results.at("ack_stage"), Result::Pass);

  const auto defer = run_one(sim_target(with({Deviation::DeferAccept})), TestId::Reserved);
  EXPECT_EQ(defer.verdict.sub_results.at("syn_stage"), Result::Pass);
  EXPECT_EQ(defer.verdict.sub_results.at("ack_stage"), Result::FTarget);
  EXPECT_EQ(defer.verdict.notes.at("advisory"), "possible defer-accept");
  EXPECT_EQ(defer.verdict.result, Result::FTarget);

  const auto drop = run_one(sim_target(with({Deviation::DropReservedSyn})), TestId::Reserved);
  EXPECT_EQ(drop.verdict.sub_results.at("syn_stage"), Result::FTarget);

  const auto echo = run_one(sim_target(with({Deviation::EchoReservedBits})), TestId::Reserved);
  EXPECT_EQ(echo.verdict.sub_results.at("syn_stage"), Result::FTarget);
}

TEST(Reserved, DisambiguationNote) {
  SuiteConfig cfg;
  cfg.disambiguate_defer_accept = true;
  const auto defer = run_one(sim_target(with({Deviation::DeferAccept})), TestId::Reserved, cfg);
  EXPECT_EQ(defer.verdict.notes.at("disambiguation"), "data_accepted");
}

TEST(Reserved, ClearingMiddleboxIsPathFailure) {
  expect_path(run_one(sim_target(profile_linux(), {mb(5, MiddleboxKind::ClearReserved)}), TestId::Reserved), 5);
}

TEST(Urgent, Outcomes) {
  EXPECT_EQ(run_one(sim_target(profile_linux()), TestId::UrgentPointer).verdict.result, Result::Pass);

  const auto uip = run_one(sim_target(profile_uip()), TestId::UrgentPointer);
  EXPECT_EQ(uip.verdict.result, Result::FTarget);
  EXPECT_EQ(uip.verdict.notes.at("post_liveness"), "UNREACHABLE");

  const auto silent = run_one(sim_target(with({Deviation::DropUrgentSilently})), TestId::UrgentPointer);
  EXPECT_EQ(silent.verdict.result, Result::FTarget);
  EXPECT_EQ(silent.verdict.notes.at("evidence"), "silent");

  const auto rst = run_one(sim_target(with({Deviation::RstOnUrgent})), TestId::UrgentPointer);
  EXPECT_EQ(rst.verdict.notes.at("evidence"), "rst");

  EXPECT_EQ(run_one(sim_target(profile_linux()), TestId::UrgentPointer).verdict.notes.at("post_liveness"),
            "REACHABLE");

  auto restart = profile_uip();
  restart.restart_after_crash = true;
  const auto rec = run_one(sim_target(restart), TestId::UrgentPointer);
  EXPECT_EQ(rec.verdict.notes.at("post_liveness"), "REACHABLE");
  EXPECT_EQ(rec.verdict.notes.at("recovered"), "true");
}

TEST(Urgent, PointerArithmetic) {
  const auto run = run_one(sim_target(profile_linux()), TestId::UrgentPointer);
  std::optional<std::uint32_t> iss;
  std::vector<Segment> urgent;
  for (const Frame* f : run.exchange.frames_of("main")) {
    if (f->dir != Direction::Out) continue;
    if (f->role == "probe" && !iss) iss = parse(f->bytes).tcp.seq;
    if (f->role == "urgent") urgent.push_back(parse(f->bytes));
  }
  ASSERT_TRUE(iss);
  ASSERT_EQ(urgent.size(), 3u);
  std::size_t total = 0;
  for (const auto& s : urgent) {
    EXPECT_TRUE(s.tcp.has(tcp_flag::kUrg));
    EXPECT_EQ(s.tcp.seq + s.tcp.urgent_pointer, *iss + 1 + 501);
    total += s.payload.size();
  }
  EXPECT_EQ(total, 501u);
}

TEST(Classify, ReclassifyFromJsonIsStable) {
  SimBench b(sim_target(profile_windows(), {mb(3, MiddleboxKind::MssInsert, 1460)}));
  for (const auto& r : b.suite().runs) {
    nlohmann::json j = r.exchange;
    const auto back = j.get<ProbeExchange>();
    EXPECT_EQ(back, r.exchange);
    EXPECT_EQ(classify(back), r.verdict) << to_string(r.verdict.test);
  }
}

TEST(Classify, TimeoutOnlyExchangeIsUnknown) {
  ProbeExchange ex;
  ex.test = "ChecksumIncorrect";
  ex.stages.push_back({"syn", {}, {}, std::nullopt});
  ex.stages.push_back({"ack", {}, {}, std::nullopt});
  EXPECT_EQ(classify(ex).result, Result::Unk);
  ex.test = "NoSuchTest";
  EXPECT_THROW(classify(ex), Error);
}

TEST(Config, OverridesAndValidation) {
  SuiteConfig cfg;
  apply_suite_overrides(cfg, nlohmann::json{{"deadline_us", 1000000}, {"tests", {"RESERVED", "UrgentPointer"}}});
  EXPECT_EQ(cfg.deadline, Micros{1'000'000});
  EXPECT_EQ(cfg.tests, (std::vector<TestId>{TestId::Reserved, TestId::UrgentPointer}));
  SuiteConfig bad;
  EXPECT_THROW(apply_suite_overrides(bad, nlohmann::json{{"max_ttl", 31}}), Error);
  EXPECT_THROW(apply_suite_overrides(bad, nlohmann::json{{"tests", {"Bogus"}}}), Error);
}

TEST(Elicitor, PaddedSizes) {
  EXPECT_EQ(elicitor({Ipv4Addr{1, 2, 3, 4}, 80}, "example.org", 501).size(), 501u);
  const Bytes tls = elicitor({Ipv4Addr{1, 2, 3, 4}, 443}, "example.org", 501);
  EXPECT_EQ(tls.size(), 501u);
  EXPECT_EQ(tls[0], 0x16);
  const Bytes http = elicitor({Ipv4Addr{1, 2, 3, 4}, 80}, "example.org");
  EXPECT_EQ(std::string(http.begin(), http.begin() + 4), "GET ");
}

TEST(Ports, AllocatorNeverHandsOutLivePort) {
  PortAllocator p(50000, 50002);
  const auto a = p.acquire();
  const auto b = p.acquire();
  const auto c = p.acquire();
  EXPECT_NE(a, b);
  EXPECT_NE(b, c);
  EXPECT_NE(a, c);
  EXPECT_THROW(p.acquire(), Error);
  p.release(b);
  EXPECT_EQ(p.acquire(), b);
}
