#include <gtest/gtest.h>

#include <sstream>

#include "tcpconf/error.hpp"
#include "tcpconf/targets.hpp"

using namespace tcpconf;

namespace {

LoadedTargets parse_text(const std::string& text) {
  std::istringstream in(text);
  return parse_targets(in);
}

std::vector<Cidr> blacklist_of(const std::string& text) {
  std::istringstream in(text);
  return parse_blacklist(in);
}

TargetSpec spec(std::uint32_t addr, std::map<std::string, std::string> labels = {}) {
  return TargetSpec{Ipv4Addr{addr}, 80, std::move(labels)};
}

}  // namespace

TEST(Targets, ParseLine) {
  const auto t = parse_text("192.0.2.7,80,dataset=ALEXA,domain=example.org,www=false\n");
  ASSERT_EQ(t.targets.size(), 1u);
  EXPECT_TRUE(t.rejects.empty());
  const auto& s = t.targets[0];
  EXPECT_EQ(s.addr, (Ipv4Addr{192, 0, 2, 7}));
  EXPECT_EQ(s.port, 80);
  EXPECT_EQ(s.label("dataset"), "ALEXA");
  EXPECT_EQ(s.label("domain"), "example.org");
  EXPECT_EQ(s.label("www"), "false");
  EXPECT_EQ(s.key(), "192.0.2.7:80");
  EXPECT_EQ(parse_text(to_csv_line(s) + "\n").targets.at(0), s);
}

TEST(Targets, RejectsAndSkips) {
  const auto t = parse_text("addr,port\n# comment\n192.0.2.7,99999\nnot-an-ip,80\n10.0.0.1,443\n10.0.0.2,80,novalue\n");
  ASSERT_EQ(t.targets.size(), 1u);
  EXPECT_EQ(t.targets[0].port, 443);
  ASSERT_EQ(t.rejects.size(), 3u);
  EXPECT_EQ(t.rejects[0].line_no, 3u);
  EXPECT_FALSE(t.rejects[0].reason.empty());
}

TEST(Targets, EmptyFile) {
  const auto t = parse_text("");
  EXPECT_TRUE(t.targets.empty());
  EXPECT_TRUE(t.rejects.empty());
}

TEST(Targets, MissingFileIsUnreadable) {
  try {
    load_targets("/nonexistent/targets.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::FileUnreadable);
  }
}

TEST(Blacklist, Containment) {
  const auto bl = blacklist_of("10.0.0.0/8\n");
  const std::vector<TargetSpec> ts{spec(0x0a000005), spec(0xc0000207)};
  const auto r = apply_blacklist(ts, bl);
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].first.addr, (Ipv4Addr{10, 0, 0, 5}));
  EXPECT_EQ(r.kept.size(), 1u);
  EXPECT_EQ(apply_blacklist(ts, {}).kept.size(), 2u);
}

TEST(Blacklist, OverlapRemovedOnceFirstMatchLogged) {
  const auto bl = blacklist_of("# reserved\n10.0.0.0/8\n10.0.0.0/24  # lab\n\n");
  ASSERT_EQ(bl.size(), 2u);
  const auto r = apply_blacklist({spec(0x0a000005)}, bl);
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].second.to_string(), "10.0.0.0/8");
}

TEST(Blacklist, BadCidr) {
  for (const char* text : {"10.0.0.0/33", "10.0.0/8", "hello", "10.0.0.1/-1"}) {
    try {
      Cidr::parse(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::BadCidr) << text;
    }
  }
  EXPECT_TRUE(Cidr::parse("0.0.0.0/0").contains(Ipv4Addr{8, 8, 8, 8}));
  EXPECT_TRUE(Cidr::parse("192.0.2.1").contains(Ipv4Addr{192, 0, 2, 1}));
}

TEST(Sampling, CapPerCdn) {
  std::vector<TargetSpec> ts;
  for (std::uint32_t i = 0; i < 12000; ++i) ts.push_back(spec(0x0b000000 + i, {{"cdn_name", "akamai"}}));
  for (std::uint32_t i = 0; i < 50; ++i) ts.push_back(spec(0x0c000000 + i, {{"cdn_name", "small"}}));
  for (std::uint32_t i = 0; i < 20; ++i) ts.push_back(spec(0x0d000000 + i));
  const auto a = dedup_and_sample(ts, 10000, 1);
  std::size_t akamai = 0, small = 0, none = 0;
  for (const auto& t : a) {
    const auto cdn = t.label("cdn_name");
    if (!cdn) ++none;
    else if (*cdn == "akamai") ++akamai;
    else ++small;
  }
  EXPECT_EQ(akamai, 10000u);
  EXPECT_EQ(small, 50u);
  EXPECT_EQ(none, 20u);
  EXPECT_EQ(a, dedup_and_sample(ts, 10000, 1));
  EXPECT_NE(a, dedup_and_sample(ts, 10000, 2));
  EXPECT_THROW(dedup_and_sample(ts, 0, 1), Error);
}

TEST(Dedup, MergesLabels) {
  const std::vector<TargetSpec> ts{spec(1, {{"dataset", "ALEXA"}, {"domain", "a.org"}}),
                                   spec(1, {{"dataset", "CENSYS"}, {"cdn_name", "x"}}),
                                   spec(2, {{"dataset", "ALEXA"}})};
  const auto d = dedup(ts);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].label("dataset"), "ALEXA|CENSYS");
  EXPECT_EQ(d[0].label("domain"), "a.org");
  EXPECT_EQ(d[0].label("cdn_name"), "x");
}

TEST(Pairs, CompleteOnly) {
  std::vector<TargetSpec> ts;
  std::uint32_t a = 100;
  for (const char* d : {"c.org", "a.org", "b.org"}) {
    ts.push_back(spec(a++, {{"domain", d}, {"www", "true"}}));
    ts.push_back(spec(a++, {{"domain", d}, {"www", "false"}}));
  }
  ts.push_back(spec(a++, {{"domain", "bare-only.org"}, {"www", "false"}}));
  ts.push_back(spec(a++, {{"domain", "www-only.org"}, {"www", "true"}}));
  const auto pairs = pair_www(ts);
  ASSERT_EQ(pairs.size(), 3u);
  EXPECT_EQ(pairs[0].domain, "a.org");
  EXPECT_EQ(pairs[2].domain, "c.org");
  EXPECT_TRUE(pairs[0].www_target->label("www") == "true");
  EXPECT_TRUE(pairs[0].bare_target->label("www") == "false");

  const auto one = pair_www({spec(1, {{"domain", "example.org"}, {"www", "1"}}),
                             spec(2, {{"domain", "example.org"}, {"www", "0"}})});
  EXPECT_EQ(one.size(), 1u);
}
