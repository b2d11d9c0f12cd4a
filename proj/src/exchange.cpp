#include "tcpconf/exchange.hpp"

#include <array>
#include <charconv>

#include <json.hpp>

#include "tcpconf/error.hpp"

namespace tcpconf {

namespace {

using nlohmann::json;

struct TestName {
  TestId id;
  std::string_view name;
  std::string_view upper;
};

constexpr std::array<TestName, 8> kTests{{
    {TestId::ChecksumIncorrect, "ChecksumIncorrect", "CHECKSUM_INCORRECT"},
    {TestId::ChecksumZero, "ChecksumZero", "CHECKSUM_ZERO"},
    {TestId::OptionSupport, "OptionSupport", "OPTION_SUPPORT"},
    {TestId::OptionUnknown, "OptionUnknown", "OPTION_UNKNOWN"},
    {TestId::MssSupport, "MSSSupport", "MSS_SUPPORT"},
    {TestId::MssMissing, "MSSMissing", "MSS_MISSING"},
    {TestId::Reserved, "Reserved", "RESERVED"},
    {TestId::UrgentPointer, "UrgentPointer", "URGENT_POINTER"},
}};

constexpr std::array<std::pair<Result, std::string_view>, 4> kResults{{
    {Result::Pass, "PASS"},
    {Result::Unk, "UNK"},
    {Result::FTarget, "F_TARGET"},
    {Result::FPath, "F_PATH"},
}};

std::string endpoint_string(const Endpoint& e) { return e.to_string(); }

Endpoint endpoint_parse(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos) throw Error(Errc::InvalidSpec, "bad endpoint '" + s + "'");
  auto addr = Ipv4Addr::parse(std::string_view(s).substr(0, colon));
  unsigned port = 0;
  auto [ptr, ec] = std::from_chars(s.data() + colon + 1, s.data() + s.size(), port);
  if (!addr || ec != std::errc{} || ptr != s.data() + s.size() || port > 65535)
    throw Error(Errc::InvalidSpec, "bad endpoint '" + s + "'");
  return Endpoint{*addr, static_cast<std::uint16_t>(port)};
}

Result result_parse(const std::string& s) {
  auto r = result_from_string(s);
  if (!r) throw Error(Errc::InvalidSpec, "unknown result '" + s + "'");
  return *r;
}

}  // namespace

std::string to_string(TestId t) {
  for (const auto& n : kTests)
    if (n.id == t) return std::string(n.name);
  return "?";
}

std::optional<TestId> test_from_string(std::string_view name) {
  for (const auto& n : kTests)
    if (n.name == name || n.upper == name) return n.id;
  return std::nullopt;
}

const std::vector<TestId>& all_tests() {
  static const std::vector<TestId> kAll = [] {
    std::vector<TestId> v;
    for (const auto& n : kTests) v.push_back(n.id);
    return v;
  }();
  return kAll;
}

std::string to_string(Result r) {
  for (const auto& [res, name] : kResults)
    if (res == r) return std::string(name);
  return "?";
}

std::optional<Result> result_from_string(std::string_view name) {
  for (const auto& [res, n] : kResults)
    if (n == name) return res;
  return std::nullopt;
}

const Stage* ProbeExchange::stage(const std::string& name) const {
  for (const auto& s : stages)
    if (s.name == name) return &s;
  return nullptr;
}

std::vector<const Frame*> ProbeExchange::frames_of(const std::string& name) const {
  std::vector<const Frame*> out;
  for (const auto& f : frames)
    if (f.stage == name) out.push_back(&f);
  return out;
}

void to_json(json& j, const ProbeExchange& ex) {
  j = json::object();
  j["test"] = ex.test;
  j["target"] = endpoint_string(ex.target);
  j["params"] = ex.params;
  j["stages"] = json::array();
  for (const auto& s : ex.stages) {
    json js{{"name", s.name}, {"local", endpoint_string(s.local)}, {"remote", endpoint_string(s.remote)}};
    js["carriers"] = s.fan_carriers ? json(s.fan_carriers->bits()) : json(nullptr);
    j["stages"].push_back(std::move(js));
  }
  j["frames"] = json::array();
  for (const auto& f : ex.frames) {
    j["frames"].push_back({{"t", f.time.count()},
                           {"dir", f.dir == Direction::Out ? "out" : "in"},
                           {"stage", f.stage},
                           {"role", f.role},
                           {"hex", to_hex(f.bytes)}});
  }
}

void from_json(const json& j, ProbeExchange& ex) {
  ex = ProbeExchange{};
  ex.test = j.at("test").get<std::string>();
  ex.target = endpoint_parse(j.at("target").get<std::string>());
  ex.params = j.at("params").get<std::map<std::string, std::string>>();
  for (const auto& js : j.at("stages")) {
    Stage s;
    s.name = js.at("name").get<std::string>();
    s.local = endpoint_parse(js.at("local").get<std::string>());
    s.remote = endpoint_parse(js.at("remote").get<std::string>());
    if (!js.at("carriers").is_null()) s.fan_carriers = CarrierSet::from_bits(js.at("carriers").get<std::uint8_t>());
    ex.stages.push_back(std::move(s));
  }
  for (const auto& jf : j.at("frames")) {
    Frame f;
    f.time = Micros{jf.at("t").get<std::int64_t>()};
    f.dir = jf.at("dir").get<std::string>() == "out" ? Direction::Out : Direction::In;
    f.stage = jf.at("stage").get<std::string>();
    f.role = jf.at("role").get<std::string>();
    auto bytes = from_hex(jf.at("hex").get<std::string>());
    if (!bytes) throw Error(Errc::InvalidSpec, "bad frame hex");
    f.bytes = std::move(*bytes);
    ex.frames.push_back(std::move(f));
  }
}

void to_json(json& j, const Verdict& v) {
  j = json::object();
  j["test"] = to_string(v.test);
  j["result"] = to_string(v.result);
  json subs = json::object();
  for (const auto& [k, r] : v.sub_results) subs[k] = to_string(r);
  j["sub_results"] = std::move(subs);
  j["notes"] = v.notes;
  if (!v.path) {
    j["path"] = nullptr;
    return;
  }
  json p = json::object();
  p["modified"] = v.path->modified;
  p["first_modifying_hop"] = v.path->first_modifying_hop ? json(*v.path->first_modifying_hop) : json(nullptr);
  p["relevant_fields"] = json::array();
  for (auto f : v.path->relevant_fields) p["relevant_fields"].push_back(to_string(f));
  p["evidence"] = json::array();
  for (const auto& [hop, d] : v.path->evidence)
    p["evidence"].push_back({{"hop", hop}, {"field", to_string(d.field)}, {"sent", d.sent}, {"observed", d.observed}});
  j["path"] = std::move(p);
}

void from_json(const json& j, Verdict& v) {
  v = Verdict{};
  auto t = test_from_string(j.at("test").get<std::string>());
  if (!t) throw Error(Errc::InvalidSpec, "unknown test id");
  v.test = *t;
  v.result = result_parse(j.at("result").get<std::string>());
  for (const auto& [k, r] : j.at("sub_results").items()) v.sub_results[k] = result_parse(r.get<std::string>());
  v.notes = j.at("notes").get<std::map<std::string, std::string>>();
  const auto& p = j.at("path");
  if (p.is_null()) return;
  PathDiagnosis d;
  d.modified = p.at("modified").get<bool>();
  if (!p.at("first_modifying_hop").is_null()) d.first_modifying_hop = p.at("first_modifying_hop").get<int>();
  auto field = [](const json& f) {
    auto parsed = field_from_string(f.get<std::string>());
    if (!parsed) throw Error(Errc::InvalidSpec, "unknown field");
    return *parsed;
  };
  for (const auto& f : p.at("relevant_fields")) d.relevant_fields.push_back(field(f));
  for (const auto& e : p.at("evidence"))
    d.evidence.emplace_back(e.at("hop").get<int>(),
                            FieldDiff{field(e.at("field")), e.at("sent").get<std::string>(),
                                      e.at("observed").get<std::string>()});
  v.path = std::move(d);
}

}  // namespace tcpconf
