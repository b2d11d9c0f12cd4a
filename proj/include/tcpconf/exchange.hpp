#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tcpconf/tracer.hpp"
#include "tcpconf/transport.hpp"

namespace tcpconf {

enum class TestId {
  ChecksumIncorrect,
  ChecksumZero,
  OptionSupport,
  OptionUnknown,
  MssSupport,
  MssMissing,
  Reserved,
  UrgentPointer,
};

// Names as used in reports: "ChecksumIncorrect", ..., "MSSSupport", "UrgentPointer".
std::string to_string(TestId t);
// Accepts report names and upper-snake ids ("CHECKSUM_INCORRECT").
std::optional<TestId> test_from_string(std::string_view name);
const std::vector<TestId>& all_tests();

enum class Result { Pass, Unk, FTarget, FPath };

std::string to_string(Result r);  // PASS, UNK, F_TARGET, F_PATH
std::optional<Result> result_from_string(std::string_view name);

enum class Direction { Out, In };

struct Frame {
  Micros time{0};
  Direction dir = Direction::Out;
  std::string stage;
  std::string role;  // outbound: probe, fan, ack, data, urgent, rst...; inbound: tcp, icmp
  Bytes bytes;       // full IPv4 datagram

  bool operator==(const Frame&) const = default;
};

struct Stage {
  std::string name;
  Endpoint local;
  Endpoint remote;
  std::optional<CarrierSet> fan_carriers;  // set when the stage's first segment was fanned

  bool operator==(const Stage&) const = default;
};

// Append-only record of one test against one target. Classification reads only
// this structure, so stored evidence can be re-classified offline.
struct ProbeExchange {
  std::string test;
  Endpoint target;
  std::map<std::string, std::string> params;
  std::vector<Stage> stages;
  std::vector<Frame> frames;

  const Stage* stage(const std::string& name) const;
  std::vector<const Frame*> frames_of(const std::string& stage) const;

  bool operator==(const ProbeExchange&) const = default;
};

struct Verdict {
  TestId test = TestId::ChecksumIncorrect;
  Result result = Result::Unk;
  std::map<std::string, Result> sub_results;
  std::map<std::string, std::string> notes;
  std::optional<PathDiagnosis> path;

  bool operator==(const Verdict&) const = default;
};

void to_json(nlohmann::json& j, const ProbeExchange& ex);
void from_json(const nlohmann::json& j, ProbeExchange& ex);
void to_json(nlohmann::json& j, const Verdict& v);
void from_json(const nlohmann::json& j, Verdict& v);

}  // namespace tcpconf
