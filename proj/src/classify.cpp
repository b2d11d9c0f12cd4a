#include "tcpconf/classify.hpp"

#include <algorithm>

#include "tcpconf/error.hpp"

namespace tcpconf {

namespace {

bool seq_lt(std::uint32_t a, std::uint32_t b) { return static_cast<std::int32_t>(a - b) < 0; }

struct Packet {
  Micros time;
  std::string role;
  Segment seg;
};

std::vector<Packet> tcp_frames(const ProbeExchange& ex, const std::string& stage, Direction dir) {
  std::vector<Packet> out;
  for (const auto* f : ex.frames_of(stage)) {
    if (f->dir != dir || f->role == "icmp") continue;
    try {
      out.push_back({f->time, f->role, parse(f->bytes)});
    } catch (const Error&) {
    }
  }
  return out;
}

bool is_synack(const Segment& s) { return s.tcp.has(tcp_flag::kSyn | tcp_flag::kAck); }
bool is_rst(const Segment& s) { return s.tcp.has(tcp_flag::kRst); }

bool any_of(const std::vector<Packet>& v, bool (*pred)(const Segment&)) {
  return std::any_of(v.begin(), v.end(), [&](const Packet& p) { return pred(p.seg); });
}

std::optional<Packet> first_role(const std::vector<Packet>& v, const std::string& role) {
  for (const auto& p : v)
    if (p.role == role) return p;
  return std::nullopt;
}

std::size_t param(const ProbeExchange& ex, const std::string& key, std::size_t fallback) {
  auto it = ex.params.find(key);
  if (it == ex.params.end()) return fallback;
  return static_cast<std::size_t>(std::stoul(it->second));
}

Result worst(Result a, Result b) {
  auto rank = [](Result r) {
    switch (r) {
      case Result::Pass: return 0;
      case Result::Unk: return 1;
      case Result::FTarget: return 2;
      case Result::FPath: return 3;
    }
    return 0;
  };
  return rank(a) >= rank(b) ? a : b;
}

// No SYN/ACK means the remote never accepted; RST vs silence is kept as a note.
void handshake_note(Verdict& v, const std::vector<Packet>& in, const std::string& key) {
  v.notes[key] = any_of(in, is_synack) ? "synack" : any_of(in, is_rst) ? "rst" : "none";
}

void classify_checksum(const ProbeExchange& ex, Verdict& v) {
  const auto syn_in = tcp_frames(ex, "syn", Direction::In);
  handshake_note(v, syn_in, "syn_stage_response");
  v.sub_results["syn_stage"] = any_of(syn_in, is_synack) ? Result::FTarget : Result::Pass;

  const auto ack_out = tcp_frames(ex, "ack", Direction::Out);
  const auto ack_in = tcp_frames(ex, "ack", Direction::In);
  auto elicitor = first_role(ack_out, "elicitor");
  if (!any_of(ack_in, is_synack) || !elicitor) {
    v.sub_results["ack_stage"] = Result::Unk;
  } else {
    const std::uint32_t start = elicitor->seg.tcp.seq;
    bool acknowledged = false;
    for (const auto& p : ack_in) {
      if (p.time < elicitor->time) continue;
      if (!p.seg.payload.empty() && !is_rst(p.seg)) acknowledged = true;
      if (p.seg.tcp.has(tcp_flag::kAck) && !is_rst(p.seg) && seq_lt(start, p.seg.tcp.ack)) acknowledged = true;
    }
    v.sub_results["ack_stage"] = acknowledged ? Result::FTarget : Result::Pass;
  }
  v.result = worst(v.sub_results["syn_stage"], v.sub_results["ack_stage"]);
}

void classify_option(const ProbeExchange& ex, Verdict& v) {
  const auto in = tcp_frames(ex, "syn", Direction::In);
  handshake_note(v, in, "response");
  v.result = any_of(in, is_synack) ? Result::Pass : Result::FTarget;
}

void classify_mss(const ProbeExchange& ex, Verdict& v) {
  const auto in = tcp_frames(ex, "main", Direction::In);
  handshake_note(v, in, "response");
  if (!any_of(in, is_synack)) {
    // MSSSupport has no UNK outcome for a refused handshake.
    v.result = v.test == TestId::MssSupport ? Result::FTarget : Result::Unk;
    return;
  }
  const std::size_t limit = param(ex, "mss_limit", v.test == TestId::MssSupport ? 515 : 536);
  std::size_t max_payload = 0;
  std::size_t data_segments = 0;
  for (const auto& p : in) {
    if (p.seg.payload.empty()) continue;
    ++data_segments;
    max_payload = std::max(max_payload, p.seg.payload.size());
  }
  v.notes["data_segments"] = std::to_string(data_segments);
  v.notes["max_payload"] = std::to_string(max_payload);
  if (data_segments == 0)
    v.result = Result::Unk;
  else
    v.result = max_payload > limit ? Result::FTarget : Result::Pass;
}

void classify_reserved(const ProbeExchange& ex, Verdict& v) {
  const auto in = tcp_frames(ex, "main", Direction::In);
  const auto out = tcp_frames(ex, "main", Direction::Out);
  auto first_synack = std::find_if(in.begin(), in.end(), [](const Packet& p) { return is_synack(p.seg); });
  if (first_synack == in.end()) {
    v.sub_results["syn_stage"] = Result::FTarget;
    v.notes["syn_stage"] = any_of(in, is_rst) ? "rst" : "no_synack";
    v.result = Result::FTarget;
    return;
  }
  if (first_synack->seg.tcp.reserved != 0) {
    v.sub_results["syn_stage"] = Result::FTarget;
    v.notes["syn_stage"] = "reserved_echoed";
  } else {
    v.sub_results["syn_stage"] = Result::Pass;
  }

  auto ack = first_role(out, "ack");
  if (ack) {
    Micros last_before = first_synack->time;
    std::vector<Micros> retransmits;
    for (const auto& p : in) {
      if (!is_synack(p.seg)) continue;
      if (p.time <= ack->time)
        last_before = p.time;
      else
        retransmits.push_back(p.time);
    }
    v.notes["synack_retransmissions"] = std::to_string(retransmits.size());
    if (retransmits.empty()) {
      v.sub_results["ack_stage"] = Result::Pass;
    } else {
      v.sub_results["ack_stage"] = Result::FTarget;
      // Timer-driven retransmission backs off: each gap is at least the previous one.
      bool backoff = true;
      Micros prev_gap{0};
      Micros prev = last_before;
      for (auto t : retransmits) {
        const Micros gap = t - prev;
        if (gap < prev_gap) backoff = false;
        prev_gap = gap;
        prev = t;
      }
      if (backoff) v.notes["advisory"] = "possible defer-accept";
    }
    if (auto probe = first_role(out, "disambiguate")) {
      const std::uint32_t end = probe->seg.tcp.seq + static_cast<std::uint32_t>(probe->seg.payload.size());
      bool acked = false;
      for (const auto& p : in)
        if (p.time > probe->time && p.seg.tcp.has(tcp_flag::kAck) && !seq_lt(p.seg.tcp.ack, end)) acked = true;
      v.notes["disambiguation"] = acked ? "data_accepted" : "data_unacknowledged";
    }
  }
  v.result = v.sub_results["syn_stage"];
  if (auto it = v.sub_results.find("ack_stage"); it != v.sub_results.end()) v.result = worst(v.result, it->second);
}

void classify_urgent(const ProbeExchange& ex, Verdict& v) {
  const auto in = tcp_frames(ex, "main", Direction::In);
  const auto out = tcp_frames(ex, "main", Direction::Out);
  auto syn = first_role(out, "probe");
  auto urgent = first_role(out, "urgent");
  if (!any_of(in, is_synack) || !syn || !urgent) {
    v.result = Result::Unk;
    v.notes["handshake"] = "failed";
    return;
  }
  const std::uint32_t target = syn->seg.tcp.seq + 1 + static_cast<std::uint32_t>(param(ex, "urgent_total", 501));
  bool acked = false;
  bool reset = false;
  for (const auto& p : in) {
    if (p.time < urgent->time) continue;
    if (is_rst(p.seg)) reset = true;
    else if (p.seg.tcp.has(tcp_flag::kAck) && !seq_lt(p.seg.tcp.ack, target)) acked = true;
  }
  if (acked) {
    v.result = Result::Pass;
  } else {
    v.result = Result::FTarget;
    v.notes["evidence"] = reset ? "rst" : "silent";
  }
  if (ex.stage("post")) {
    const auto post_in = tcp_frames(ex, "post", Direction::In);
    const bool reachable = any_of(post_in, is_synack);
    v.notes["post_liveness"] = reachable ? "REACHABLE" : "UNREACHABLE";
    if (ex.stage("old")) {
      const auto old_in = tcp_frames(ex, "old", Direction::In);
      // The old connection vanished without a RST during the test: the stack restarted.
      if (reachable && !reset && any_of(old_in, is_rst)) v.notes["recovered"] = "true";
    }
  }
}

}  // namespace

std::vector<Field> relevant_fields(TestId t) {
  switch (t) {
    case TestId::ChecksumIncorrect:
    case TestId::ChecksumZero:
      return {Field::ChecksumValid};
    case TestId::OptionSupport:
    case TestId::OptionUnknown:
      return {Field::Options};
    case TestId::MssSupport:
    case TestId::MssMissing:
      return {Field::Mss};
    case TestId::Reserved:
      return {Field::Reserved};
    case TestId::UrgentPointer:
      return {Field::Urg, Field::UrgentPointer};
  }
  return {};
}

CarrierSet fan_carriers(TestId t) {
  switch (t) {
    case TestId::OptionSupport:
    case TestId::OptionUnknown:
      return CarrierSet::all().without(Carrier::NoopCount);
    case TestId::UrgentPointer:
      return CarrierSet::all().without(Carrier::UrgentPtr).without(Carrier::AckNum);
    default:
      return CarrierSet::all();
  }
}

std::optional<PathDiagnosis> path_diagnosis(const ProbeExchange& ex, TestId t) {
  std::vector<PathObservation> observations;
  bool fanned = false;
  for (const auto& stage : ex.stages) {
    if (!stage.fan_carriers) continue;
    fanned = true;
    std::vector<Segment> fan;
    std::vector<IcmpTimeExceeded> quotes;
    for (const auto* f : ex.frames_of(stage.name)) {
      try {
        if (f->dir == Direction::Out && f->role == "fan") fan.push_back(parse(f->bytes));
        if (f->dir == Direction::In && f->role == "icmp") quotes.push_back(parse_icmp_time_exceeded(f->bytes));
      } catch (const Error&) {
      }
    }
    std::stable_sort(fan.begin(), fan.end(), [](const Segment& a, const Segment& b) { return a.ip.ttl < b.ip.ttl; });
    bool contiguous = true;
    for (std::size_t i = 0; i < fan.size(); ++i)
      if (fan[i].ip.ttl != i + 1) contiguous = false;
    if (!contiguous) continue;
    for (const auto& q : quotes) {
      try {
        if (auto obs = observe(q, fan, *stage.fan_carriers)) observations.push_back(std::move(*obs));
      } catch (const Error&) {
        // quote without any carrier: cannot be mapped to a hop
      }
    }
  }
  if (!fanned) return std::nullopt;
  const auto relevant = relevant_fields(t);
  return diagnose(observations, relevant);
}

Verdict classify(const ProbeExchange& ex) {
  auto id = test_from_string(ex.test);
  if (!id) throw Error(Errc::InvalidSpec, "unknown test '" + ex.test + "'");
  Verdict v;
  v.test = *id;
  switch (*id) {
    case TestId::ChecksumIncorrect:
    case TestId::ChecksumZero:
      classify_checksum(ex, v);
      break;
    case TestId::OptionSupport:
    case TestId::OptionUnknown:
      classify_option(ex, v);
      break;
    case TestId::MssSupport:
    case TestId::MssMissing:
      classify_mss(ex, v);
      break;
    case TestId::Reserved:
      classify_reserved(ex, v);
      break;
    case TestId::UrgentPointer:
      classify_urgent(ex, v);
      break;
  }
  v.path = path_diagnosis(ex, *id);
  if (v.path && v.path->modified) v.result = Result::FPath;
  return v;
}

}  // namespace tcpconf
