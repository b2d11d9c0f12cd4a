#include "tcpconf/reporting.hpp"

#include <cerrno>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "tcpconf/error.hpp"

namespace tcpconf {

namespace {

using nlohmann::json;

const char* kRecords = "records.jsonl";
const char* kEvidence = "evidence.jsonl";
const char* kTargets = "targets.jsonl";
const char* kRunMeta = "run.json";

std::string record_key(const ResultRecord& r) { return r.run_id + "|" + r.target.key() + "|" + to_string(r.test); }

json target_json(const TargetSpec& t) {
  return json{{"addr", t.addr.to_string()}, {"port", t.port}, {"labels", t.labels}};
}

TargetSpec target_from(const json& j) {
  TargetSpec t;
  auto a = Ipv4Addr::parse(j.at("addr").get<std::string>());
  if (!a) throw Error(Errc::InvalidSpec, "bad address in record");
  t.addr = *a;
  t.port = j.at("port").get<std::uint16_t>();
  t.labels = j.at("labels").get<std::map<std::string, std::string>>();
  return t;
}

json results_json(const std::map<std::string, Result>& m) {
  json j = json::object();
  for (const auto& [k, r] : m) j[k] = to_string(r);
  return j;
}

std::map<std::string, Result> results_from(const json& j) {
  std::map<std::string, Result> m;
  for (const auto& [k, v] : j.items()) {
    auto r = result_from_string(v.get<std::string>());
    if (!r) throw Error(Errc::InvalidSpec, "bad result in record");
    m[k] = *r;
  }
  return m;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

std::int64_t milli(std::size_t count, std::size_t n) {
  if (n == 0) return 0;
  // round half up at three decimals of a percent
  return static_cast<std::int64_t>((count * 200'000 + n) / (2 * n));
}

bool unk_applicable(const std::string& test) {
  return test == "ChecksumIncorrect" || test == "ChecksumZero" || test == "MSSMissing" || test == "UrgentPointer";
}

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

const char* kCsvHeader =
    "run_id,addr,port,labels,test,result,sub_results,notes,path_hop,evidence_ref,started_us,finished_us";

}  // namespace

std::string evidence_ref(const std::string& run_id, const TargetSpec& target, const std::string& test) {
  return run_id + "/" + target.key() + "/" + test;
}

json to_json(const ResultRecord& r) {
  json j = json::object();
  j["run_id"] = r.run_id;
  j["target"] = target_json(r.target);
  j["test"] = to_string(r.test);
  j["result"] = to_string(r.result);
  j["sub_results"] = results_json(r.sub_results);
  j["notes"] = r.notes;
  j["path_hop"] = r.path_hop ? json(*r.path_hop) : json(nullptr);
  j["evidence_ref"] = r.evidence_ref;
  j["started_us"] = r.started.count();
  j["finished_us"] = r.finished.count();
  return j;
}

ResultRecord record_from_json(const json& j) {
  try {
    ResultRecord r;
    r.run_id = j.at("run_id").get<std::string>();
    r.target = target_from(j.at("target"));
    auto t = test_from_string(j.at("test").get<std::string>());
    auto res = result_from_string(j.at("result").get<std::string>());
    if (!t || !res) throw Error(Errc::InvalidSpec, "bad test or result in record");
    r.test = *t;
    r.result = *res;
    r.sub_results = results_from(j.at("sub_results"));
    r.notes = j.at("notes").get<std::map<std::string, std::string>>();
    if (!j.at("path_hop").is_null()) r.path_hop = j.at("path_hop").get<int>();
    r.evidence_ref = j.at("evidence_ref").get<std::string>();
    r.started = Micros{j.at("started_us").get<std::int64_t>()};
    r.finished = Micros{j.at("finished_us").get<std::int64_t>()};
    return r;
  } catch (const json::exception& e) {
    throw Error(Errc::InvalidSpec, std::string("malformed record: ") + e.what());
  }
}

RunStore RunStore::create(const std::filesystem::path& dir, const std::string& run_id) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::IoError, "cannot create run directory " + dir.string() + ": " + ec.message());
  RunStore store(dir, run_id);
  const auto meta = dir / kRunMeta;
  if (!std::filesystem::exists(meta)) {
    std::ofstream out(meta);
    out << json{{"run_id", run_id}}.dump() << "\n";
    if (!out) throw Error(Errc::IoError, "cannot write " + meta.string());
  }
  store.load();
  return store;
}

RunStore RunStore::open(const std::filesystem::path& dir) {
  const auto meta = dir / kRunMeta;
  std::ifstream in(meta);
  if (!in) throw Error(Errc::RunNotFound, "no run in " + dir.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    throw Error(Errc::RunNotFound, "unreadable run metadata in " + dir.string());
  }
  RunStore store(dir, j.value("run_id", std::string{}));
  store.load();
  return store;
}

void RunStore::load() {
  for (const auto& line : read_lines(dir_ / kEvidence)) {
    auto j = json::parse(line, nullptr, false);
    if (!j.is_discarded() && j.contains("ref")) evidence_refs_.insert(j.at("ref").get<std::string>());
  }
  for (const auto& line : read_lines(dir_ / kRecords)) {
    auto r = record_from_json(json::parse(line));
    if (record_keys_.insert(record_key(r)).second) records_.push_back(std::move(r));
  }
  for (const auto& line : read_lines(dir_ / kTargets)) {
    auto j = json::parse(line);
    TargetStatus t{target_from(j.at("target")), j.at("reachable").get<bool>(), j.value("liveness_ref", "")};
    if (target_keys_.insert(t.target.key()).second) targets_.push_back(std::move(t));
  }
}

void RunStore::append(const std::string& file, const std::string& line) {
  const auto path = dir_ / file;
  std::ofstream out(path, std::ios::app);
  out << line << '\n';
  out.flush();
  if (!out) {
    if (errno == ENOSPC) throw Error(Errc::StorageFull, "no space left writing " + path.string());
    throw Error(Errc::IoError, "cannot append to " + path.string());
  }
}

void RunStore::store_evidence(const std::string& ref, const ProbeExchange& ex) {
  if (evidence_refs_.contains(ref)) return;
  append(kEvidence, json{{"ref", ref}, {"exchange", ex}}.dump());
  evidence_refs_.insert(ref);
}

void RunStore::record(const ResultRecord& r) {
  if (!evidence_refs_.contains(r.evidence_ref))
    throw Error(Errc::MissingEvidence, "evidence '" + r.evidence_ref + "' not stored");
  if (record_keys_.contains(record_key(r))) return;
  append(kRecords, to_json(r).dump());
  record_keys_.insert(record_key(r));
  records_.push_back(r);
}

void RunStore::record_target(const TargetStatus& t) {
  if (target_keys_.contains(t.target.key())) return;
  json j{{"target", target_json(t.target)}, {"reachable", t.reachable}, {"liveness_ref", t.liveness_ref}};
  append(kTargets, j.dump());
  target_keys_.insert(t.target.key());
  targets_.push_back(t);
}

std::optional<ProbeExchange> RunStore::evidence(const std::string& ref) const {
  for (const auto& line : read_lines(dir_ / kEvidence)) {
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded() || j.value("ref", "") != ref) continue;
    return j.at("exchange").get<ProbeExchange>();
  }
  return std::nullopt;
}

std::string format_milli(std::int64_t m) {
  std::ostringstream s;
  if (m < 0) {
    s << '-';
    m = -m;
  }
  s << m / 1000 << '.' << std::setw(3) << std::setfill('0') << m % 1000;
  return s.str();
}

std::vector<std::string> datasets(const std::vector<TargetStatus>& targets) {
  std::set<std::string> names;
  for (const auto& t : targets)
    if (auto d = t.target.label("dataset")) names.insert(*d);
  return {names.begin(), names.end()};
}

std::vector<AggregateRow> aggregate(const std::vector<ResultRecord>& records,
                                    const std::vector<TargetStatus>& targets, const std::string& dataset) {
  auto in_dataset = [&](const TargetSpec& t) { return dataset.empty() || t.label("dataset") == dataset; };
  std::set<std::string> reachable;
  for (const auto& t : targets)
    if (t.reachable && in_dataset(t.target)) reachable.insert(t.target.key());
  if (reachable.empty())
    throw Error(Errc::EmptyRun, "no reachable targets" + (dataset.empty() ? std::string{} : " in " + dataset));

  std::vector<AggregateRow> rows;
  auto row_for = [&](const std::string& test) -> AggregateRow& {
    for (auto& r : rows)
      if (r.test == test) return r;
    AggregateRow r;
    r.test = test;
    r.dataset = dataset.empty() ? "ALL" : dataset;
    r.unk_applicable = unk_applicable(test);
    rows.push_back(r);
    return rows.back();
  };
  for (auto t : all_tests()) {
    row_for(to_string(t));
    if (t == TestId::Reserved) row_for(kReservedSynRow);
  }
  for (const auto& rec : records) {
    if (!reachable.contains(rec.target.key())) continue;
    auto count = [&](AggregateRow& row, Result res) {
      ++row.n_reachable;
      if (res == Result::Unk) ++row.n_unk;
      if (res == Result::FTarget) ++row.n_f_target;
      if (res == Result::FPath) ++row.n_f_path;
    };
    count(row_for(to_string(rec.test)), rec.result);
    if (rec.test == TestId::Reserved) {
      Result syn = Result::Pass;
      if (rec.result == Result::FPath) {
        syn = Result::FPath;
      } else if (auto it = rec.sub_results.find("syn_stage"); it != rec.sub_results.end()) {
        syn = it->second;
      }
      count(row_for(kReservedSynRow), syn);
    }
  }
  for (auto& r : rows) {
    r.unk_milli = milli(r.n_unk, r.n_reachable);
    r.f_target_milli = milli(r.n_f_target, r.n_reachable);
    r.f_path_milli = milli(r.n_f_path, r.n_reachable);
  }
  return rows;
}

std::int64_t WwwDifferential::differing_milli() const { return milli(n_differing, n_pairs); }

WwwDifferential www_differential(const std::vector<ResultRecord>& records, const std::vector<DomainPair>& pairs) {
  std::map<std::string, std::map<std::string, Result>> by_target;
  for (const auto& r : records) by_target[r.target.key()][to_string(r.test)] = r.result;
  WwwDifferential w;
  for (const auto& p : pairs) {
    if (!p.www_target || !p.bare_target) continue;
    auto a = by_target.find(p.www_target->key());
    auto b = by_target.find(p.bare_target->key());
    if (a == by_target.end() || b == by_target.end()) continue;
    ++w.n_pairs;
    bool differs = false;
    for (const auto& [test, result] : a->second) {
      auto other = b->second.find(test);
      if (other == b->second.end() || other->second == result) continue;
      ++w.per_test_discordance[test];
      differs = true;
    }
    if (differs) ++w.n_differing;
  }
  return w;
}

std::string export_records(const std::vector<ResultRecord>& records, ExportFormat format) {
  std::string out;
  if (format == ExportFormat::Jsonl) {
    for (const auto& r : records) out += to_json(r).dump() + "\n";
    return out;
  }
  out = std::string(kCsvHeader) + "\n";
  for (const auto& r : records) {
    const std::vector<std::string> fields{
        r.run_id,
        r.target.addr.to_string(),
        std::to_string(r.target.port),
        json(r.target.labels).dump(),
        to_string(r.test),
        to_string(r.result),
        results_json(r.sub_results).dump(),
        json(r.notes).dump(),
        r.path_hop ? std::to_string(*r.path_hop) : std::string{},
        r.evidence_ref,
        std::to_string(r.started.count()),
        std::to_string(r.finished.count()),
    };
    for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + csv_quote(fields[i]);
    out += "\n";
  }
  return out;
}

void export_records(const std::vector<ResultRecord>& records, ExportFormat format, const std::filesystem::path& out) {
  std::ofstream f(out, std::ios::binary | std::ios::trunc);
  f << export_records(records, format);
  f.flush();
  if (!f) throw Error(Errc::IoError, "cannot write " + out.string());
}

std::vector<ResultRecord> import_records(const std::string& text, ExportFormat format) {
  std::vector<ResultRecord> out;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (format == ExportFormat::Jsonl) {
      out.push_back(record_from_json(json::parse(line)));
      continue;
    }
    if (header) {
      header = false;
      continue;
    }
    auto f = csv_split(line);
    if (f.size() != 12) throw Error(Errc::InvalidSpec, "CSV row has " + std::to_string(f.size()) + " fields");
    json j;
    j["run_id"] = f[0];
    j["target"] = {{"addr", f[1]}, {"port", std::stoi(f[2])}, {"labels", json::parse(f[3])}};
    j["test"] = f[4];
    j["result"] = f[5];
    j["sub_results"] = json::parse(f[6]);
    j["notes"] = json::parse(f[7]);
    j["path_hop"] = f[8].empty() ? json(nullptr) : json(std::stoi(f[8]));
    j["evidence_ref"] = f[9];
    j["started_us"] = std::stoll(f[10]);
    j["finished_us"] = std::stoll(f[11]);
    out.push_back(record_from_json(j));
  }
  return out;
}

std::string render_table(const std::vector<ResultRecord>& records, const std::vector<TargetStatus>& targets) {
  std::vector<std::string> sets = datasets(targets);
  if (sets.empty()) sets.push_back("");
  std::vector<std::vector<AggregateRow>> columns;
  std::vector<std::string> names;
  for (const auto& d : sets) {
    try {
      columns.push_back(aggregate(records, targets, d));
      names.push_back(d.empty() ? "ALL" : d);
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyRun) throw;
    }
  }
  std::ostringstream s;
  if (columns.empty()) {
    s << "no reachable targets\n";
    return s.str();
  }
  auto cell = [](const std::string& v) {
    std::ostringstream c;
    c << std::setw(9) << v;
    return c.str();
  };
  s << std::left << std::setw(18) << "Test" << std::right;
  for (const auto& n : names) s << " | " << std::left << std::setw(29) << n << std::right;
  s << "\n" << std::left << std::setw(18) << "" << std::right;
  for (std::size_t i = 0; i < names.size(); ++i) s << " | " << cell("UNK") << " " << cell("F_Target") << " " << cell("F_Path");
  s << "\n";
  for (std::size_t r = 0; r < columns.front().size(); ++r) {
    s << std::left << std::setw(18) << columns.front()[r].test << std::right;
    for (const auto& col : columns) {
      const auto& row = col[r];
      const std::string unk = !row.unk_applicable && row.n_unk == 0 ? "-" : format_milli(row.unk_milli);
      s << " | " << cell(unk) << " " << cell(format_milli(row.f_target_milli)) << " "
        << cell(format_milli(row.f_path_milli));
    }
    s << "\n";
  }
  s << std::left << std::setw(18) << "reachable" << std::right;
  for (const auto& col : columns) {
    std::size_t n = 0;
    for (const auto& row : col) n = std::max(n, row.n_reachable);
    s << " | " << std::left << std::setw(29) << n << std::right;
  }
  s << "\n";
  return s.str();
}

std::string render_www(const WwwDifferential& w) {
  std::ostringstream s;
  s << w.n_pairs << " pairs, " << w.n_differing << " differing (" << format_milli(w.differing_milli()) << "%)\n";
  for (const auto& [test, n] : w.per_test_discordance) s << "  " << test << ": " << n << "\n";
  return s.str();
}

std::string render_evidence(const ProbeExchange& ex, const std::optional<ResultRecord>& record) {
  std::ostringstream s;
  s << "test " << ex.test << " target " << ex.target.to_string() << "\n";
  if (record) {
    s << "result " << to_string(record->result);
    if (record->path_hop) s << " hop " << *record->path_hop;
    s << "\n";
    for (const auto& [k, r] : record->sub_results) s << "  " << k << " " << to_string(r) << "\n";
    for (const auto& [k, v] : record->notes) s << "  " << k << ": " << v << "\n";
  }
  for (const auto& st : ex.stages) {
    s << "stage " << st.name << " " << st.local.to_string() << " -> " << st.remote.to_string();
    if (st.fan_carriers) s << " fan[" << to_string(*st.fan_carriers) << "]";
    s << "\n";
  }
  for (const auto& f : ex.frames)
    s << f.time.count() << " " << (f.dir == Direction::Out ? "out" : "in ") << " " << f.stage << " " << f.role << " "
      << to_hex(f.bytes) << "\n";
  return s.str();
}

}  // namespace tcpconf
