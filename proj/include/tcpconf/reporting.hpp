#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tcpconf/exchange.hpp"
#include "tcpconf/targets.hpp"

namespace tcpconf {

struct ResultRecord {
  std::string run_id;
  TargetSpec target;
  TestId test = TestId::ChecksumIncorrect;
  Result result = Result::Unk;
  std::map<std::string, Result> sub_results;
  std::map<std::string, std::string> notes;
  std::optional<int> path_hop;
  std::string evidence_ref;
  Micros started{0};
  Micros finished{0};

  bool operator==(const ResultRecord&) const = default;
};

struct TargetStatus {
  TargetSpec target;
  bool reachable = false;
  std::string liveness_ref;

  bool operator==(const TargetStatus&) const = default;
};

std::string evidence_ref(const std::string& run_id, const TargetSpec& target, const std::string& test);

nlohmann::json to_json(const ResultRecord& r);
ResultRecord record_from_json(const nlohmann::json& j);

// Run directory: records.jsonl, evidence.jsonl and targets.jsonl, each append-only.
class RunStore {
 public:
  // Creates the directory if needed and loads whatever it already holds.
  static RunStore create(const std::filesystem::path& dir, const std::string& run_id);
  // Throws RunNotFound when the directory holds no run.
  static RunStore open(const std::filesystem::path& dir);

  const std::string& run_id() const { return run_id_; }
  const std::filesystem::path& dir() const { return dir_; }

  void store_evidence(const std::string& ref, const ProbeExchange& ex);
  // Idempotent on (target, test, run). Throws MissingEvidence when the
  // evidence_ref was not stored first.
  void record(const ResultRecord& r);
  void record_target(const TargetStatus& t);

  const std::vector<ResultRecord>& records() const { return records_; }
  const std::vector<TargetStatus>& targets() const { return targets_; }
  std::optional<ProbeExchange> evidence(const std::string& ref) const;
  bool has_evidence(const std::string& ref) const { return evidence_refs_.contains(ref); }

 private:
  RunStore(std::filesystem::path dir, std::string run_id) : dir_(std::move(dir)), run_id_(std::move(run_id)) {}
  void load();
  void append(const std::string& file, const std::string& line);

  std::filesystem::path dir_;
  std::string run_id_;
  std::vector<ResultRecord> records_;
  std::set<std::string> record_keys_;
  std::vector<TargetStatus> targets_;
  std::set<std::string> target_keys_;
  std::set<std::string> evidence_refs_;
};

inline constexpr const char* kReservedSynRow = "Reserved-SYN";

// Percentages are held in thousandths of a percent; pct_pass is derived so that
// every row sums to exactly 100.000.
struct AggregateRow {
  std::string test;
  std::string dataset;
  std::size_t n_reachable = 0;
  std::size_t n_unk = 0;
  std::size_t n_f_target = 0;
  std::size_t n_f_path = 0;
  std::int64_t unk_milli = 0;
  std::int64_t f_target_milli = 0;
  std::int64_t f_path_milli = 0;
  bool unk_applicable = true;

  std::int64_t pass_milli() const { return 100'000 - unk_milli - f_target_milli - f_path_milli; }
  bool operator==(const AggregateRow&) const = default;
};

std::string format_milli(std::int64_t milli);  // 2000 -> "2.000"

// Rows for every test plus Reserved-SYN over reachable targets whose "dataset"
// label equals `dataset` (empty selects all). Throws EmptyRun when no target in
// the selection is reachable.
std::vector<AggregateRow> aggregate(const std::vector<ResultRecord>& records,
                                    const std::vector<TargetStatus>& targets, const std::string& dataset = "");

std::vector<std::string> datasets(const std::vector<TargetStatus>& targets);

struct WwwDifferential {
  std::size_t n_pairs = 0;
  std::size_t n_differing = 0;
  std::map<std::string, std::size_t> per_test_discordance;

  std::int64_t differing_milli() const;
};

WwwDifferential www_differential(const std::vector<ResultRecord>& records, const std::vector<DomainPair>& pairs);

enum class ExportFormat { Jsonl, Csv };

std::string export_records(const std::vector<ResultRecord>& records, ExportFormat format);
void export_records(const std::vector<ResultRecord>& records, ExportFormat format, const std::filesystem::path& out);
std::vector<ResultRecord> import_records(const std::string& text, ExportFormat format);

std::string render_table(const std::vector<ResultRecord>& records, const std::vector<TargetStatus>& targets);
std::string render_www(const WwwDifferential& w);
std::string render_evidence(const ProbeExchange& ex, const std::optional<ResultRecord>& record);

}  // namespace tcpconf
