#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tcpconf/conformance.hpp"
#include "tcpconf/netsim.hpp"
#include "tcpconf/reporting.hpp"
#include "tcpconf/targets.hpp"

namespace tcpconf::cli {

enum class Mode { Scan, Sim };

struct RunConfig {
  Mode mode = Mode::Sim;
  std::filesystem::path targets_path;
  std::filesystem::path topology_path;
  std::filesystem::path blacklist_path;
  bool allow_empty_blacklist = false;
  std::vector<TestId> enabled_tests = all_tests();
  std::uint32_t rate_pps = 10000;
  std::uint32_t burst = 32;
  int parallelism = 4;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;
  std::string run_id;  // defaults to "<mode>-<seed>"
  std::string source_addr;  // scanner address for SCAN mode
  std::size_t sample_cap = 0;  // 0 disables per-group sampling
  std::string group_label = "cdn_name";
  nlohmann::json suite = nlohmann::json::object();  // SuiteConfig overrides
};

// Applies keys of a JSON config object on top of `cfg`. Throws ConfigError.
void apply_config_file(RunConfig& cfg, const nlohmann::json& j);
// Throws ConfigError / FileUnreadable for invalid combinations.
void validate(const RunConfig& cfg);

// Labels "port" on a simulated target select its port (default 80).
std::vector<TargetSpec> targets_of(const netsim::Topology& topo);

// Runs the suite against each target over its own simulated network; results
// are in target order and independent of `parallelism`.
std::vector<TargetReport> run_sim_suite(const netsim::Topology& topo, const std::vector<TargetSpec>& targets,
                                        const SuiteConfig& suite, PacerConfig pacing, int parallelism);

void persist(RunStore& store, const TargetSpec& target, const TargetReport& report);

int cmd_scan(const RunConfig& cfg, std::ostream& out, std::ostream& err);

enum class ReportKind { Table, Www, Evidence };
// Throws RunNotFound for a missing run or unknown target/test.
std::string cmd_report(const std::filesystem::path& run_dir, ReportKind kind, const std::string& target = "",
                       const std::string& test = "");

// Entry point shared by the executable and tests; args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tcpconf::cli
