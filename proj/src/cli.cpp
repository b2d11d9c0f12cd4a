#include "tcpconf/cli.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "tcpconf/error.hpp"
#include "tcpconf/raw_transport.hpp"
#include "tcpconf/sim_transport.hpp"

namespace tcpconf::cli {

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPrivilege = 3;

std::vector<TestId> parse_tests(const std::vector<std::string>& names) {
  std::vector<TestId> out;
  for (const auto& n : names) {
    auto t = test_from_string(n);
    if (!t) throw Error(Errc::ConfigError, "unknown test '" + n + "'");
    out.push_back(*t);
  }
  return out;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(Errc::FileUnreadable, "cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, p.string() + ": " + e.what());
  }
}

SuiteConfig suite_config(const RunConfig& cfg) {
  SuiteConfig s;
  s.tests = cfg.enabled_tests;
  s.seed = cfg.seed;
  apply_suite_overrides(s, cfg.suite);
  if (!cfg.suite.contains("tests")) s.tests = cfg.enabled_tests;
  validate(s);
  return s;
}

std::string host_of(const TargetSpec& t) {
  auto d = t.label("domain");
  if (!d) return t.addr.to_string();
  const bool www = t.label("www") == "true";
  return www ? "www." + *d : *d;
}

// Targets for the run: target file (SCAN, or SIM when given) or the topology's
// own targets, then blacklist, dedup and optional sampling.
std::vector<TargetSpec> prepare_targets(const RunConfig& cfg, const netsim::Topology* topo, std::ostream& err) {
  std::vector<TargetSpec> targets;
  if (!cfg.targets_path.empty()) {
    auto loaded = load_targets(cfg.targets_path);
    for (const auto& r : loaded.rejects)
      err << "rejected line " << r.line_no << ": " << r.reason << "\n";
    targets = std::move(loaded.targets);
  } else if (topo) {
    targets = targets_of(*topo);
  }
  if (!cfg.blacklist_path.empty()) {
    auto result = apply_blacklist(targets, load_blacklist(cfg.blacklist_path));
    for (const auto& [t, cidr] : result.removed)
      err << "blacklisted " << t.key() << " by " << cidr.to_string() << "\n";
    targets = std::move(result.kept);
  }
  if (cfg.sample_cap > 0)
    targets = dedup_and_sample(targets, cfg.sample_cap, cfg.seed, cfg.group_label);
  else
    targets = dedup(targets);
  return targets;
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::IoError, "cannot write " + p.string());
}

void write_aggregates(const RunStore& store) {
  write_text(store.dir() / "report.txt", render_table(store.records(), store.targets()));
  std::string rows;
  auto sets = datasets(store.targets());
  sets.insert(sets.begin(), "");
  for (const auto& d : sets) {
    try {
      for (const auto& r : aggregate(store.records(), store.targets(), d)) {
        json j{{"dataset", r.dataset},
               {"test", r.test},
               {"n_reachable", r.n_reachable},
               {"pct_unk", r.unk_applicable || r.n_unk ? json(format_milli(r.unk_milli)) : json("-")},
               {"pct_f_target", format_milli(r.f_target_milli)},
               {"pct_f_path", format_milli(r.f_path_milli)},
               {"pct_pass", format_milli(r.pass_milli())}};
        rows += j.dump() + "\n";
      }
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyRun) throw;
    }
  }
  write_text(store.dir() / "aggregate.jsonl", rows);
  std::vector<TargetSpec> specs;
  for (const auto& t : store.targets()) specs.push_back(t.target);
  write_text(store.dir() / "www.txt", render_www(www_differential(store.records(), pair_www(specs))));
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case Errc::ConfigError:
    case Errc::FileUnreadable:
    case Errc::InvalidSpec:
    case Errc::BadCidr:
    case Errc::ValueOutOfRange:
      return kExitConfig;
    case Errc::PrivilegeError:
      return kExitPrivilege;
    default:
      return kExitFailure;
  }
}

}  // namespace

void apply_config_file(RunConfig& cfg, const json& j) {
  try {
    if (j.contains("mode")) {
      const auto m = j.at("mode").get<std::string>();
      if (m == "scan" || m == "SCAN")
        cfg.mode = Mode::Scan;
      else if (m == "sim" || m == "SIM")
        cfg.mode = Mode::Sim;
      else
        throw Error(Errc::ConfigError, "unknown mode '" + m + "'");
    }
    auto path = [&](const char* key, std::filesystem::path& field) {
      if (j.contains(key)) field = j.at(key).get<std::string>();
    };
    path("targets", cfg.targets_path);
    path("topology", cfg.topology_path);
    path("blacklist", cfg.blacklist_path);
    path("out", cfg.output_dir);
    if (j.contains("allow_empty_blacklist")) cfg.allow_empty_blacklist = j.at("allow_empty_blacklist").get<bool>();
    if (j.contains("tests")) cfg.enabled_tests = parse_tests(j.at("tests").get<std::vector<std::string>>());
    if (j.contains("rate_pps")) cfg.rate_pps = j.at("rate_pps").get<std::uint32_t>();
    if (j.contains("burst")) cfg.burst = j.at("burst").get<std::uint32_t>();
    if (j.contains("parallelism")) cfg.parallelism = j.at("parallelism").get<int>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("run_id")) cfg.run_id = j.at("run_id").get<std::string>();
    if (j.contains("source")) cfg.source_addr = j.at("source").get<std::string>();
    if (j.contains("sample_cap")) cfg.sample_cap = j.at("sample_cap").get<std::size_t>();
    if (j.contains("group_label")) cfg.group_label = j.at("group_label").get<std::string>();
    if (j.contains("suite")) cfg.suite = j.at("suite");
  } catch (const json::exception& e) {
    throw Error(Errc::ConfigError, std::string("bad config value: ") + e.what());
  }
}

void validate(const RunConfig& cfg) {
  auto fail = [](const std::string& what) { throw Error(Errc::ConfigError, what); };
  if (cfg.rate_pps == 0) fail("rate_pps must be positive");
  if (cfg.burst == 0) fail("burst must be positive");
  if (cfg.parallelism < 1) fail("parallelism must be at least 1");
  if (cfg.output_dir.empty()) fail("an output directory is required");
  if (cfg.mode == Mode::Sim && cfg.topology_path.empty()) fail("SIM mode requires a topology");
  if (cfg.mode == Mode::Scan) {
    if (cfg.targets_path.empty()) fail("SCAN mode requires a targets file");
    if (cfg.blacklist_path.empty()) fail("SCAN mode requires a blacklist file");
    if (!Ipv4Addr::parse(cfg.source_addr)) fail("SCAN mode requires --source with the scanner's IPv4 address");
  }
  for (const auto* p : {&cfg.targets_path, &cfg.topology_path, &cfg.blacklist_path}) {
    if (!p->empty() && !std::filesystem::is_regular_file(*p))
      throw Error(Errc::FileUnreadable, "cannot read " + p->string());
  }
  if (cfg.mode == Mode::Scan && !cfg.allow_empty_blacklist && load_blacklist(cfg.blacklist_path).empty())
    fail("blacklist is empty; pass --allow-empty-blacklist to scan without exclusions");
  suite_config(cfg);
}

std::vector<TargetSpec> targets_of(const netsim::Topology& topo) {
  std::vector<TargetSpec> out;
  for (const auto& t : topo.targets) {
    TargetSpec spec;
    spec.addr = t.addr;
    spec.port = 80;
    spec.labels = t.labels;
    if (auto it = spec.labels.find("port"); it != spec.labels.end()) {
      spec.port = static_cast<std::uint16_t>(std::stoul(it->second));
      spec.labels.erase(it);
    }
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<TargetReport> run_sim_suite(const netsim::Topology& topo, const std::vector<TargetSpec>& targets,
                                        const SuiteConfig& suite, PacerConfig pacing, int parallelism) {
  std::vector<TargetReport> reports(targets.size());
  std::vector<std::exception_ptr> failures(targets.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= targets.size()) return;
      const Endpoint ep{targets[i].addr, targets[i].port};
      try {
        if (!std::any_of(topo.targets.begin(), topo.targets.end(),
                         [&](const netsim::SimTarget& t) { return t.addr == ep.addr; })) {
          reports[i].target = ep;  // no route: unreachable
          continue;
        }
        netsim::Network net(netsim::single_target(topo, ep.addr));
        SimTransport transport(net, pacing);
        PortAllocator ports(40000, 60999);
        SuiteRunner runner(transport, suite, ports);
        reports[i] = runner.run_suite(ep, host_of(targets[i]));
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min<int>(parallelism, static_cast<int>(targets.size())));
  std::vector<std::thread> pool;
  for (int i = 0; i < n; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& f : failures)
    if (f) std::rethrow_exception(f);
  return reports;
}

void persist(RunStore& store, const TargetSpec& target, const TargetReport& report) {
  const std::string live_ref = evidence_ref(store.run_id(), target, "Liveness");
  store.store_evidence(live_ref, report.liveness_exchange);
  store.record_target({target, report.liveness == Liveness::Alive, live_ref});
  for (const auto& run : report.runs) {
    ResultRecord r;
    r.run_id = store.run_id();
    r.target = target;
    r.test = run.verdict.test;
    r.result = run.verdict.result;
    r.sub_results = run.verdict.sub_results;
    r.notes = run.verdict.notes;
    if (run.verdict.result == Result::FPath && run.verdict.path) r.path_hop = run.verdict.path->first_modifying_hop;
    r.evidence_ref = evidence_ref(store.run_id(), target, to_string(run.verdict.test));
    r.started = run.started;
    r.finished = run.finished;
    store.store_evidence(r.evidence_ref, run.exchange);
    store.record(r);
  }
}

int cmd_scan(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  validate(cfg);
  const SuiteConfig suite = suite_config(cfg);
  const PacerConfig pacing{cfg.rate_pps, cfg.burst};
  const std::string run_id =
      cfg.run_id.empty() ? (cfg.mode == Mode::Sim ? "sim-" : "scan-") + std::to_string(cfg.seed) : cfg.run_id;

  std::vector<TargetSpec> targets;
  std::vector<TargetReport> reports;
  if (cfg.mode == Mode::Sim) {
    const auto topo = netsim::load_topology(cfg.topology_path);
    targets = prepare_targets(cfg, &topo, err);
    reports = run_sim_suite(topo, targets, suite, pacing, cfg.parallelism);
  } else {
    targets = prepare_targets(cfg, nullptr, err);
    RawSocketTransport transport(*Ipv4Addr::parse(cfg.source_addr), pacing);
    PortAllocator ports;
    SuiteRunner runner(transport, suite, ports);
    reports.resize(targets.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const int n = std::max(1, std::min<int>(cfg.parallelism, static_cast<int>(targets.size())));
    for (int w = 0; w < n; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < targets.size(); i = next.fetch_add(1))
          reports[i] = runner.run_suite({targets[i].addr, targets[i].port}, host_of(targets[i]));
      });
    }
    for (auto& t : pool) t.join();
  }

  auto store = RunStore::create(cfg.output_dir, run_id);
  std::size_t reachable = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    persist(store, targets[i], reports[i]);
    if (reports[i].liveness == Liveness::Alive) ++reachable;
  }
  write_aggregates(store);
  out << "run " << run_id << ": " << targets.size() << " targets, " << reachable << " reachable, "
      << store.records().size() << " verdicts -> " << cfg.output_dir.string() << "\n";
  return kExitOk;
}

std::string cmd_report(const std::filesystem::path& run_dir, ReportKind kind, const std::string& target,
                       const std::string& test) {
  auto store = RunStore::open(run_dir);
  switch (kind) {
    case ReportKind::Table:
      return render_table(store.records(), store.targets());
    case ReportKind::Www: {
      std::vector<TargetSpec> specs;
      for (const auto& t : store.targets()) specs.push_back(t.target);
      return render_www(www_differential(store.records(), pair_www(specs)));
    }
    case ReportKind::Evidence: {
      for (const auto& t : store.targets()) {
        if (t.target.key() != target) continue;
        if (test == "Liveness") {
          auto ex = store.evidence(t.liveness_ref);
          if (ex) return render_evidence(*ex, std::nullopt);
        }
        auto id = test_from_string(test);
        for (const auto& r : store.records()) {
          if (!id || r.target.key() != target || r.test != *id) continue;
          auto ex = store.evidence(r.evidence_ref);
          if (!ex) throw Error(Errc::RunNotFound, "evidence " + r.evidence_ref + " missing");
          return render_evidence(*ex, r);
        }
        throw Error(Errc::RunNotFound, "no " + test + " result for " + target);
      }
      throw Error(Errc::RunNotFound, "target " + target + " not in run");
    }
  }
  return {};
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"TCP conformance prober and simulator", "tcpconf"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string mode = "sim";
  std::string tests;
  std::string config_path;
  auto* scan = app.add_subcommand("scan", "probe targets (scan) or a simulated topology (sim)");
  scan->add_option("--mode", mode, "scan or sim")->check(CLI::IsMember({"scan", "sim", "SCAN", "SIM"}));
  scan->add_option("--targets", cfg.targets_path, "target CSV");
  scan->add_option("--topology", cfg.topology_path, "simulated topology JSON");
  scan->add_option("--blacklist", cfg.blacklist_path, "CIDR blacklist, one prefix per line");
  scan->add_flag("--allow-empty-blacklist", cfg.allow_empty_blacklist, "permit an empty blacklist in scan mode");
  scan->add_option("--tests", tests, "comma-separated test names");
  scan->add_option("--rate", cfg.rate_pps, "probe rate in packets per second");
  scan->add_option("--parallelism", cfg.parallelism, "concurrent targets");
  scan->add_option("--seed", cfg.seed, "seed for probe randomness and sampling");
  scan->add_option("--out", cfg.output_dir, "run output directory");
  scan->add_option("--run-id", cfg.run_id, "run identifier");
  scan->add_option("--source", cfg.source_addr, "scanner IPv4 address (scan mode)");
  scan->add_option("--sample-cap", cfg.sample_cap, "keep at most this many targets per group");
  scan->add_option("--config", config_path, "JSON config; its keys override flags");

  std::string run_dir;
  std::string kind = "table";
  std::string target;
  std::string test;
  auto* report = app.add_subcommand("report", "render a stored run");
  report->add_option("--run", run_dir, "run directory")->required();
  report->add_option("--kind", kind, "table, www or evidence")->check(CLI::IsMember({"table", "www", "evidence"}));
  report->add_option("--target", target, "addr:port (evidence)");
  report->add_option("--test", test, "test name (evidence)");

  std::string format = "jsonl";
  std::string export_out;
  auto* exp = app.add_subcommand("export", "export a run's records");
  exp->add_option("--run", run_dir, "run directory")->required();
  exp->add_option("--format", format, "jsonl or csv")->check(CLI::IsMember({"jsonl", "csv"}));
  exp->add_option("--out", export_out, "output file")->required();

  auto* recl = app.add_subcommand("reclassify", "re-derive verdicts from stored evidence and compare");
  recl->add_option("--run", run_dir, "run directory")->required();

  std::string in_path;
  std::string list_out;
  std::string blacklist;
  std::size_t cap = 0;
  std::uint64_t seed = 1;
  std::string group = "cdn_name";
  bool pairs = false;
  auto* tg = app.add_subcommand("targets", "filter, dedup, sample and pair a target list");
  tg->add_option("--in", in_path, "target CSV")->required();
  tg->add_option("--blacklist", blacklist, "CIDR blacklist");
  tg->add_option("--cap", cap, "per-group sample cap (0 = keep all)");
  tg->add_option("--seed", seed, "sampling seed");
  tg->add_option("--group-label", group, "label that defines sampling groups");
  tg->add_flag("--pairs", pairs, "print www/bare domain pairs");
  tg->add_option("--out", list_out, "write the resulting list here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*scan) {
      cfg.mode = (mode == "scan" || mode == "SCAN") ? Mode::Scan : Mode::Sim;
      if (!tests.empty()) cfg.enabled_tests = parse_tests(split_commas(tests));
      if (!config_path.empty()) apply_config_file(cfg, read_json_file(config_path));
      return cmd_scan(cfg, out, err);
    }
    if (*report) {
      const ReportKind k = kind == "www" ? ReportKind::Www : kind == "evidence" ? ReportKind::Evidence : ReportKind::Table;
      out << cmd_report(run_dir, k, target, test);
      return kExitOk;
    }
    if (*exp) {
      auto store = RunStore::open(run_dir);
      export_records(store.records(), format == "csv" ? ExportFormat::Csv : ExportFormat::Jsonl, export_out);
      out << store.records().size() << " records -> " << export_out << "\n";
      return kExitOk;
    }
    if (*recl) {
      auto store = RunStore::open(run_dir);
      std::size_t mismatches = 0;
      for (const auto& r : store.records()) {
        auto ex = store.evidence(r.evidence_ref);
        if (!ex) throw Error(Errc::MissingEvidence, r.evidence_ref);
        const auto v = classify(*ex);
        if (v.result != r.result || v.sub_results != r.sub_results || v.notes != r.notes) {
          ++mismatches;
          out << "mismatch " << r.evidence_ref << ": stored " << to_string(r.result) << ", derived "
              << to_string(v.result) << "\n";
        }
      }
      out << store.records().size() << " records, " << mismatches << " mismatches\n";
      return mismatches == 0 ? kExitOk : kExitFailure;
    }
    if (*tg) {
      auto loaded = load_targets(in_path);
      for (const auto& r : loaded.rejects) err << "rejected line " << r.line_no << ": " << r.reason << "\n";
      auto list = std::move(loaded.targets);
      std::size_t removed = 0;
      if (!blacklist.empty()) {
        auto result = apply_blacklist(list, load_blacklist(blacklist));
        for (const auto& [t, cidr] : result.removed) err << "blacklisted " << t.key() << " by " << cidr.to_string() << "\n";
        removed = result.removed.size();
        list = std::move(result.kept);
      }
      list = cap > 0 ? dedup_and_sample(list, cap, seed, group) : dedup(list);
      out << list.size() << " targets kept, " << loaded.rejects.size() << " rejected, " << removed << " blacklisted\n";
      if (pairs)
        for (const auto& p : pair_www(list))
          out << p.domain << " www=" << p.www_target->key() << " bare=" << p.bare_target->key() << "\n";
      if (!list_out.empty()) {
        std::string text = "addr,port,labels\n";
        for (const auto& t : list) text += to_csv_line(t) + "\n";
        write_text(list_out, text);
      }
      return kExitOk;
    }
  } catch (const Error& e) {
    err << e.what() << "\n";
    if (e.code() == Errc::PrivilegeError)
      err << "raw sockets need root or CAP_NET_RAW (setcap cap_net_raw+ep on the binary)\n";
    return exit_code_for(e);
  }
  return kExitFailure;
}

}  // namespace tcpconf::cli
