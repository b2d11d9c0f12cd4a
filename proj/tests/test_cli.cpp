#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "tcpconf/cli.hpp"
#include "tcpconf/error.hpp"

using namespace tcpconf;
using namespace tcpconf::cli;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tcpconf-cli-" + name + "-" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

const std::string kTestbed = std::string(TCPCONF_CONFIG_DIR) + "/testbed.json";

}  // namespace

TEST(Cli, SimTestbedEndToEnd) {
  const auto dir = scratch("testbed");
  const auto r = invoke({"scan", "--mode", "sim", "--topology", kTestbed, "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "report.txt"));

  const auto table = invoke({"report", "--run", dir.string(), "--kind", "table"});
  ASSERT_EQ(table.code, 0);
  for (auto t : all_tests()) EXPECT_NE(table.out.find(to_string(t)), std::string::npos);
  EXPECT_NE(table.out.find("Reserved-SYN"), std::string::npos);

  const auto www = invoke({"report", "--run", dir.string(), "--kind", "www"});
  EXPECT_EQ(www.out.rfind("0 pairs", 0), 0u) << www.out;

  const auto recl = invoke({"reclassify", "--run", dir.string()});
  EXPECT_EQ(recl.code, 0);
  EXPECT_NE(recl.out.find("0 mismatches"), std::string::npos);

  const auto csv = dir / "out.csv";
  EXPECT_EQ(invoke({"export", "--run", dir.string(), "--format", "csv", "--out", csv.string()}).code, 0);
  std::ifstream in(csv);
  std::stringstream body;
  body << in.rdbuf();
  EXPECT_EQ(import_records(body.str(), ExportFormat::Csv).size(), 48u);

  try {
    cmd_report(dir, ReportKind::Evidence, "192.0.2.1:80", "Reserved");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::RunNotFound);
  }
  EXPECT_NE(cmd_report(dir, ReportKind::Evidence, "10.0.1.4:80", "UrgentPointer").find("F_TARGET"),
            std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, ParallelismDoesNotChangeResults) {
  const auto a = scratch("p1");
  const auto b = scratch("p8");
  ASSERT_EQ(invoke({"scan", "--topology", kTestbed, "--parallelism", "1", "--out", a.string()}).code, 0);
  ASSERT_EQ(invoke({"scan", "--topology", kTestbed, "--parallelism", "8", "--out", b.string()}).code, 0);
  for (const char* f : {"records.jsonl", "evidence.jsonl", "report.txt"}) {
    std::ifstream fa(a / f), fb(b / f);
    std::stringstream sa, sb;
    sa << fa.rdbuf();
    sb << fb.rdbuf();
    EXPECT_EQ(sa.str(), sb.str()) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, ConfigErrorsExitTwo) {
  EXPECT_EQ(invoke({"scan", "--topology", kTestbed, "--rate", "0", "--out", scratch("rate").string()}).code, 2);
  EXPECT_EQ(invoke({"scan", "--mode", "scan", "--out", scratch("scan").string()}).code, 2);
  const auto missing =
      invoke({"scan", "--mode", "scan", "--targets", "/nonexistent/t.csv", "--blacklist", "/nonexistent/b.txt",
           "--source", "10.0.0.1", "--out", scratch("missing").string()});
  EXPECT_EQ(missing.code, 2);
  EXPECT_FALSE(missing.err.empty());
  EXPECT_EQ(invoke({"scan", "--topology", "/nonexistent/topo.json"}).code, 2);
  EXPECT_EQ(invoke({"frobnicate"}).code, 2);
}

TEST(Cli, ReportOnMissingRun) {
  EXPECT_NE(invoke({"report", "--run", "/nonexistent/run"}).code, 0);
}

TEST(Cli, RunConfigValidation) {
  RunConfig cfg;
  cfg.rate_pps = 0;
  EXPECT_THROW(validate(cfg), Error);
  RunConfig ok;
  ok.topology_path = kTestbed;
  ok.output_dir = "/tmp/x";
  EXPECT_NO_THROW(validate(ok));
  RunConfig scan;
  scan.mode = Mode::Scan;
  EXPECT_THROW(validate(scan), Error);
}

TEST(Cli, TargetsSubcommand) {
  const auto dir = scratch("targets");
  fs::create_directories(dir);
  {
    std::ofstream f(dir / "t.csv");
    f << "addr,port,labels\n"
         "192.0.2.1,80,domain=a.org,www=true\n"
         "192.0.2.2,80,domain=a.org,www=false\n"
         "10.1.1.1,80,domain=b.org,www=true\n"
         "192.0.2.3,99999\n";
    std::ofstream b(dir / "bl.txt");
    b << "10.0.0.0/8\n";
  }
  const auto r = invoke({"targets", "--in", (dir / "t.csv").string(), "--blacklist", (dir / "bl.txt").string(), "--pairs"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("2 targets kept, 1 rejected, 1 blacklisted"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("a.org www=192.0.2.1:80 bare=192.0.2.2:80"), std::string::npos);
  fs::remove_all(dir);
}
