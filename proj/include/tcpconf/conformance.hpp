#pragma once

#include <atomic>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "tcpconf/classify.hpp"
#include "tcpconf/exchange.hpp"
#include "tcpconf/transport.hpp"

namespace tcpconf {

struct SuiteConfig {
  std::vector<TestId> tests = all_tests();
  Micros deadline{5'000'000};          // wait for a handshake reply or an acknowledgment
  Micros reserved_window{10'000'000};  // SYN/ACK retransmission observation after the reserved-flag ACK
  Micros quiesce{2'000'000};           // silence that ends data collection
  Micros settle{200'000};              // silence that ends draining fan duplicates
  bool fan = true;
  int max_ttl = kMaxFanTtl;
  std::uint16_t mss_support_value = 515;
  std::uint16_t mss_default_limit = 536;
  std::uint16_t control_mss = 1460;
  std::uint8_t unknown_option_kind = 158;
  std::size_t urgent_total = 501;
  int urgent_segments = 3;
  std::uint8_t reserved_mask = kReservedFlag2;
  bool disambiguate_defer_accept = false;
  std::uint64_t seed = 1;
};

// Overrides fields present in the object; throws ConfigError on bad values.
void apply_suite_overrides(SuiteConfig& cfg, const nlohmann::json& j);
void validate(const SuiteConfig& cfg);

// Hands out local ports; a port is never reused while a session holds it, and
// successive calls cycle through the range so 4-tuples are not reused across tests.
class PortAllocator {
 public:
  PortAllocator(std::uint16_t first = 32768, std::uint16_t last = 60999);
  std::uint16_t acquire();
  void release(std::uint16_t port);

 private:
  std::mutex mu_;
  std::uint16_t first_;
  std::uint16_t last_;
  std::uint16_t next_;
  std::set<std::uint16_t> in_use_;
};

// Application bytes sent to make the target answer with data: an HTTP/1.1 GET
// for most ports, a canned TLS ClientHello for 443. With pad_to set, the
// request is padded to exactly that many bytes.
Bytes elicitor(const Endpoint& target, const std::string& host, std::size_t pad_to = 0);

enum class Liveness { Alive, Dead };

struct TestRun {
  Verdict verdict;
  ProbeExchange exchange;
  Micros started{0};
  Micros finished{0};
};

struct TargetReport {
  Endpoint target;
  Liveness liveness = Liveness::Dead;
  ProbeExchange liveness_exchange;
  std::vector<TestRun> runs;
};

class SuiteRunner {
 public:
  SuiteRunner(Transport& transport, SuiteConfig config, PortAllocator& ports);

  Liveness liveness(const Endpoint& target, ProbeExchange* record = nullptr);
  TestRun run_test(TestId test, const Endpoint& target, const std::string& host);
  // Liveness first; a dead target gets no tests.
  TargetReport run_suite(const Endpoint& target, const std::string& host);

  const SuiteConfig& config() const { return config_; }

 private:
  Transport& transport_;
  SuiteConfig config_;
  PortAllocator& ports_;
};

}  // namespace tcpconf
