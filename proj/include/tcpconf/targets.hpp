#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tcpconf/bytes.hpp"

namespace tcpconf {

struct TargetSpec {
  Ipv4Addr addr;
  std::uint16_t port = 0;
  std::map<std::string, std::string> labels;  // dataset, cdn_name, domain, www, ...

  std::optional<std::string> label(const std::string& key) const;
  std::string key() const;  // "addr:port"
  bool operator==(const TargetSpec&) const = default;
};

struct RejectedLine {
  std::size_t line_no = 0;
  std::string line;
  std::string reason;
};

struct LoadedTargets {
  std::vector<TargetSpec> targets;
  std::vector<RejectedLine> rejects;
};

// Format: "addr,port[,key=value...]" per line; a header line starting with
// "addr" and lines starting with '#' are skipped. Malformed lines are rejected
// with a reason instead of failing the load.
LoadedTargets parse_targets(std::istream& in);
LoadedTargets load_targets(const std::filesystem::path& path);  // FileUnreadable
std::string to_csv_line(const TargetSpec& t);

struct Cidr {
  Ipv4Addr network;
  int prefix = 32;

  static Cidr parse(std::string_view text);  // BadCidr
  bool contains(Ipv4Addr a) const;
  std::string to_string() const;
  bool operator==(const Cidr&) const = default;
};

std::vector<Cidr> parse_blacklist(std::istream& in);
std::vector<Cidr> load_blacklist(const std::filesystem::path& path);

struct BlacklistResult {
  std::vector<TargetSpec> kept;
  std::vector<std::pair<TargetSpec, Cidr>> removed;  // first matching prefix
};

BlacklistResult apply_blacklist(const std::vector<TargetSpec>& targets, const std::vector<Cidr>& blacklist);

// Collapses duplicate (addr, port) entries into the first occurrence. Labels are
// merged; conflicting values are joined with '|' in order of appearance.
std::vector<TargetSpec> dedup(const std::vector<TargetSpec>& targets);

// Dedups, then keeps a uniform random sample of at most `cap` targets from each
// group sharing the same `group_label` value. Targets without the label are not
// sampled. Output keeps input order. Throws ValueOutOfRange when cap is 0.
std::vector<TargetSpec> dedup_and_sample(const std::vector<TargetSpec>& targets, std::size_t cap,
                                         std::uint64_t seed, const std::string& group_label = "cdn_name");

struct DomainPair {
  std::string domain;
  std::optional<TargetSpec> www_target;
  std::optional<TargetSpec> bare_target;
};

// Pairs are sorted by domain and only emitted when both variants exist.
std::vector<DomainPair> pair_www(const std::vector<TargetSpec>& targets);

}  // namespace tcpconf
