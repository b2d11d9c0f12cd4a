#include "tcpconf/targets.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "tcpconf/error.hpp"

namespace tcpconf {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::optional<std::string> parse_line(std::string_view line, TargetSpec& out) {
  auto parts = split(line, ',');
  if (parts.size() < 2) return "expected addr,port";
  auto addr = Ipv4Addr::parse(parts[0]);
  if (!addr) return "bad IPv4 address '" + std::string(parts[0]) + "'";
  unsigned long port = 0;
  auto [ptr, ec] = std::from_chars(parts[1].data(), parts[1].data() + parts[1].size(), port);
  if (ec != std::errc{} || ptr != parts[1].data() + parts[1].size() || parts[1].empty())
    return "bad port '" + std::string(parts[1]) + "'";
  if (port == 0 || port > 65535) return "port " + std::string(parts[1]) + " outside 1..65535";
  out.addr = *addr;
  out.port = static_cast<std::uint16_t>(port);
  out.labels.clear();
  for (std::size_t i = 2; i < parts.size(); ++i) {
    if (parts[i].empty()) continue;
    auto eq = parts[i].find('=');
    if (eq == std::string_view::npos || eq == 0) return "label '" + std::string(parts[i]) + "' is not key=value";
    out.labels[std::string(trim(parts[i].substr(0, eq)))] = std::string(trim(parts[i].substr(eq + 1)));
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> TargetSpec::label(const std::string& k) const {
  auto it = labels.find(k);
  if (it == labels.end()) return std::nullopt;
  return it->second;
}

std::string TargetSpec::key() const { return addr.to_string() + ":" + std::to_string(port); }

LoadedTargets parse_targets(std::istream& in) {
  LoadedTargets out;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line_no == 1 && line.starts_with("addr")) continue;
    TargetSpec t;
    if (auto err = parse_line(line, t)) {
      out.rejects.push_back({line_no, std::string(line), *err});
    } else {
      out.targets.push_back(std::move(t));
    }
  }
  return out;
}

LoadedTargets load_targets(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileUnreadable, "cannot read targets file " + path.string());
  return parse_targets(in);
}

std::string to_csv_line(const TargetSpec& t) {
  std::string s = t.addr.to_string() + "," + std::to_string(t.port);
  for (const auto& [k, v] : t.labels) s += "," + k + "=" + v;
  return s;
}

Cidr Cidr::parse(std::string_view text) {
  text = trim(text);
  auto slash = text.find('/');
  auto addr = Ipv4Addr::parse(text.substr(0, slash));
  if (!addr) throw Error(Errc::BadCidr, "bad prefix '" + std::string(text) + "'");
  int prefix = 32;
  if (slash != std::string_view::npos) {
    auto p = text.substr(slash + 1);
    auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), prefix);
    if (ec != std::errc{} || ptr != p.data() + p.size() || p.empty() || prefix < 0 || prefix > 32)
      throw Error(Errc::BadCidr, "bad prefix length in '" + std::string(text) + "'");
  }
  const std::uint32_t mask = prefix == 0 ? 0 : ~std::uint32_t{0} << (32 - prefix);
  return Cidr{Ipv4Addr{addr->value & mask}, prefix};
}

bool Cidr::contains(Ipv4Addr a) const {
  const std::uint32_t mask = prefix == 0 ? 0 : ~std::uint32_t{0} << (32 - prefix);
  return (a.value & mask) == network.value;
}

std::string Cidr::to_string() const { return network.to_string() + "/" + std::to_string(prefix); }

std::vector<Cidr> parse_blacklist(std::istream& in) {
  std::vector<Cidr> out;
  std::string raw;
  while (std::getline(in, raw)) {
    auto line = trim(raw);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    out.push_back(Cidr::parse(line));
  }
  return out;
}

std::vector<Cidr> load_blacklist(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileUnreadable, "cannot read blacklist " + path.string());
  return parse_blacklist(in);
}

BlacklistResult apply_blacklist(const std::vector<TargetSpec>& targets, const std::vector<Cidr>& blacklist) {
  BlacklistResult r;
  for (const auto& t : targets) {
    auto hit = std::find_if(blacklist.begin(), blacklist.end(), [&](const Cidr& c) { return c.contains(t.addr); });
    if (hit == blacklist.end())
      r.kept.push_back(t);
    else
      r.removed.emplace_back(t, *hit);
  }
  return r;
}

std::vector<TargetSpec> dedup(const std::vector<TargetSpec>& targets) {
  std::vector<TargetSpec> out;
  std::map<std::pair<std::uint32_t, std::uint16_t>, std::size_t> index;
  for (const auto& t : targets) {
    auto [it, fresh] = index.try_emplace({t.addr.value, t.port}, out.size());
    if (fresh) {
      out.push_back(t);
      continue;
    }
    auto& merged = out[it->second].labels;
    for (const auto& [k, v] : t.labels) {
      auto m = merged.find(k);
      if (m == merged.end()) {
        merged[k] = v;
        continue;
      }
      std::set<std::string_view> have;
      for (auto part : split(m->second, '|')) have.insert(part);
      if (!have.contains(v)) m->second += "|" + v;
    }
  }
  return out;
}

std::vector<TargetSpec> dedup_and_sample(const std::vector<TargetSpec>& targets, std::size_t cap,
                                         std::uint64_t seed, const std::string& group_label) {
  if (cap == 0) throw Error(Errc::ValueOutOfRange, "per-group cap must be positive");
  auto unique = dedup(targets);
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < unique.size(); ++i)
    if (auto g = unique[i].label(group_label)) groups[*g].push_back(i);

  std::vector<bool> keep(unique.size(), true);
  for (auto& [name, members] : groups) {
    if (members.size() <= cap) continue;
    std::uint64_t h = seed;
    for (unsigned char c : name) h = mix64(h ^ c);
    Rng rng(h);
    // partial Fisher-Yates: the first `cap` slots become the sample
    for (std::size_t i = 0; i < cap; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(members.size() - i));
      std::swap(members[i], members[j]);
    }
    for (std::size_t i = cap; i < members.size(); ++i) keep[members[i]] = false;
  }
  std::vector<TargetSpec> out;
  for (std::size_t i = 0; i < unique.size(); ++i)
    if (keep[i]) out.push_back(std::move(unique[i]));
  return out;
}

std::vector<DomainPair> pair_www(const std::vector<TargetSpec>& targets) {
  std::map<std::string, DomainPair> by_domain;
  for (const auto& t : targets) {
    auto domain = t.label("domain");
    auto www = t.label("www");
    if (!domain || !www) continue;
    auto& p = by_domain[*domain];
    p.domain = *domain;
    if (*www == "true" || *www == "1") {
      if (!p.www_target) p.www_target = t;
    } else if (*www == "false" || *www == "0") {
      if (!p.bare_target) p.bare_target = t;
    }
  }
  std::vector<DomainPair> out;
  for (auto& [d, p] : by_domain)
    if (p.www_target && p.bare_target) out.push_back(std::move(p));
  return out;
}

}  // namespace tcpconf
