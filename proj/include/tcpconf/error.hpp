#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tcpconf {

enum class Errc {
  // segment model
  OversizeOptions,
  OversizePacket,
  Truncated,
  BadDataOffset,
  BadIpVersion,
  MalformedOption,
  NotTimeExceeded,
  TruncatedQuote,
  // transport
  PortInUse,
  NoRoute,
  SessionClosed,
  PrivilegeError,
  // tracer
  ValueOutOfRange,
  NoCarrierAvailable,
  // targets
  FileUnreadable,
  BadCidr,
  // reporting
  StorageFull,
  MissingEvidence,
  EmptyRun,
  IoError,
  RunNotFound,
  // netsim
  InvalidSpec,
  ScriptError,
  // cli
  ConfigError,
};

std::string_view to_string(Errc code) noexcept;

// All library failures are reported through this type; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace tcpconf
