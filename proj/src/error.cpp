#include "tcpconf/error.hpp"

namespace tcpconf {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::OversizeOptions: return "OversizeOptions";
    case Errc::OversizePacket: return "OversizePacket";
    case Errc::Truncated: return "Truncated";
    case Errc::BadDataOffset: return "BadDataOffset";
    case Errc::BadIpVersion: return "BadIpVersion";
    case Errc::MalformedOption: return "MalformedOption";
    case Errc::NotTimeExceeded: return "NotTimeExceeded";
    case Errc::TruncatedQuote: return "TruncatedQuote";
    case Errc::PortInUse: return "PortInUse";
    case Errc::NoRoute: return "NoRoute";
    case Errc::SessionClosed: return "SessionClosed";
    case Errc::PrivilegeError: return "PrivilegeError";
    case Errc::ValueOutOfRange: return "ValueOutOfRange";
    case Errc::NoCarrierAvailable: return "NoCarrierAvailable";
    case Errc::FileUnreadable: return "FileUnreadable";
    case Errc::BadCidr: return "BadCidr";
    case Errc::StorageFull: return "StorageFull";
    case Errc::MissingEvidence: return "MissingEvidence";
    case Errc::EmptyRun: return "EmptyRun";
    case Errc::IoError: return "IoError";
    case Errc::RunNotFound: return "RunNotFound";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::ScriptError: return "ScriptError";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace tcpconf
