#include "rngd/error.hpp"

namespace rngd {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::SingularMetric: return "SingularMetric";
    case ErrorKind::ExpDomain: return "ExpDomain";
    case ErrorKind::RetractFail: return "RetractFail";
    case ErrorKind::RadiusExceeded: return "RadiusExceeded";
    case ErrorKind::RankCollapse: return "RankCollapse";
    case ErrorKind::BrokenInvariant: return "BrokenInvariant";
    case ErrorKind::NotInvertible: return "NotInvertible";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::Runtime: return "Runtime";
  }
  return "Unknown";
}

}  // namespace rngd
