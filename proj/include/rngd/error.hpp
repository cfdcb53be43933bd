#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rngd {

enum class ErrorKind {
  InvalidInput,
  SingularMetric,
  ExpDomain,
  RetractFail,
  RadiusExceeded,
  RankCollapse,
  BrokenInvariant,
  NotInvertible,
  ParseError,
  ConfigError,
  IoError,
  Runtime,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. The kind lets callers (step-halving, CLI exit
/// codes) react to specific failure classes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

}  // namespace rngd
