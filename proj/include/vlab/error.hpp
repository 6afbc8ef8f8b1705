#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vlab {

enum class ErrorKind {
  Argument,
  Configuration,
  Capacity,
  Unnegatable,
  Pairing,
  Key,
  Length,
  Convention,
  Validation,
  Io,
  SizeMismatch,
  Version,
  Malformed,
  Data,
  Numeric,
  Protocol,
  Alignment,
};

std::string_view to_string(ErrorKind kind);

// Every failure the library reports carries a kind so callers (and tests)
// can tell a capacity problem from a malformed file without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind), detail_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the kind prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool ok, ErrorKind kind, const std::string& what) {
  if (!ok) throw Error(kind, what);
}

}  // namespace vlab
