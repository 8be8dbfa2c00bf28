#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gradleak {

enum class ErrorKind {
  kShape,         // tensor/parameter dimensions do not conform
  kInvalidArgument,
  kOverflow,      // non-finite intermediate value
  kData,          // malformed or truncated input file
  kConfig,        // bad experiment configuration
  kIo,
  kCollapsed,     // every temporal reconstruction diverged
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this type; `kind()` lets the CLI
// map them onto exit codes without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace gradleak
