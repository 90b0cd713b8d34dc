#pragma once

#include <stdexcept>
#include <string>

namespace regimes {

/// Failure category. The numeric values double as CLI exit codes.
enum class ErrorKind : int {
  usage = 1,
  data = 2,
  numerical = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void throw_usage(const std::string& what);
[[noreturn]] void throw_data(const std::string& what);
[[noreturn]] void throw_numerical(const std::string& what);

}  // namespace regimes
