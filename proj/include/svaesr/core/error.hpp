#pragma once

#include <stdexcept>
#include <string>

namespace svaesr {

/// Raised when a caller violates an operation's precondition.
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& what) : std::invalid_argument(what) {}
};

/// File system or codec failure.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed or version-mismatched serialized data (checkpoints, configs, reports).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

#define SVAESR_REQUIRE(cond, msg)                  \
  do {                                             \
    if (!(cond)) throw ::svaesr::ArgumentError(msg); \
  } while (0)

}  // namespace svaesr
