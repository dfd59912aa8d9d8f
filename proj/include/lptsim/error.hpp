#pragma once

#include <stdexcept>
#include <string>

namespace lptsim {

enum class ErrorKind {
  kInvalidArgument,
  kInvalidGpuCount,
  kDimensionMismatch,
  kEmptyInput,
  kKTooLarge,
  kEmptyEvalSet,
  kEmptyIndex,
  kClusterTooSmall,
  kInvalidConfig,
  kMalformedTrace,
  kMissingFile,
  kUnknownKnob,
  kInvariantBreach,
};

const char* to_string(ErrorKind kind);

// Every failure raised by the library carries one of the kinds above so that
// callers (the CLI in particular) can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace lptsim
