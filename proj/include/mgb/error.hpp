#pragma once

#include <stdexcept>
#include <string>

namespace mgb {

// Values double as CLI exit codes.
enum class ErrorCode : int {
  kInvalidArgument = 2,
  kIo = 3,
  kUnknownEntity = 4,
  kMissingTruth = 5,
  kDegenerate = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mgb
