#pragma once

#include <stdexcept>
#include <string>

namespace splatprint {

// One code per failure family; the C API maps these 1:1 onto sp_status.
enum class ErrorCode {
  InvalidArgument,
  InvalidConfig,
  Io,
  MalformedFile,
  IndexOutOfRange,
  NonPositiveDepth,
  DegeneratePointmap,
  DegenerateCorrespondences,
  DisconnectedGraph,
  NonFiniteObjective,
  SingularCovariance,
  DimensionMismatch,
  NonFiniteLoss,
  EmptyCloud,
  AllPruned,
  NoViews,
  EmptySet,
  NoSharedMinutiae,
  EmptyOverlap,
  InvalidCount,
  StageFailed,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool ok, ErrorCode code, const std::string& message) {
  if (!ok) raise(code, message);
}

const char* error_code_name(ErrorCode code);

}  // namespace splatprint
