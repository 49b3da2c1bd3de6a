#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace relief {

enum class ErrorCode {
  MissingNormals,
  MalformedFile,
  TooFewPoints,
  EmptyMesh,
  IOFailure,
  ZeroDirection,
  DegenerateNeighborhood,
  TargetTooSmall,
  TargetExceedsInput,
  FloatingComponent,
  FactorizationFailure,
  NonFiniteSolution,
  DegenerateInput,
  TargetUnreachable,
  NoFrameYet,
  PrepareTimeout,
  InvalidArgument,
};

std::string_view error_code_name(ErrorCode code) noexcept;

/// Exception carrying one of the module error codes. what() is
/// "<CodeName>: <detail>" so the code survives a plain catch of
/// std::exception.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  std::string_view code_name() const noexcept { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

}  // namespace relief
