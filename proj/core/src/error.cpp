#include "relief/error.hpp"

namespace relief {

std::string_view error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MissingNormals: return "MissingNormals";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::IOFailure: return "IOFailure";
    case ErrorCode::ZeroDirection: return "ZeroDirection";
    case ErrorCode::DegenerateNeighborhood: return "DegenerateNeighborhood";
    case ErrorCode::TargetTooSmall: return "TargetTooSmall";
    case ErrorCode::TargetExceedsInput: return "TargetExceedsInput";
    case ErrorCode::FloatingComponent: return "FloatingComponent";
    case ErrorCode::FactorizationFailure: return "FactorizationFailure";
    case ErrorCode::NonFiniteSolution: return "NonFiniteSolution";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::TargetUnreachable: return "TargetUnreachable";
    case ErrorCode::NoFrameYet: return "NoFrameYet";
    case ErrorCode::PrepareTimeout: return "PrepareTimeout";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + detail), code_(code) {}

}  // namespace relief
