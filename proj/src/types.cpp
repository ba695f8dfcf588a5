#include "rigmotion/types.hpp"

namespace rigmotion {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::MultipleRoots: return "MultipleRoots";
    case ErrorCode::OrphanJoint: return "OrphanJoint";
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::ZeroLengthBone: return "ZeroLengthBone";
    case ErrorCode::JointBudgetExceeded: return "JointBudgetExceeded";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnsupportedChannel: return "UnsupportedChannel";
    case ErrorCode::EmptyMotion: return "EmptyMotion";
    case ErrorCode::DegenerateBoundingBox: return "DegenerateBoundingBox";
    case ErrorCode::ScaleOutOfRange: return "ScaleOutOfRange";
    case ErrorCode::UnknownJoint: return "UnknownJoint";
    case ErrorCode::NotRemovable: return "NotRemovable";
    case ErrorCode::FrameOutOfRange: return "FrameOutOfRange";
    case ErrorCode::DegenerateDirection: return "DegenerateDirection";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StageMismatch: return "StageMismatch";
    case ErrorCode::FrozenWeightViolation: return "FrozenWeightViolation";
    case ErrorCode::UntrainedModel: return "UntrainedModel";
    case ErrorCode::OverlapTooLarge: return "OverlapTooLarge";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DepthExceeded: return "DepthExceeded";
    case ErrorCode::BranchExceeded: return "BranchExceeded";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::EmptyWindows: return "EmptyWindows";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

RigError::RigError(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

BvhParseError::BvhParseError(int line, std::string token, const std::string& message)
    : RigError(ErrorCode::SyntaxError,
               "line " + std::to_string(line) + " near '" + token + "': " + message),
      line_(line),
      token_(std::move(token)) {}

}  // namespace rigmotion
