#pragma once

#include <stdexcept>
#include <string>

namespace rigmotion {

enum class ErrorCode {
  // topology / rig
  CycleDetected,
  MultipleRoots,
  OrphanJoint,
  DuplicateName,
  ZeroLengthBone,
  JointBudgetExceeded,
  // bvh
  SyntaxError,
  UnsupportedChannel,
  EmptyMotion,
  DegenerateBoundingBox,
  // augmentation / retargeting
  ScaleOutOfRange,
  UnknownJoint,
  NotRemovable,
  FrameOutOfRange,
  DegenerateDirection,
  // denoiser
  ShapeMismatch,
  StageMismatch,
  FrozenWeightViolation,
  UntrainedModel,
  OverlapTooLarge,
  IndexOutOfRange,
  DepthExceeded,
  BranchExceeded,
  // metrics
  WindowTooLarge,
  EmptyWindows,
  DimensionMismatch,
  TooFewSamples,
  SizeMismatch,
  // io / config
  MissingCheckpoint,
  ConfigError,
  IoError,
};

const char* error_code_name(ErrorCode code);

class RigError : public std::runtime_error {
 public:
  RigError(ErrorCode code, const std::string& message);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Parse errors carry the 1-based source line and the offending token.
class BvhParseError : public RigError {
 public:
  BvhParseError(int line, std::string token, const std::string& message);
  int line() const { return line_; }
  const std::string& token() const { return token_; }

 private:
  int line_;
  std::string token_;
};

}  // namespace rigmotion
