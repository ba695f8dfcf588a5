#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace rigmotion::cli {

/// Structured logger: one JSON object per line by default; --quiet switches
/// to plain text and drops informational events.
class Logger {
 public:
  explicit Logger(bool quiet = false) : quiet_(quiet) {}

  void info(const std::string& event, nlohmann::json fields = {}) const;
  void warn(const std::string& event, nlohmann::json fields = {}) const;
  void error(const std::string& event, nlohmann::json fields = {}) const;
  bool quiet() const { return quiet_; }

 private:
  void emit(const char* level, const std::string& event, nlohmann::json fields) const;
  bool quiet_ = false;
};

/// --seed wins; otherwise the RIGMOTION_SEED environment variable; else 0.
uint64_t resolve_seed(const std::optional<uint64_t>& cli_seed);

struct ValidateOptions {
  std::vector<std::string> files;
  std::string manifest;
  bool strict = false;  // additionally require preprocessed-rig invariants
};

struct PreprocessOptions {
  std::string manifest;
  std::string out_dir;
  std::string source_forward = "-Y";
  std::string source_up = "Z";
  std::string target_forward = "-Y";
  std::string target_up = "Z";
};

struct AugmentOptions {
  std::string manifest;
  std::string out_dir;
  std::string policy_path;  // empty: default policy over all non-root joints
  int variants = 10;
  std::optional<uint64_t> seed;
};

struct TrainOptions {
  std::string manifest;
  std::string out_checkpoint;
  std::string loss_csv;
  std::string preset = "desk";  // "desk" or "reference"
  int pose_steps = 1000;
  int motion_steps = 1000;
  int batch_size = 0;
  double learning_rate = 2e-3;
  std::optional<uint64_t> seed;
};

struct SampleOptions {
  std::string checkpoint;
  std::string rig_bvh;
  std::string out_bvh;
  std::string caption;  // empty: unconditional
  int frames = 0;       // 0: the model's frame capacity
  double guidance = 1.0;
  std::optional<uint64_t> seed;
};

struct SampleLongOptions {
  std::string checkpoint;
  std::string rig_bvh;
  std::string out_bvh;
  std::vector<std::string> captions;  // one chunk per caption
  int overlap = 15;
  double guidance = 1.0;
  std::optional<uint64_t> seed;
};

struct EvalOptions {
  std::string reference_manifest;
  std::string generated_manifest;
  std::string out_json;
  std::string out_csv;
  int max_joints = 140;
  std::optional<uint64_t> seed;
};

// Each command returns a process exit code: 0 success, 1 data error,
// 2 configuration error. They throw RigError for fatal problems; main maps
// exceptions to the same codes.
int cmd_validate(const ValidateOptions& options, const Logger& log);
int cmd_preprocess(const PreprocessOptions& options, const Logger& log);
int cmd_augment(const AugmentOptions& options, const Logger& log);
int cmd_train(const TrainOptions& options, const Logger& log);
int cmd_sample(const SampleOptions& options, const Logger& log);
int cmd_sample_long(const SampleLongOptions& options, const Logger& log);
int cmd_eval(const EvalOptions& options, const Logger& log);

}  // namespace rigmotion::cli
