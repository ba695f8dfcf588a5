#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "rigmotion/types.hpp"

namespace {

using rigmotion::cli::Logger;

// Seeds are optional on the command line; unset falls back to the
// RIGMOTION_SEED environment variable, then to 0.
struct SeedOption {
  uint64_t raw = 0;
  CLI::Option* option = nullptr;

  void attach(CLI::App* cmd) {
    option = cmd->add_option("--seed", raw, "random seed (default: $RIGMOTION_SEED or 0)");
  }
  std::optional<uint64_t> value() const {
    if (option != nullptr && option->count() > 0) return raw;
    return std::nullopt;
  }
};

int run_command(const Logger& log, const std::function<int()>& body) {
  try {
    return body();
  } catch (const rigmotion::RigError& e) {
    log.error("fatal", {{"code", rigmotion::error_code_name(e.code())}, {"message", e.what()}});
    return e.code() == rigmotion::ErrorCode::ConfigError ? 2 : 1;
  } catch (const std::exception& e) {
    log.error("fatal", {{"message", e.what()}});
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rigmotion: skeleton-aware motion synthesis toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "plain-text warnings/errors only (default: JSON lines)");

  rigmotion::cli::ValidateOptions validate_opts;
  CLI::App* validate = app.add_subcommand("validate", "parse and validate BVH files");
  validate->add_option("files", validate_opts.files, "BVH files to check");
  validate->add_option("--manifest", validate_opts.manifest, "dataset manifest to check");
  validate->add_flag("--strict", validate_opts.strict,
                     "also require preprocessed-rig invariants (no zero-length bones)");

  rigmotion::cli::PreprocessOptions preprocess_opts;
  CLI::App* preprocess = app.add_subcommand("preprocess", "normalize scale/center/axes");
  preprocess->add_option("--manifest", preprocess_opts.manifest, "input manifest")->required();
  preprocess->add_option("--out-dir", preprocess_opts.out_dir, "output directory")->required();
  preprocess->add_option("--source-forward", preprocess_opts.source_forward,
                         "source forward axis (default -Y)");
  preprocess->add_option("--source-up", preprocess_opts.source_up, "source up axis (default Z)");
  preprocess->add_option("--target-forward", preprocess_opts.target_forward,
                         "target forward axis (default -Y)");
  preprocess->add_option("--target-up", preprocess_opts.target_up, "target up axis (default Z)");

  rigmotion::cli::AugmentOptions augment_opts;
  SeedOption augment_seed;
  CLI::App* augment = app.add_subcommand("augment", "write rig-augmented variants per motion");
  augment->add_option("--manifest", augment_opts.manifest, "input manifest")->required();
  augment->add_option("--out-dir", augment_opts.out_dir, "output directory")->required();
  augment->add_option("--variants", augment_opts.variants,
                      "random variants per motion (plus the original)");
  augment->add_option("--policy", augment_opts.policy_path,
                      "augmentation policy JSON (default: per-joint scale groups)");
  augment_seed.attach(augment);

  rigmotion::cli::TrainOptions train_opts;
  SeedOption train_seed;
  CLI::App* train = app.add_subcommand("train", "train the two-stage denoiser");
  train->add_option("--manifest", train_opts.manifest, "training manifest")->required();
  train->add_option("--out", train_opts.out_checkpoint, "output checkpoint path")->required();
  train->add_option("--loss-csv", train_opts.loss_csv,
                    "loss log CSV path (default: <out>.loss.csv)");
  train->add_option("--preset", train_opts.preset, "model preset: desk or reference");
  train->add_option("--pose-steps", train_opts.pose_steps, "pose-stage optimizer steps");
  train->add_option("--motion-steps", train_opts.motion_steps, "motion-stage optimizer steps");
  train->add_option("--batch", train_opts.batch_size, "batch size (0: whole dataset)");
  train->add_option("--lr", train_opts.learning_rate, "Adam learning rate");
  train_seed.attach(train);

  rigmotion::cli::SampleOptions sample_opts;
  SeedOption sample_seed;
  CLI::App* sample = app.add_subcommand("sample", "sample a motion from a checkpoint");
  sample->add_option("--checkpoint", sample_opts.checkpoint, "trained checkpoint")->required();
  sample->add_option("--rig", sample_opts.rig_bvh, "BVH providing the target rig")->required();
  sample->add_option("--out", sample_opts.out_bvh, "output BVH path")->required();
  sample->add_option("--cond", sample_opts.caption, "caption to condition on (empty: none)");
  sample->add_option("--frames", sample_opts.frames, "frames to generate (0: model maximum)");
  sample->add_option("--guidance", sample_opts.guidance, "classifier-free guidance weight");
  sample_seed.attach(sample);

  rigmotion::cli::SampleLongOptions long_opts;
  SeedOption long_seed;
  CLI::App* sample_long =
      app.add_subcommand("sample-long", "sample chunked long motion with blending");
  sample_long->add_option("--checkpoint", long_opts.checkpoint, "trained checkpoint")->required();
  sample_long->add_option("--rig", long_opts.rig_bvh, "BVH providing the target rig")->required();
  sample_long->add_option("--out", long_opts.out_bvh, "output BVH path")->required();
  sample_long
      ->add_option("--cond", long_opts.captions, "one caption per chunk (repeatable)")
      ->required();
  sample_long->add_option("--overlap", long_opts.overlap, "overlapping frames between chunks");
  sample_long->add_option("--guidance", long_opts.guidance, "classifier-free guidance weight");
  long_seed.attach(sample_long);

  rigmotion::cli::EvalOptions eval_opts;
  SeedOption eval_seed;
  CLI::App* eval = app.add_subcommand("eval", "score generated motions against references");
  eval->add_option("--reference", eval_opts.reference_manifest, "reference manifest")->required();
  eval->add_option("--generated", eval_opts.generated_manifest, "generated manifest")->required();
  eval->add_option("--out-json", eval_opts.out_json, "metric report JSON path");
  eval->add_option("--out-csv", eval_opts.out_csv, "metric report CSV path");
  eval->add_option("--max-joints", eval_opts.max_joints, "embedding joint budget");
  eval_seed.attach(eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  Logger log(quiet);
  if (validate->parsed()) {
    return run_command(log, [&] { return cmd_validate(validate_opts, log); });
  }
  if (preprocess->parsed()) {
    return run_command(log, [&] { return cmd_preprocess(preprocess_opts, log); });
  }
  if (augment->parsed()) {
    augment_opts.seed = augment_seed.value();
    return run_command(log, [&] { return cmd_augment(augment_opts, log); });
  }
  if (train->parsed()) {
    train_opts.seed = train_seed.value();
    return run_command(log, [&] { return cmd_train(train_opts, log); });
  }
  if (sample->parsed()) {
    sample_opts.seed = sample_seed.value();
    return run_command(log, [&] { return cmd_sample(sample_opts, log); });
  }
  if (sample_long->parsed()) {
    long_opts.seed = long_seed.value();
    return run_command(log, [&] { return cmd_sample_long(long_opts, log); });
  }
  if (eval->parsed()) {
    eval_opts.seed = eval_seed.value();
    return run_command(log, [&] { return cmd_eval(eval_opts, log); });
  }
  return 2;
}
