#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rigmotion/augment.hpp"
#include "rigmotion/bvh.hpp"
#include "rigmotion/checkpoint.hpp"
#include "rigmotion/conditioning.hpp"
#include "rigmotion/manifest.hpp"
#include "rigmotion/metrics.hpp"
#include "rigmotion/preprocess.hpp"
#include "rigmotion/rng.hpp"
#include "rigmotion/trainer.hpp"
#include "rigmotion/types.hpp"

namespace rigmotion::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Logger

void Logger::emit(const char* level, const std::string& event, json fields) const {
  if (quiet_) {
    if (std::string_view(level) == "info") return;
    std::ostringstream line;
    line << level << ": " << event;
    for (const auto& [key, value] : fields.items()) {
      line << ' ' << key << '=';
      if (value.is_string()) {
        line << value.get<std::string>();
      } else {
        line << value.dump();
      }
    }
    std::cout << line.str() << '\n';
    return;
  }
  json record;
  record["level"] = level;
  record["event"] = event;
  for (auto& [key, value] : fields.items()) record[key] = std::move(value);
  std::cout << record.dump() << '\n';
}

void Logger::info(const std::string& event, json fields) const {
  emit("info", event, std::move(fields));
}

void Logger::warn(const std::string& event, json fields) const {
  emit("warn", event, std::move(fields));
}

void Logger::error(const std::string& event, json fields) const {
  emit("error", event, std::move(fields));
}

// ---------------------------------------------------------------------------
// Helpers

uint64_t resolve_seed(const std::optional<uint64_t>& cli_seed) {
  if (cli_seed.has_value()) return *cli_seed;
  const char* env = std::getenv("RIGMOTION_SEED");
  if (env == nullptr || *env == '\0') return 0;
  uint64_t value = 0;
  const char* end = env + std::string_view(env).size();
  auto [ptr, ec] = std::from_chars(env, end, value, 10);
  if (ec != std::errc{} || ptr != end) {
    throw RigError(ErrorCode::ConfigError,
                   std::string("RIGMOTION_SEED is not an unsigned integer: ") + env);
  }
  return value;
}

namespace {

std::string error_code_string(ErrorCode code) { return std::string(error_code_name(code)); }

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw RigError(ErrorCode::IoError, "cannot create directory " + dir + ": " + ec.message());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RigError(ErrorCode::IoError, "cannot open " + path + " for writing");
  out << text;
  if (!out) throw RigError(ErrorCode::IoError, "failed writing " + path);
}

std::string caption_of(const ManifestEntry& entry) {
  if (!entry.caption_short.empty()) return entry.caption_short;
  if (!entry.caption_mid.empty()) return entry.caption_mid;
  return entry.caption_long;
}

// Singleton part group per non-root joint with the full allowed range. Used
// when no policy file is given, so augmentation works on any rig without a
// hand-written group layout.
AugmentationPolicy default_policy_for(const Motion& motion) {
  AugmentationPolicy policy;
  const auto& topo = motion.rig.topology;
  for (int j = 0; j < topo.joint_count(); ++j) {
    if (topo.parents[j] < 0) continue;
    PartGroup group;
    group.name = topo.joint_names[j];
    group.joints = {topo.joint_names[j]};
    group.lo = 0.8;
    group.hi = 1.2;
    policy.part_groups.groups.push_back(std::move(group));
  }
  return policy;
}

std::string zero_padded(int value, int width) {
  std::string digits = std::to_string(value);
  if (static_cast<int>(digits.size()) < width) {
    digits.insert(digits.begin(), width - digits.size(), '0');
  }
  return digits;
}

}  // namespace

// ---------------------------------------------------------------------------
// validate

int cmd_validate(const ValidateOptions& options, const Logger& log) {
  std::vector<std::string> files = options.files;
  if (!options.manifest.empty()) {
    Manifest manifest = load_manifest(options.manifest);
    for (int i = 0; i < manifest.size(); ++i) files.push_back(manifest.resolve(i));
  }
  if (files.empty()) {
    throw RigError(ErrorCode::ConfigError, "validate needs BVH files or --manifest");
  }

  int failures = 0;
  for (const std::string& path : files) {
    try {
      BvhDocument doc = load_bvh_file(path);
      ValidationResult result = validate_motion(doc.motion);
      if (result.ok && options.strict) result = validate_rig(doc.motion.rig);
      if (!result.ok) {
        ++failures;
        log.error("invalid-motion", {{"file", path},
                                     {"code", error_code_string(result.code)},
                                     {"message", result.message}});
        continue;
      }
      json fields = {{"file", path},
                     {"joints", doc.motion.joint_count()},
                     {"frames", doc.motion.frame_count()},
                     {"frame_time", doc.motion.frame_time}};
      if (!doc.warnings.empty()) fields["warnings"] = doc.warnings;
      log.info("valid", fields);
    } catch (const RigError& e) {
      ++failures;
      log.error("invalid-file",
                {{"file", path}, {"code", error_code_string(e.code())}, {"message", e.what()}});
    }
  }
  log.info("validate-complete",
           {{"files", static_cast<int>(files.size())}, {"failures", failures}});
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// preprocess

int cmd_preprocess(const PreprocessOptions& options, const Logger& log) {
  Manifest manifest = load_manifest(options.manifest);
  AxisConfig axes;
  axes.source_forward = parse_axis(options.source_forward);
  axes.source_up = parse_axis(options.source_up);
  axes.target_forward = parse_axis(options.target_forward);
  axes.target_up = parse_axis(options.target_up);
  rotation_for_axes(axes);  // reject invalid axis pairs before touching files
  ensure_directory(options.out_dir);

  Manifest produced;
  produced.directory = options.out_dir;
  int failures = 0;
  for (int i = 0; i < manifest.size(); ++i) {
    const std::string source_path = manifest.resolve(i);
    try {
      BvhDocument doc = load_bvh_file(source_path);
      BvhDocument normalized = preprocess(doc, axes);
      const std::string name = fs::path(manifest.entries[i].bvh_path).filename().string();
      const std::string out_path = (fs::path(options.out_dir) / name).string();
      save_bvh_file(normalized, out_path);
      ManifestEntry entry = manifest.entries[i];
      entry.bvh_path = name;
      produced.entries.push_back(std::move(entry));
      log.info("preprocessed", {{"source", source_path}, {"output", out_path}});
    } catch (const RigError& e) {
      ++failures;
      log.error("preprocess-failed", {{"file", source_path},
                                      {"code", error_code_string(e.code())},
                                      {"message", e.what()}});
    }
  }
  const std::string manifest_path = (fs::path(options.out_dir) / "manifest.json").string();
  save_manifest(produced, manifest_path);
  log.info("preprocess-complete", {{"motions", manifest.size()},
                                   {"written", produced.size()},
                                   {"failures", failures},
                                   {"manifest", manifest_path}});
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// augment

int cmd_augment(const AugmentOptions& options, const Logger& log) {
  if (options.variants < 0) {
    throw RigError(ErrorCode::ConfigError, "--variants must be non-negative");
  }
  Manifest manifest = load_manifest(options.manifest);
  std::optional<AugmentationPolicy> shared_policy;
  if (!options.policy_path.empty()) shared_policy = load_policy(options.policy_path);
  ensure_directory(options.out_dir);
  const uint64_t seed = resolve_seed(options.seed);

  Manifest produced;
  produced.directory = options.out_dir;
  int failures = 0;
  int files_written = 0;
  for (int i = 0; i < manifest.size(); ++i) {
    const std::string source_path = manifest.resolve(i);
    const std::string stem = fs::path(manifest.entries[i].bvh_path).stem().string();
    Motion motion;
    try {
      motion = load_bvh_file(source_path).motion;
    } catch (const RigError& e) {
      ++failures;
      log.error("augment-failed", {{"file", source_path},
                                   {"code", error_code_string(e.code())},
                                   {"message", e.what()}});
      continue;
    }
    const AugmentationPolicy policy =
        shared_policy.has_value() ? *shared_policy : default_policy_for(motion);

    // Variant 0 is the canonical re-emit of the source motion; variants
    // 1..N are random draws with per-variant seeds so any single file can be
    // regenerated in isolation.
    for (int variant = 0; variant <= options.variants; ++variant) {
      const std::string base = stem + "_v" + zero_padded(variant, 3);
      const std::string bvh_path = (fs::path(options.out_dir) / (base + ".bvh")).string();
      const uint64_t variant_seed =
          derive_seed(seed, static_cast<uint64_t>(i) * 1000003ull + static_cast<uint64_t>(variant));
      try {
        json sidecar;
        sidecar["source"] = manifest.entries[i].bvh_path;
        sidecar["variant"] = variant;
        sidecar["seed"] = variant_seed;
        json records = json::array();
        if (variant == 0) {
          save_bvh_file(make_document(motion), bvh_path);
        } else {
          AugmentationResult result = augment_motion(motion, policy, variant_seed);
          for (const AugmentationRecord& record : result.records) {
            records.push_back(record_to_json(record));
          }
          save_bvh_file(make_document(result.motion), bvh_path);
        }
        sidecar["records"] = std::move(records);
        write_text_file((fs::path(options.out_dir) / (base + ".json")).string(),
                        sidecar.dump(2) + "\n");
        ManifestEntry entry = manifest.entries[i];
        entry.bvh_path = base + ".bvh";
        produced.entries.push_back(std::move(entry));
        ++files_written;
      } catch (const RigError& e) {
        ++failures;
        log.error("augment-failed", {{"file", source_path},
                                     {"variant", variant},
                                     {"code", error_code_string(e.code())},
                                     {"message", e.what()}});
      }
    }
    log.info("augmented", {{"file", source_path}, {"variants", options.variants}});
  }
  const std::string manifest_path = (fs::path(options.out_dir) / "manifest.json").string();
  save_manifest(produced, manifest_path);
  log.info("augment-complete", {{"motions", manifest.size()},
                                {"files_written", files_written},
                                {"failures", failures},
                                {"manifest", manifest_path}});
  return failures == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const TrainOptions& options, const Logger& log) {
  DenoiserConfig config;
  if (options.preset == "desk") {
    config = DenoiserConfig::desk_preset();
  } else if (options.preset == "reference") {
    config = DenoiserConfig{};
  } else {
    throw RigError(ErrorCode::ConfigError, "unknown preset: " + options.preset);
  }
  if (options.pose_steps < 0 || options.motion_steps < 0) {
    throw RigError(ErrorCode::ConfigError, "step counts must be non-negative");
  }
  if (!(options.learning_rate > 0.0)) {
    throw RigError(ErrorCode::ConfigError, "--lr must be positive");
  }

  Manifest manifest = load_manifest(options.manifest);
  if (manifest.size() == 0) {
    throw RigError(ErrorCode::ConfigError, "training manifest is empty");
  }

  std::vector<DenoiserModel::TrainingItem> dataset;
  std::vector<Motion> motions;
  for (int i = 0; i < manifest.size(); ++i) {
    const std::string path = manifest.resolve(i);
    Motion motion = load_bvh_file(path).motion;
    if (motion.frame_count() > config.f_max) {
      log.warn("clip-truncated", {{"file", path},
                                  {"frames", motion.frame_count()},
                                  {"kept", config.f_max}});
      motion.rotations.resize(config.f_max);
    }
    DenoiserModel::TrainingItem item;
    item.motion = motion;
    item.cond = embed_text(caption_of(manifest.entries[i]), config.cond_dim);
    motions.push_back(std::move(motion));
    dataset.push_back(std::move(item));
  }

  const uint64_t seed = resolve_seed(options.seed);
  DenoiserModel model(config, seed);
  model.set_norm_stats(NormStats::fit(motions));

  TrainerOptions trainer;
  trainer.pose_steps = options.pose_steps;
  trainer.motion_steps = options.motion_steps;
  trainer.batch_size = options.batch_size;
  trainer.learning_rate = options.learning_rate;
  trainer.seed = seed;
  log.info("train-start", {{"preset", options.preset},
                           {"motions", manifest.size()},
                           {"pose_steps", trainer.pose_steps},
                           {"motion_steps", trainer.motion_steps},
                           {"seed", seed}});
  TrainingSummary summary = train_two_stage(model, dataset, trainer);

  save_checkpoint(model, options.out_checkpoint);
  const std::string csv_path =
      options.loss_csv.empty() ? options.out_checkpoint + ".loss.csv" : options.loss_csv;
  save_loss_csv(summary, csv_path);

  json run;
  run["preset"] = options.preset;
  run["manifest"] = options.manifest;
  run["motions"] = manifest.size();
  run["pose_steps"] = trainer.pose_steps;
  run["motion_steps"] = trainer.motion_steps;
  run["batch_size"] = trainer.batch_size;
  run["learning_rate"] = trainer.learning_rate;
  run["seed"] = seed;
  run["pose_initial_smoothed"] = summary.pose_initial_smoothed;
  run["pose_final_smoothed"] = summary.pose_final_smoothed;
  run["motion_initial_smoothed"] = summary.motion_initial_smoothed;
  run["motion_final_smoothed"] = summary.motion_final_smoothed;
  write_text_file(options.out_checkpoint + ".run.json", run.dump(2) + "\n");

  log.info("train-complete", {{"checkpoint", options.out_checkpoint},
                              {"loss_csv", csv_path},
                              {"pose_initial_smoothed", summary.pose_initial_smoothed},
                              {"pose_final_smoothed", summary.pose_final_smoothed},
                              {"motion_initial_smoothed", summary.motion_initial_smoothed},
                              {"motion_final_smoothed", summary.motion_final_smoothed}});
  return 0;
}

// ---------------------------------------------------------------------------
// sample

int cmd_sample(const SampleOptions& options, const Logger& log) {
  DenoiserModel model = load_checkpoint(options.checkpoint);
  BvhDocument rig_doc = load_bvh_file(options.rig_bvh);
  const int frames = options.frames > 0 ? options.frames : model.config().f_max;
  Eigen::VectorXd cond;
  if (!options.caption.empty()) cond = embed_text(options.caption, model.config().cond_dim);

  const uint64_t seed = resolve_seed(options.seed);
  Rng rng(seed);
  Motion motion = model.sample(cond, rig_doc.rig, frames, options.guidance, rng);
  motion.frame_time = rig_doc.motion.frame_time;
  save_bvh_file(make_document(motion), options.out_bvh);
  log.info("sampled", {{"output", options.out_bvh},
                       {"frames", motion.frame_count()},
                       {"joints", motion.joint_count()},
                       {"guidance", options.guidance},
                       {"seed", seed}});
  return 0;
}

// ---------------------------------------------------------------------------
// sample-long

int cmd_sample_long(const SampleLongOptions& options, const Logger& log) {
  if (options.captions.empty()) {
    throw RigError(ErrorCode::ConfigError, "sample-long needs at least one --cond caption");
  }
  DenoiserModel model = load_checkpoint(options.checkpoint);
  BvhDocument rig_doc = load_bvh_file(options.rig_bvh);
  std::vector<Eigen::VectorXd> conds;
  for (const std::string& caption : options.captions) {
    conds.push_back(caption.empty() ? Eigen::VectorXd()
                                    : embed_text(caption, model.config().cond_dim));
  }

  const uint64_t seed = resolve_seed(options.seed);
  Rng rng(seed);
  SampleLongTrace trace;
  Motion motion = model.sample_long(conds, rig_doc.rig, options.overlap, options.guidance, rng,
                                    &trace);
  motion.frame_time = rig_doc.motion.frame_time;
  save_bvh_file(make_document(motion), options.out_bvh);

  json weights = json::array();
  for (double w : trace.blend_weights) weights.push_back(w);
  log.info("sampled-long", {{"output", options.out_bvh},
                            {"chunks", static_cast<int>(options.captions.size())},
                            {"chunk_frames", trace.chunk_frames},
                            {"overlap", trace.overlap},
                            {"frames", motion.frame_count()},
                            {"blend_weights", weights},
                            {"guidance", options.guidance},
                            {"seed", seed}});
  return 0;
}

// ---------------------------------------------------------------------------
// eval

namespace {

std::vector<Motion> load_all(const Manifest& manifest) {
  std::vector<Motion> motions;
  for (int i = 0; i < manifest.size(); ++i) {
    motions.push_back(load_bvh_file(manifest.resolve(i)).motion);
  }
  return motions;
}

Eigen::MatrixXd stacked_window_embeddings(const std::vector<Motion>& motions, int window_frames,
                                          const EmbeddingProvider& provider) {
  std::vector<Eigen::MatrixXd> parts;
  Eigen::Index rows = 0;
  for (const Motion& motion : motions) {
    parts.push_back(window_embeddings(extract_windows(motion, window_frames), provider));
    rows += parts.back().rows();
  }
  Eigen::MatrixXd all(rows, provider.dimension());
  Eigen::Index at = 0;
  for (const Eigen::MatrixXd& part : parts) {
    all.middleRows(at, part.rows()) = part;
    at += part.rows();
  }
  return all;
}

}  // namespace

int cmd_eval(const EvalOptions& options, const Logger& log) {
  Manifest ref_manifest = load_manifest(options.reference_manifest);
  Manifest gen_manifest = load_manifest(options.generated_manifest);
  std::vector<Motion> reference = load_all(ref_manifest);
  std::vector<Motion> generated = load_all(gen_manifest);
  if (reference.empty() || generated.empty()) {
    throw RigError(ErrorCode::ConfigError, "both manifests must contain at least one motion");
  }
  if (reference.size() != generated.size()) {
    log.warn("size-mismatch", {{"reference", static_cast<int>(reference.size())},
                               {"generated", static_cast<int>(generated.size())}});
  }
  FkPositionProvider provider(options.max_joints);
  const int pairs = static_cast<int>(std::min(reference.size(), generated.size()));

  MetricReport report;

  // Coverage / novelty: curves averaged over index-aligned pairs.
  for (int i = 0; i < pairs; ++i) {
    MetricCurve cov = coverage_curve(reference[i], generated[i], provider);
    MetricCurve nov = novelty_curve(generated[i], reference[i], provider);
    if (i == 0) {
      report.coverage = cov;
      report.novelty = nov;
    } else {
      for (size_t k = 0; k < cov.values.size(); ++k) report.coverage.values[k] += cov.values[k];
      for (size_t k = 0; k < nov.values.size(); ++k) report.novelty.values[k] += nov.values[k];
    }
  }
  for (double& v : report.coverage.values) v /= pairs;
  for (double& v : report.novelty.values) v /= pairs;
  report.coverage_auc = auc_sweep(report.coverage);
  report.novelty_auc = auc_sweep(report.novelty);

  // Distribution distance over all stride-1 windows pooled per side, using
  // a window length every motion on both sides can fill.
  int window_frames = kDefaultMaxFrames;
  for (const Motion& motion : reference) window_frames = std::min(window_frames, motion.frame_count());
  for (const Motion& motion : generated) window_frames = std::min(window_frames, motion.frame_count());
  try {
    report.fid = fid(stacked_window_embeddings(reference, window_frames, provider),
                     stacked_window_embeddings(generated, window_frames, provider));
  } catch (const RigError& e) {
    log.warn("fid-skipped", {{"code", error_code_string(e.code())}, {"message", e.what()}});
  }

  // Retrieval and alignment over whole-motion embeddings, index-paired.
  Eigen::MatrixXd ref_rows(pairs, provider.dimension());
  Eigen::MatrixXd gen_rows(pairs, provider.dimension());
  for (int i = 0; i < pairs; ++i) {
    ref_rows.row(i) = motion_embedding(reference[i], provider).transpose();
    gen_rows.row(i) = motion_embedding(generated[i], provider).transpose();
  }
  report.r_precision = r_precision(gen_rows, ref_rows, 1);
  report.alignment = alignment(gen_rows, ref_rows);

  // Multimodality over generated motions grouped by species tag (falling
  // back to the short caption); needs at least one group of two.
  std::map<std::string, std::vector<int>> group_indices;
  for (int i = 0; i < gen_manifest.size() && i < static_cast<int>(generated.size()); ++i) {
    const ManifestEntry& entry = gen_manifest.entries[i];
    const std::string key = entry.species_tag.empty() ? entry.caption_short : entry.species_tag;
    group_indices[key].push_back(i);
  }
  std::vector<Eigen::MatrixXd> groups;
  for (const auto& [key, indices] : group_indices) {
    if (indices.size() < 2) continue;
    Eigen::MatrixXd rows(indices.size(), provider.dimension());
    for (size_t r = 0; r < indices.size(); ++r) {
      rows.row(static_cast<Eigen::Index>(r)) =
          motion_embedding(generated[indices[r]], provider).transpose();
    }
    groups.push_back(std::move(rows));
  }
  if (!groups.empty()) {
    report.multimodality = multimodality(groups, resolve_seed(options.seed));
  } else {
    log.info("multimodality-skipped", {{"reason", "no group with at least two motions"}});
  }

  if (!options.out_json.empty()) {
    write_text_file(options.out_json, report.to_json().dump(2) + "\n");
  }
  if (!options.out_csv.empty()) write_text_file(options.out_csv, report.to_csv());

  json scalars = {{"coverage_auc", report.coverage_auc},
                  {"novelty_auc", report.novelty_auc},
                  {"r_precision", report.r_precision},
                  {"alignment", report.alignment}};
  if (std::isfinite(report.fid)) scalars["fid"] = report.fid;
  if (std::isfinite(report.multimodality)) scalars["multimodality"] = report.multimodality;
  log.info("eval-complete", scalars);
  return 0;
}

}  // namespace rigmotion::cli
