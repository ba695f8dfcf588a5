#include "rigmotion/trainer.hpp"

#include <algorithm>
#include <fstream>

namespace rigmotion {

std::vector<TrainLogEntry> train_stage(DenoiserModel& model,
                                       const std::vector<DenoiserModel::TrainingItem>& dataset,
                                       int steps, int batch_size, Rng& rng) {
  if (dataset.empty()) {
    throw RigError(ErrorCode::ConfigError, "training dataset is empty");
  }
  const int n = static_cast<int>(dataset.size());
  const bool full_batch = batch_size <= 0 || batch_size >= n;
  std::vector<TrainLogEntry> log;
  log.reserve(static_cast<size_t>(steps));
  for (int step = 0; step < steps; ++step) {
    std::vector<DenoiserModel::TrainingItem> batch;
    if (full_batch) {
      batch = dataset;
    } else {
      batch.reserve(static_cast<size_t>(batch_size));
      for (int i = 0; i < batch_size; ++i) {
        batch.push_back(dataset[static_cast<size_t>(rng.uniform_int(0, n - 1))]);
      }
    }
    const double loss = model.training_step(batch, rng);
    log.push_back({step, model.stage(), loss});
  }
  return log;
}

double smoothed_mean(const std::vector<TrainLogEntry>& entries, DenoiserStage stage, int window,
                     bool from_end) {
  std::vector<double> losses;
  for (const TrainLogEntry& e : entries) {
    if (e.stage == stage) {
      losses.push_back(e.loss);
    }
  }
  if (losses.empty()) {
    return 0.0;
  }
  const size_t w = std::min<size_t>(static_cast<size_t>(std::max(window, 1)), losses.size());
  double total = 0.0;
  if (from_end) {
    for (size_t i = losses.size() - w; i < losses.size(); ++i) {
      total += losses[i];
    }
  } else {
    for (size_t i = 0; i < w; ++i) {
      total += losses[i];
    }
  }
  return total / static_cast<double>(w);
}

TrainingSummary train_two_stage(DenoiserModel& model,
                                const std::vector<DenoiserModel::TrainingItem>& dataset,
                                const TrainerOptions& options) {
  if (model.stage() != DenoiserStage::PoseOnly) {
    throw RigError(ErrorCode::StageMismatch, "two-stage training starts from the pose stage");
  }
  model.optimizer().lr = options.learning_rate;

  TrainingSummary summary;
  summary.smoothing_window = options.smoothing_window;
  Rng rng(derive_seed(options.seed, 0x7261696e));  // distinct stream per purpose

  std::vector<TrainLogEntry> pose_log =
      train_stage(model, dataset, options.pose_steps, options.batch_size, rng);
  summary.entries.insert(summary.entries.end(), pose_log.begin(), pose_log.end());

  if (options.motion_steps > 0) {
    model.to_motion_stage();
    model.optimizer().lr = options.learning_rate;
    std::vector<TrainLogEntry> motion_log =
        train_stage(model, dataset, options.motion_steps, options.batch_size, rng);
    for (TrainLogEntry& e : motion_log) {
      e.step += options.pose_steps;
    }
    summary.entries.insert(summary.entries.end(), motion_log.begin(), motion_log.end());
  }

  summary.pose_initial_smoothed =
      smoothed_mean(summary.entries, DenoiserStage::PoseOnly, options.smoothing_window, false);
  summary.pose_final_smoothed =
      smoothed_mean(summary.entries, DenoiserStage::PoseOnly, options.smoothing_window, true);
  summary.motion_initial_smoothed =
      smoothed_mean(summary.entries, DenoiserStage::Motion, options.smoothing_window, false);
  summary.motion_final_smoothed =
      smoothed_mean(summary.entries, DenoiserStage::Motion, options.smoothing_window, true);
  return summary;
}

void save_loss_csv(const TrainingSummary& summary, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw RigError(ErrorCode::IoError, "cannot open '" + path + "' for writing");
  }
  out << "step,stage,loss\n";
  for (const TrainLogEntry& e : summary.entries) {
    out << e.step << ',' << stage_name(e.stage) << ',' << e.loss << '\n';
  }
  if (!out) {
    throw RigError(ErrorCode::IoError, "failed to write '" + path + "'");
  }
}

}  // namespace rigmotion
