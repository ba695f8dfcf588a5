#pragma once

#include <string>
#include <vector>

#include "rigmotion/denoiser.hpp"

namespace rigmotion {

struct TrainLogEntry {
  int step = 0;
  DenoiserStage stage = DenoiserStage::PoseOnly;
  double loss = 0.0;
};

struct TrainingSummary {
  std::vector<TrainLogEntry> entries;
  int smoothing_window = 0;
  double pose_initial_smoothed = 0.0;
  double pose_final_smoothed = 0.0;
  double motion_initial_smoothed = 0.0;
  double motion_final_smoothed = 0.0;
};

struct TrainerOptions {
  int pose_steps = 1000;
  int motion_steps = 1000;
  int batch_size = 0;  // 0 or >= dataset size: use the whole dataset per step
  double learning_rate = 2e-3;
  uint64_t seed = 0;
  int smoothing_window = 50;
};

/// Two-stage protocol: trains the pose stage, promotes the model to the
/// motion stage (freezing everything trained so far), then trains the
/// temporal groups. Smoothed losses are plain means over the first and last
/// `smoothing_window` steps of each stage.
TrainingSummary train_two_stage(DenoiserModel& model,
                                const std::vector<DenoiserModel::TrainingItem>& dataset,
                                const TrainerOptions& options);

/// One stage only (whichever the model is currently in).
std::vector<TrainLogEntry> train_stage(DenoiserModel& model,
                                       const std::vector<DenoiserModel::TrainingItem>& dataset,
                                       int steps, int batch_size, Rng& rng);

void save_loss_csv(const TrainingSummary& summary, const std::string& path);

double smoothed_mean(const std::vector<TrainLogEntry>& entries, DenoiserStage stage, int window,
                     bool from_end);

}  // namespace rigmotion
