#pragma once

#include <string>

#include "rigmotion/denoiser.hpp"

namespace rigmotion {

/// Binary model container: a fixed magic, a format version, a JSON header
/// (config, stage, schedule, normalization stats, parameter inventory), then
/// the raw little-endian doubles of every parameter in inventory order.
///
/// Optimizer moments are not persisted; resuming training restarts Adam.
void save_checkpoint(DenoiserModel& model, const std::string& path);
DenoiserModel load_checkpoint(const std::string& path);

}  // namespace rigmotion
