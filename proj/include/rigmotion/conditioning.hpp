#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>

namespace rigmotion {

/// Deterministic bag-of-words text embedding by feature hashing: tokens are
/// lowercased alphanumeric runs, each hashed to a coordinate and a sign, and
/// the accumulated vector is L2-normalized. Dependency-free stand-in for a
/// learned text encoder; any fixed-width embedding can replace it.
Eigen::VectorXd embed_text(const std::string& text, int dim);

uint64_t fnv1a64(const std::string& data);

}  // namespace rigmotion
