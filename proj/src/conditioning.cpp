#include "rigmotion/conditioning.hpp"

#include <cctype>

#include "rigmotion/types.hpp"

namespace rigmotion {

uint64_t fnv1a64(const std::string& data) {
  uint64_t hash = 14695981039346656037ULL;
  for (unsigned char byte : data) {
    hash ^= byte;
    hash *= 1099511628211ULL;
  }
  return hash;
}

Eigen::VectorXd embed_text(const std::string& text, int dim) {
  if (dim < 1) {
    throw RigError(ErrorCode::ConfigError, "embedding dimension must be positive");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  std::string token;
  auto flush = [&]() {
    if (token.empty()) {
      return;
    }
    const uint64_t h = fnv1a64(token);
    const int index = static_cast<int>(h % static_cast<uint64_t>(dim));
    const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
    v(index) += sign;
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) != 0) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  const double norm = v.norm();
  if (norm > 0.0) {
    v /= norm;
  }
  return v;
}

}  // namespace rigmotion
