#pragma once

#include <cstdint>

namespace rigmotion {

/// Deterministic RNG with a platform-independent stream (splitmix64 core,
/// Box-Muller normals). Seeded runs reproduce bit-identically, which the
/// augmentation records and sampling harness rely on.
// Mixes a stream tag into a seed, yielding the seed of an independent child
// stream; used for per-file / per-stage determinism.
uint64_t derive_seed(uint64_t seed, uint64_t stream);

class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Rng seeded by derive_seed(seed, stream).
  static Rng derive(uint64_t seed, uint64_t stream);

  uint64_t next_u64();
  double uniform();  // [0, 1)
  double uniform(double lo, double hi);
  int uniform_int(int lo, int hi);  // inclusive bounds
  bool bernoulli(double p);
  double normal();  // standard normal

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace rigmotion
