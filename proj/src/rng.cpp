#include "rigmotion/rng.hpp"

#include <cmath>

namespace rigmotion {

namespace {

uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

Rng::Rng(uint64_t seed) : state_(seed) {
  // Burn one output so nearby seeds decorrelate immediately.
  splitmix64(state_);
}

uint64_t derive_seed(uint64_t seed, uint64_t stream) {
  uint64_t s = seed;
  const uint64_t a = splitmix64(s);
  s ^= stream * 0xD1B54A32D192ED03ull;
  const uint64_t b = splitmix64(s);
  return a ^ (b + 0x2545F4914F6CDD1Dull);
}

Rng Rng::derive(uint64_t seed, uint64_t stream) { return Rng(derive_seed(seed, stream)); }

uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

int Rng::uniform_int(int lo, int hi) {
  // hi inclusive; rejection-free modulo is fine for the small ranges used here.
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  return lo + static_cast<int>(next_u64() % span);
}

bool Rng::bernoulli(double p) { return uniform() < p; }

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller on (0,1] uniforms.
  double u1 = 0.0;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * 3.14159265358979323846 * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

}  // namespace rigmotion
