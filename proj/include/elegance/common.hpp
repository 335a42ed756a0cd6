#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace elegance {

// Error taxonomy maps onto CLI exit codes: config=1, numeric=2, verify=3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct VerifyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64 finalizer; the basis of all seed derivation.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view bytes, uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// All randomness flows from one root seed through labeled/indexed derivation,
// so any component can be re-run in isolation.
inline uint64_t derive_seed(uint64_t root, std::string_view label) {
  return mix64(root ^ fnv1a64(label));
}

inline uint64_t derive_seed(uint64_t root, uint64_t index) {
  return mix64(root ^ mix64(index ^ 0x5bf0363546e45e1dULL));
}

// Small deterministic generator. std::* distributions are implementation
// defined, which would break bit-exact replay across toolchains, so the
// uniform/normal transforms are spelled out here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // [0, n)
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<uint64_t>(n)); }

  // Box-Muller; consumes two uniforms per call, second output discarded.
  double normal();

 private:
  uint64_t state_;
};

}  // namespace elegance
