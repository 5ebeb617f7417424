#pragma once
#include <cstdint>
#include <cmath>

namespace bou {

// counter-based streams: every draw is a pure function of (stream id, counter),
// so results do not depend on traversal order or thread count.

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kDrawMult = 0xD1B54A32D192ED03ull;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// child / replicate stream derivation
inline std::uint64_t derive_stream(std::uint64_t id, std::uint64_t salt) {
  return mix64(id ^ ((salt + 1) * kGolden));
}

inline std::uint64_t replicate_stream(std::uint64_t seed, std::uint64_t replicate) {
  return derive_stream(mix64(seed + kGolden), replicate);
}

struct Stream {
  std::uint64_t id = 0;
  std::uint64_t ctr = 0;

  explicit Stream(std::uint64_t stream_id) : id(stream_id) {}

  std::uint64_t next_u64() { return mix64(id + (++ctr) * kDrawMult); }

  // uniform on the open interval (0,1)
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double exponential(double rate) { return -std::log(uniform()) / rate; }
};

}  // namespace bou
