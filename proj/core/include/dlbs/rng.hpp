#pragma once

#include <Eigen/Core>
#include <array>
#include <cmath>
#include <cstdint>

namespace dlbs {

// Philox4x32-10 counter-based generator. Every draw is a pure function of
// (key, counter), so a stream addressed by (seed, purpose, step, beam,
// candidate) produces the same values no matter which worker consumes it or
// in which order streams are touched. That property is what makes search
// results independent of the parallel schedule.
namespace philox {

inline std::array<uint32_t, 4> block(std::array<uint32_t, 4> ctr,
                                     std::array<uint32_t, 2> key) {
  constexpr uint32_t kMul0 = 0xD2511F53u;
  constexpr uint32_t kMul1 = 0xCD9E8D57u;
  constexpr uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const uint64_t p0 = uint64_t(kMul0) * ctr[0];
    const uint64_t p1 = uint64_t(kMul1) * ctr[2];
    ctr = {uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], uint32_t(p1),
           uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], uint32_t(p0)};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

}  // namespace philox

// Disjoint stream families. The tag lives in the top four bits of the last
// counter word, leaving 2^28 blocks (2^29 normals) per stream.
enum class StreamPurpose : uint32_t {
  kInit = 1,       // initial beam draws
  kCandidate = 2,  // per-step candidate noise
  kData = 3,       // exact data-distribution sampling
  kFeedback = 4,   // synthetic feedback noise
  kShuffle = 5,    // permutation and sign-flip resampling
};

class RandomStream {
 public:
  RandomStream(uint64_t seed, StreamPurpose purpose, uint32_t step = 0,
               uint32_t beam = 0, uint32_t candidate = 0)
      : key_{uint32_t(seed), uint32_t(seed >> 32)},
        base_{step, beam, candidate, uint32_t(purpose) << 28} {}

  // 64 fresh bits.
  uint64_t bits() {
    if (half_full_) {
      half_full_ = false;
      return half_;
    }
    auto out = philox::block(counter(block_index_++), key_);
    half_ = (uint64_t(out[2]) << 32) | out[3];
    half_full_ = true;
    return (uint64_t(out[0]) << 32) | out[1];
  }

  // Uniform in [0, 1).
  double uniform() { return double(bits() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; pairs are cached.
  double normal() {
    if (spare_full_) {
      spare_full_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps the log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    spare_full_ = true;
    return r * std::cos(a);
  }

  Eigen::VectorXd normal_vector(int d) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = normal();
    return v;
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) { return bits() % n; }

 private:
  std::array<uint32_t, 4> counter(uint32_t block_index) const {
    return {base_[0], base_[1], base_[2], base_[3] | (block_index & 0x0FFFFFFFu)};
  }

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> base_;
  uint32_t block_index_ = 0;
  uint64_t half_ = 0;
  bool half_full_ = false;
  double spare_ = 0.0;
  bool spare_full_ = false;
};

}  // namespace dlbs
