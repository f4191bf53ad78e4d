#pragma once

#include <array>
#include <cstdint>

namespace polygen {

// One Philox4x32-10 block: 128-bit counter, 64-bit key -> four 32-bit words.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Counter-based generator over Philox4x32-10. A (seed, stream) pair names an
// independent random stream; streams never overlap because the stream id
// occupies the upper counter words. Identical seed + stream + call sequence
// reproduces the identical output sequence on any platform.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed, std::uint64_t stream = 0);

  // New generator on the same seed but a different stream. Used to hand each
  // worker (batch sample, evaluation sample) its own stream.
  SeededRng split(std::uint64_t stream) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform01();

  // Standard normal via the Marsaglia polar method (second value cached).
  double gaussian();

  // Unbiased uniform draw from {0, ..., n-1} by rejection.
  std::uint64_t uniform_index(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int block_pos_ = 4;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace polygen
