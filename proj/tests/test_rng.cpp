#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "doctest.h"

#include "polygen/rng.hpp"

using namespace polygen;

TEST_CASE("philox4x32-10 known-answer vectors") {
  // Reference vectors from the Random123 test suite.
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                   {0xffffffffu, 0xffffffffu}) ==
        std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(philox4x32({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                   {0xa4093822u, 0x299f31d0u}) ==
        std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("identical seed and stream reproduce the identical sequence") {
  SeededRng a(123456789, 7);
  SeededRng b(123456789, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  for (int i = 0; i < 1000; ++i) CHECK(a.gaussian() == b.gaussian());
}

TEST_CASE("distinct seeds and distinct streams differ") {
  SeededRng a(1), b(2);
  bool any_diff = false;
  for (int i = 0; i < 16; ++i) any_diff |= a.next_u64() != b.next_u64();
  CHECK(any_diff);

  SeededRng base(42);
  SeededRng s1 = base.split(1);
  SeededRng s2 = base.split(2);
  any_diff = false;
  for (int i = 0; i < 16; ++i) any_diff |= s1.next_u64() != s2.next_u64();
  CHECK(any_diff);
}

TEST_CASE("split streams are independent of parent consumption") {
  SeededRng parent(99);
  (void)parent.next_u64();
  (void)parent.next_u64();
  SeededRng child_after = parent.split(5);
  SeededRng child_fresh = SeededRng(99).split(5);
  for (int i = 0; i < 64; ++i) CHECK(child_after.next_u64() == child_fresh.next_u64());
}

TEST_CASE("uniform01 lies in [0,1)") {
  SeededRng rng(7);
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("gaussian sample moments over 1e6 draws") {
  SeededRng rng(2024);
  const int n = 1000000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gaussian();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.01);
  CHECK(std::abs(var - 1.0) < 0.01);
}

TEST_CASE("uniform_index covers all values and is unbiased enough") {
  SeededRng rng(5);
  const std::uint64_t n = 8;
  std::vector<int> counts(n, 0);
  const int draws = 80000;
  for (int i = 0; i < draws; ++i) ++counts[rng.uniform_index(n)];
  // 5 sigma around 10000 with sigma = sqrt(draws * p * (1-p)) ~ 93.5
  for (std::uint64_t v = 0; v < n; ++v) CHECK(std::abs(counts[v] - 10000) < 470);
  CHECK(rng.uniform_index(1) == 0);
  CHECK_THROWS(rng.uniform_index(0));
}

TEST_CASE("distinct streams give distinct first draws") {
  SeededRng base(0);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t s = 0; s < 256; ++s) firsts.insert(base.split(s).next_u64());
  CHECK(firsts.size() == 256);
}
