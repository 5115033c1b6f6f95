#pragma once

#include <cstdint>
#include <random>

namespace hbt {

// Seed splitting: every random consumer gets its own engine seeded from
// (scenario seed, purpose, index) through splitmix64, so results never depend
// on evaluation order or thread count.
enum class Purpose : std::uint64_t {
  emission = 1,
  detection = 2,
  noise = 3,
  survival = 4,
  thin = 5,
  inject = 6,
  bootstrap = 7,
  misc = 99,
};

std::uint64_t splitmix64(std::uint64_t& state);
std::uint64_t derive_seed(std::uint64_t seed, Purpose purpose, std::uint64_t index = 0);

using Rng = std::mt19937_64;
Rng make_rng(std::uint64_t seed, Purpose purpose, std::uint64_t index = 0);

// 53-bit uniform in [0,1)
inline double uniform01(Rng& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

}  // namespace hbt
