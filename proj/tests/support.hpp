#pragma once
// shared helpers for the unit suites

#include "hbtcert/correlator.hpp"
#include "hbtcert/rng.hpp"
#include "hbtcert/timetag.hpp"

#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

namespace hbt::test {

// uniform random tags on [0, duration), sorted
inline std::vector<Timestamp> random_tags(std::size_t n, std::uint64_t duration, std::uint32_t res, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::uniform_int_distribution<std::uint64_t> d(0, duration - 1);
  std::vector<Timestamp> v(n);
  for (auto& t : v) t = d(g) / res * res;
  std::sort(v.begin(), v.end());
  return v;
}

// scratch directory removed on destruction
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int n = 0;
    path = std::filesystem::temp_directory_path() /
           ("hbtcert_test_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

// bin-materialising oracle: classify every bin pair explicitly
inline CoincidenceCounts naive_counts(const TimeTagStream& s, std::int64_t w, std::int64_t tau) {
  const auto D = static_cast<std::int64_t>(s.duration_ps());
  CoincidenceCounts c;
  c.w_ps = w;
  c.tau_ps = tau;
  auto has = [](std::span<const Timestamp> ch, std::int64_t lo, std::int64_t hi) {
    for (auto t : ch)
      if (static_cast<std::int64_t>(t) >= lo && static_cast<std::int64_t>(t) < hi) return true;
    return false;
  };
  for (std::int64_t k = -D / w - 2; k <= D / w + 2; ++k) {
    const std::int64_t a0 = k * w, b0 = k * w + tau;
    if (a0 < 0 || a0 + w > D || b0 < 0 || b0 + w > D) continue;
    const bool A = has(s.channel_a(), a0, a0 + w), B = has(s.channel_b(), b0, b0 + w);
    ++c.n_bins;
    c.n1a += A;
    c.n1b += B;
    c.n11 += A && B;
    c.n10 += A && !B;
    c.n01 += !A && B;
    c.n00 += !A && !B;
  }
  return c;
}

}  // namespace hbt::test
