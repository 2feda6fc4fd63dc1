#pragma once

// Counter-based random streams. Every random quantity in the library is a
// pure function of (seed, stream coordinates, counter), so results do not
// depend on how work is split across threads.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <span>

namespace pam {

// SplitMix64 finalizer (Steele, Lea & Flood).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives a substream key from a seed and a list of integer coordinates.
constexpr std::uint64_t stream_key(std::uint64_t seed,
                                   std::initializer_list<std::int64_t> coords) noexcept {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (auto c : coords) h = mix64(h ^ static_cast<std::uint64_t>(c));
  return h;
}

inline std::uint64_t stream_key(std::uint64_t seed, std::span<const int> coords) noexcept {
  std::uint64_t h = mix64(seed ^ 0x6a09e667f3bcc909ULL);
  for (auto c : coords) h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(c)));
  return h;
}

// Uniform double in the open interval (0, 1).
constexpr double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Satisfies UniformRandomBitGenerator; output k is mix64(key + k * golden).
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
  }

  double uniform() noexcept { return to_open_unit((*this)()); }

  // Exponential variate with the given rate.
  double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

  // Uniform integer in [0, n) by multiply-shift.
  std::uint64_t below(std::uint64_t n) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * n) >> 64);
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace pam
