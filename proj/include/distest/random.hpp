#pragma once

#include <cstdint>
#include <limits>
#include <string_view>

namespace distest {

// SplitMix64 output finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// SplitMix64 as a UniformRandomBitGenerator. Seeding is free, which matters
// because every encoder, trial and hash function gets its own stream.
class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Stream(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  constexpr result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // j-th output of a fresh stream with this stream's current state, without
  // advancing. Lets a stream act as a lazily materialized table.
  constexpr result_type peek(std::uint64_t j) const noexcept {
    Stream copy(state_ + j * 0x9e3779b97f4a7c15ULL);
    return copy();
  }

  constexpr void discard(std::uint64_t z) noexcept {
    state_ += z * 0x9e3779b97f4a7c15ULL;
  }

  // Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
  }

  friend constexpr bool operator==(const Stream&, const Stream&) = default;

 private:
  std::uint64_t state_;
};

// Common randomness visible to every encoder and the decoder. Streams are
// derived from (root seed, label, index); equal triples give equal streams.
class SharedRandomness {
 public:
  constexpr explicit SharedRandomness(std::uint64_t seed) noexcept : seed_(seed) {}

  constexpr std::uint64_t seed() const noexcept { return seed_; }

  constexpr std::uint64_t derive(std::string_view label,
                                 std::uint64_t index = 0) const noexcept {
    std::uint64_t h = mix64(seed_ ^ 0x6a09e667f3bcc909ULL);
    h = mix64(h ^ fnv1a64(label));
    return mix64(h ^ mix64(index ^ 0xbb67ae8584caa73bULL));
  }

  constexpr Stream stream(std::string_view label, std::uint64_t index = 0) const noexcept {
    return Stream(derive(label, index));
  }

  constexpr SharedRandomness child(std::string_view label,
                                   std::uint64_t index = 0) const noexcept {
    return SharedRandomness(derive(label, index));
  }

 private:
  std::uint64_t seed_;
};

}  // namespace distest
