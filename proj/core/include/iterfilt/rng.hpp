#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace iterfilt {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_label(std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (char c : label) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// A reproducible random stream addressed by (master seed, path).
///
/// Streams are never shared between consumers. Instead each consumer derives
/// its own child stream from a labelled path, e.g.
///
///   rng.derive("iteration", m).derive("step", n).derive("particle", j)
///
/// Derivation is a pure hash of the parent key and the label, so the draws a
/// particle sees do not depend on the order in which particles are processed
/// or on how many threads process them. The generator behind a stream is
/// xoshiro256**, seeded from the path key with splitmix64.
///
/// Satisfies UniformRandomBitGenerator, so it can drive <random>
/// distributions directly.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed) : RngStream(detail::mix64(seed + detail::kGolden), FromKey{}) {}

  /// Child stream at `label`/`index`. Does not advance this stream.
  RngStream derive(std::string_view label, std::uint64_t index = 0) const {
    std::uint64_t k = detail::mix64(key_ ^ detail::mix64(detail::hash_label(label) + detail::kGolden));
    k = detail::mix64(k ^ detail::mix64(index + 0xD1B54A32D192ED03ULL));
    return RngStream(k, FromKey{});
  }

  /// Hash of (seed, path); equal keys mean equal draw sequences.
  std::uint64_t key() const noexcept { return key_; }

  result_type operator()() noexcept {
    const std::uint64_t result = std::rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = std::rotl(state_[3], 45);
    return result;
  }
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  /// Standard normal.
  double normal();

 private:
  struct FromKey {};
  RngStream(std::uint64_t key, FromKey) : key_(key) {
    std::uint64_t sm = key;
    for (auto& word : state_) {
      sm += detail::kGolden;
      word = detail::mix64(sm);
    }
    // xoshiro must not start from the all-zero state.
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = detail::kGolden;
  }

  std::uint64_t key_;
  std::array<std::uint64_t, 4> state_;
  std::normal_distribution<double> normal_;
};

}  // namespace iterfilt
