#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace hclt {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_tag(std::string_view tag) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// A node in the seed tree. Every random quantity in the library is drawn
/// from a stream keyed by a path of tags below one root seed, so results do
/// not depend on evaluation order or on how work is split across threads.
class Seed {
 public:
  constexpr Seed() = default;
  constexpr explicit Seed(std::uint64_t root) : key_(detail::mix64(root ^ detail::kGolden)) {}

  constexpr Seed derive(std::uint64_t tag) const {
    Seed child;
    child.key_ = detail::mix64(key_ + detail::kGolden * (tag + 1)) ^ detail::mix64(tag);
    return child;
  }

  constexpr Seed derive(std::string_view tag) const { return derive(detail::hash_tag(tag)); }

  template <typename... Tags>
  constexpr Seed derive(std::uint64_t first, Tags... rest) const
    requires(sizeof...(Tags) > 0)
  {
    return derive(first).derive(static_cast<std::uint64_t>(rest)...);
  }

  constexpr std::uint64_t key() const { return key_; }

  friend constexpr bool operator==(const Seed&, const Seed&) = default;

 private:
  std::uint64_t key_ = detail::mix64(detail::kGolden);
};

/// SplitMix64 generator over one seed node. Construction is O(1), which
/// allows a fresh independent stream per (n, m, rep).
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(Seed seed) : state_(seed.key()) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(*this); }

  bool coin() { return ((*this)() >> 63) != 0; }

 private:
  std::uint64_t state_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace hclt
