// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace bootdiag {

namespace detail {

// SplitMix64 finalizer.  Full-avalanche 64-bit mix; the basis for both key
// derivation and counter-indexed generation.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ull;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebull;
  z ^= z >> 31;
  return z;
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kPathSalt = 0xd1342543de82ef95ull;

// Folding one path element into a stream key.  Chained so that
// key(master, [a, b]) == fold(fold(root(master), a), b).
constexpr std::uint64_t fold_key(std::uint64_t key, std::uint64_t element) noexcept {
  return mix64((key + kGolden) ^ mix64(element + kPathSalt));
}

constexpr std::uint64_t root_key(std::uint64_t master_seed) noexcept {
  return mix64(master_seed + kGolden);
}

}  // namespace detail

// Hierarchical seed: a master seed plus a path of sub-stream indices.  Equal
// specs give bit-identical streams on every platform; sibling streams are
// statistically independent.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::vector<std::uint64_t> stream_path;

  [[nodiscard]] SeedSpec child(std::uint64_t element) const {
    SeedSpec out = *this;
    out.stream_path.push_back(element);
    return out;
  }

  [[nodiscard]] std::uint64_t key() const noexcept {
    std::uint64_t k = detail::root_key(master_seed);
    for (std::uint64_t e : stream_path) k = detail::fold_key(k, e);
    return k;
  }

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

// Counter-based generator.  value_at(i) is a pure function of (key, i), so
// any draw can be regenerated at random access and parallel consumers need
// no locking or state hand-off.
class Stream {
 public:
  explicit Stream(const SeedSpec& seed) : key_(seed.key()) {}
  explicit Stream(std::uint64_t raw_key) : key_(raw_key) {}

  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

  [[nodiscard]] std::uint64_t bits_at(std::uint64_t index) const noexcept {
    return detail::mix64(key_ + (index + 1) * detail::kGolden);
  }

  // Uniform on the open interval (0,1): never returns 0 or 1, so inverse-cdf
  // transforms stay finite.
  [[nodiscard]] double uniform_at(std::uint64_t index) const noexcept {
    return (static_cast<double>(bits_at(index) >> 11) + 0.5) * 0x1.0p-53;
  }

  [[nodiscard]] double exponential_at(std::uint64_t index) const noexcept {
    return -std::log(uniform_at(index));
  }

  [[nodiscard]] double rademacher_at(std::uint64_t index) const noexcept {
    return (bits_at(index) & 1ull) ? 1.0 : -1.0;
  }

  // Derived stream with its own counter space, equivalent to appending
  // `element` to the seed path.
  [[nodiscard]] Stream substream(std::uint64_t element) const noexcept {
    return Stream(detail::fold_key(key_, element));
  }

 private:
  std::uint64_t key_;
};

}  // namespace bootdiag
