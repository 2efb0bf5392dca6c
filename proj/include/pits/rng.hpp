#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>

namespace pits {

// Counter-based generator: output k of a stream is mix(key, k). Streams are
// derived from a root seed by label (and optionally an index), so adding a
// consumer never shifts the draws of another one.
class Rng {
 public:
  static constexpr std::string_view algorithm = "splitmix64-ctr-v1";

  explicit Rng(std::uint64_t seed = 0);

  Rng derive(std::string_view label) const;
  Rng derive(std::uint64_t index) const;
  Rng derive(std::string_view label, std::uint64_t index) const { return derive(label).derive(index); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  Rng(std::uint64_t seed, std::uint64_t key) : seed_(seed), key_(key) {}

  std::uint64_t seed_ = 0;
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Stable 64-bit FNV-1a, used for stream labels and config hashes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

// Standard stream labels.
namespace streams {
inline constexpr std::string_view init = "init";
inline constexpr std::string_view dropout = "dropout";
inline constexpr std::string_view masking = "masking";
inline constexpr std::string_view shuffle = "shuffle";
inline constexpr std::string_view data = "data";
}  // namespace streams

}  // namespace pits
