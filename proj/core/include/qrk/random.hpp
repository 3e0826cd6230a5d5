#pragma once

#include <cstdint>
#include <limits>
#include <vector>

namespace qrk {

/// Independent substreams derived from one master seed. Each purpose gets its
/// own stream so that changing, say, the corruption model never perturbs the
/// matrix draw or the solver's picks.
enum class Purpose : std::uint64_t {
  Matrix = 1,
  Truth = 2,
  CorruptionSupport = 3,
  CorruptionValues = 4,
  SolverPicks = 5,
  Trial = 6,
  SubsetSampling = 7,
};

/// Counter-based generator: the i-th output is mix(key + (i + 1) * gamma),
/// with mix the SplitMix64 finalizer. A stream is identified by
/// key = mix(mix(seed ^ purpose * C1) ^ index * C2), so
/// Stream(seed, purpose, index) is reproducible in isolation and independent
/// of how many values other streams have consumed.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed) noexcept;
  Stream(std::uint64_t seed, Purpose purpose, std::uint64_t index = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return next_u64(); }
  std::uint64_t next_u64() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() noexcept;
  /// Uniform on {0, ..., n - 1}; unbiased (Lemire's rejection method). n >= 1.
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  /// Standard normal via the Box-Muller transform (one value per call).
  double normal() noexcept;

  /// k distinct values from {0, ..., n - 1}, ascending (Floyd's algorithm).
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

/// Seed of the `index`-th child of `seed` for `purpose`.
std::uint64_t derive_seed(std::uint64_t seed, Purpose purpose, std::uint64_t index = 0) noexcept;

}  // namespace qrk
