#include "qrk/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace qrk {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
constexpr std::uint64_t kPurposeMul = 0xd1b54a32d192ed03ULL;
constexpr std::uint64_t kIndexMul = 0xaef17502108ef2d9ULL;
}  // namespace

std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, Purpose purpose, std::uint64_t index) noexcept {
  const auto p = static_cast<std::uint64_t>(purpose);
  return mix64(mix64(seed ^ (p * kPurposeMul)) ^ ((index + 1) * kIndexMul));
}

Stream::Stream(std::uint64_t seed) noexcept : key_(mix64(seed)) {}

Stream::Stream(std::uint64_t seed, Purpose purpose, std::uint64_t index) noexcept
    : key_(derive_seed(seed, purpose, index)) {}

std::uint64_t Stream::next_u64() noexcept {
  ++counter_;
  return mix64(key_ + counter_ * kGamma);
}

double Stream::uniform01() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Stream::uniform_index(std::uint64_t n) noexcept {
  // Lemire, "Fast random integer generation in an interval" (2019).
  std::uint64_t x = next_u64();
  __uint128_t product = static_cast<__uint128_t>(x) * n;
  auto low = static_cast<std::uint64_t>(product);
  if (low < n) {
    const std::uint64_t threshold = (0 - n) % n;
    while (low < threshold) {
      x = next_u64();
      product = static_cast<__uint128_t>(x) * n;
      low = static_cast<std::uint64_t>(product);
    }
  }
  return static_cast<std::uint64_t>(product >> 64);
}

double Stream::normal() noexcept {
  double u1 = uniform01();
  while (u1 == 0.0) u1 = uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<std::size_t> Stream::sample_without_replacement(std::size_t n, std::size_t k) {
  k = std::min(k, n);
  std::vector<std::size_t> picked;
  picked.reserve(k);
  for (std::size_t j = n - k; j < n; ++j) {
    const auto t = static_cast<std::size_t>(uniform_index(j + 1));
    const bool seen = std::find(picked.begin(), picked.end(), t) != picked.end();
    picked.push_back(seen ? j : t);
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

}  // namespace qrk
