#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qrk/linalg.hpp"

namespace qrk {

/// Ground truth (A, x, A x) plus the observed right-hand side and the index
/// set C where the two differ. Produced by generate_gaussian_system, corrupt,
/// or load_system; all three establish the invariants checked by validate().
struct CorruptedSystem {
  RowNormalizedMatrix a;
  Vector x_true;
  Vector b_true;
  Vector b_observed;
  std::vector<std::size_t> corrupt_set;  // ascending
  double beta = 0.0;

  std::size_t rows() const noexcept { return a.rows(); }
  std::size_t cols() const noexcept { return a.cols(); }

  /// Throws InvariantViolation on the first broken invariant.
  void validate() const;

  bool operator==(const CorruptedSystem&) const = default;
};

enum class CorruptionModel { RandomGaussian, ConstantOffset, SignFlip, AlignedCluster };

std::string_view to_string(CorruptionModel model) noexcept;
/// Accepts "random-gaussian", "constant-offset", "sign-flip", "aligned-cluster".
CorruptionModel parse_corruption_model(std::string_view name);

struct CorruptionSpec {
  double beta = 0.0;
  CorruptionModel model = CorruptionModel::RandomGaussian;
  /// random-gaussian: standard deviation of the additive noise (default
  /// 10 * max|b_true|). constant-offset: the offset (default 10).
  /// aligned-cluster: length of the planted shift (default 10 * max|b_true|).
  /// sign-flip ignores it.
  std::optional<double> magnitude;
  std::uint64_t seed = 0;
};

/// Rows uniform on the unit sphere, x_true standard Gaussian, no corruption.
CorruptedSystem generate_gaussian_system(std::size_t m, std::size_t n, std::uint64_t seed);

/// Re-corrupts `system` from its b_true. The support has exactly
/// min(ceil(beta m), m) rows.
///
/// The aligned-cluster adversary draws a random unit direction u, corrupts the
/// rows most aligned with it (largest <a_i, u>^2), and sets those entries to
/// <a_i, x_true + magnitude * u>, so the corrupted rows agree on a single
/// planted wrong solution instead of scattering.
CorruptedSystem corrupt(const CorruptedSystem& system, const CorruptionSpec& spec);

/// Text format:
///   m n beta
///   <m matrix rows>
///   <x_true>
///   <b_true>
///   <b_observed>
///   |C|
///   <sorted corrupted indices, possibly empty>
void write_system(std::ostream& os, const CorruptedSystem& system);
CorruptedSystem read_system(std::istream& is);

void save_system(const CorruptedSystem& system, const std::filesystem::path& path);
CorruptedSystem load_system(const std::filesystem::path& path);

}  // namespace qrk
