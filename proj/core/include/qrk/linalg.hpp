#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace qrk {

using Vector = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<const double> data() const noexcept { return data_; }

  /// Rows `indices` (in the given order) as a new matrix.
  Matrix select_rows(std::span<const std::size_t> indices) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Matrix whose rows all have unit Euclidean norm (to within 1e-12).
class RowNormalizedMatrix {
 public:
  static constexpr double kNormTolerance = 1e-12;

  /// Validates the invariant; throws InvariantViolation otherwise.
  explicit RowNormalizedMatrix(Matrix m);

  const Matrix& matrix() const noexcept { return m_; }
  std::size_t rows() const noexcept { return m_.rows(); }
  std::size_t cols() const noexcept { return m_.cols(); }
  std::span<const double> row(std::size_t i) const noexcept { return m_.row(i); }

  bool operator==(const RowNormalizedMatrix&) const = default;

 private:
  Matrix m_;
};

struct NormalizedRows {
  RowNormalizedMatrix matrix;
  Vector scales;
};

/// Divides each row by its norm. Throws ZeroRow for rows with norm <= 1e-14.
NormalizedRows normalize_rows(const Matrix& raw);

inline constexpr double kDefaultSpectralTol = 1e-10;

/// Largest singular value of `a` via power iteration on the Gram matrix.
double sigma_max(const Matrix& a, double tol = kDefaultSpectralTol);

/// Smallest singular value; exactly 0 when a has fewer rows than columns.
double sigma_min(const Matrix& a, double tol = kDefaultSpectralTol);

/// Eigenpair of the dominant eigenvalue of a symmetric positive semidefinite
/// matrix, computed by repeated squaring of the normalized operator. The
/// iteration cap is 10 * n * ceil(ln(1 / tol)) squarings.
std::pair<double, Vector> dominant_eigenpair(const Matrix& spd, double tol);

/// AᵀA.
Matrix gram(const Matrix& a);

/// Singular values from a precomputed Gram matrix of a `rows`-row matrix.
double sigma_max_from_gram(const Matrix& g, double tol = kDefaultSpectralTol);
double sigma_min_from_gram(const Matrix& g, std::size_t rows, double tol = kDefaultSpectralTol);

double dot(std::span<const double> x, std::span<const double> y) noexcept;
double squared_distance(std::span<const double> x, std::span<const double> y) noexcept;
Vector multiply(const Matrix& a, std::span<const double> x);

/// values[i] = |<a_i, x> - b_i|.
struct ResidualVector {
  Vector values;
  std::size_t size() const noexcept { return values.size(); }
};

ResidualVector residuals(const RowNormalizedMatrix& a, std::span<const double> x,
                         std::span<const double> b);

/// The k = floor(q m) rows with smallest residual, ties to smaller index.
struct QuantileSelection {
  double threshold = 0.0;
  std::vector<std::size_t> indices;  // ascending
};

QuantileSelection quantile_select(std::span<const double> r, double q);
inline QuantileSelection quantile_select(const ResidualVector& r, double q) {
  return quantile_select(std::span<const double>(r.values), q);
}

/// k smallest of r (ties to smaller index), returned in ascending index order.
/// Runs nth_element over an index permutation rather than a full sort.
std::vector<std::size_t> smallest_k(std::span<const double> r, std::size_t k);

/// floor(fraction * count) with products that land within 1e-9 of an integer
/// snapped to that integer.
std::size_t floor_count(double fraction, std::size_t count) noexcept;
/// ceil(fraction * count), snapped the same way.
std::size_t ceil_count(double fraction, std::size_t count) noexcept;

}  // namespace qrk
