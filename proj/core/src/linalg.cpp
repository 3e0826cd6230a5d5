#include "qrk/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "qrk/error.hpp"

namespace qrk {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ZeroRow: return "ZeroRow";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyQuantile: return "EmptyQuantile";
    case ErrorKind::BadDimensions: return "BadDimensions";
    case ErrorKind::BetaOutOfRange: return "BetaOutOfRange";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::AllZeroResiduals: return "AllZeroResiduals";
    case ErrorKind::TooManySubsets: return "TooManySubsets";
    case ErrorKind::BadSubsetSize: return "BadSubsetSize";
    case ErrorKind::ParameterDomain: return "ParameterDomain";
    case ErrorKind::MassOutOfRange: return "MassOutOfRange";
    case ErrorKind::CertificateUnavailable: return "CertificateUnavailable";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Usage: return "Usage";
  }
  return "Unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::DimensionMismatch,
                "matrix data has " + std::to_string(data_.size()) + " entries, expected " +
                    std::to_string(rows_ * cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    auto src = row(indices[k]);
    std::copy(src.begin(), src.end(), out.row(k).begin());
  }
  return out;
}

RowNormalizedMatrix::RowNormalizedMatrix(Matrix m) : m_(std::move(m)) {
  if (m_.rows() == 0 || m_.cols() == 0) {
    throw Error(ErrorKind::BadDimensions, "row-normalized matrix must be nonempty");
  }
  for (std::size_t i = 0; i < m_.rows(); ++i) {
    auto r = m_.row(i);
    for (double v : r) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::InvariantViolation, "non-finite entry in row " + std::to_string(i));
      }
    }
    const double norm = std::sqrt(dot(r, r));
    if (std::abs(norm - 1.0) > kNormTolerance) {
      throw Error(ErrorKind::InvariantViolation,
                  "row " + std::to_string(i) + " has norm " + std::to_string(norm));
    }
  }
}

NormalizedRows normalize_rows(const Matrix& raw) {
  if (raw.rows() == 0 || raw.cols() == 0) {
    throw Error(ErrorKind::BadDimensions, "cannot normalize an empty matrix");
  }
  Matrix out = raw;
  Vector scales(raw.rows());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    auto r = out.row(i);
    const double norm = std::sqrt(dot(r, r));
    if (!(norm > 1e-14)) throw Error(ErrorKind::ZeroRow, "row " + std::to_string(i));
    for (double& v : r) v /= norm;
    scales[i] = norm;
  }
  return {RowNormalizedMatrix(std::move(out)), std::move(scales)};
}

double dot(std::span<const double> x, std::span<const double> y) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double squared_distance(std::span<const double> x, std::span<const double> y) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return s;
}

Vector multiply(const Matrix& a, std::span<const double> x) {
  if (x.size() != a.cols()) throw Error(ErrorKind::DimensionMismatch, "matrix-vector product");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) y[i] = dot(a.row(i), x);
  return y;
}

Matrix gram(const Matrix& a) {
  const std::size_t n = a.cols();
  Matrix g(n, n);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double rj = r[j];
      if (rj == 0.0) continue;
      for (std::size_t k = j; k < n; ++k) g(j, k) += rj * r[k];
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < j; ++k) g(j, k) = g(k, j);
  return g;
}

namespace {

void check_tol(double tol) {
  if (!(tol > 0.0 && tol <= 1e-2)) {
    throw Error(ErrorKind::ParameterDomain, "spectral tolerance must lie in (0, 1e-2]");
  }
}

double rayleigh(const Matrix& g, std::span<const double> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i) s += v[i] * dot(g.row(i), v);
  return s;
}

Matrix square(const Matrix& p) {
  const std::size_t n = p.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double pik = p(i, k);
      if (pik == 0.0) continue;
      auto pk = p.row(k);
      auto oi = out.row(i);
      for (std::size_t j = 0; j < n; ++j) oi[j] += pik * pk[j];
    }
  }
  return out;
}

double max_abs(const Matrix& p) {
  double m = 0.0;
  for (double v : p.data()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

std::pair<double, Vector> dominant_eigenpair(const Matrix& spd, double tol) {
  check_tol(tol);
  const std::size_t n = spd.rows();
  const double scale = max_abs(spd);
  if (scale == 0.0) {
    Vector e(n, 0.0);
    e[0] = 1.0;
    return {0.0, e};
  }
  const auto cap =
      static_cast<std::size_t>(10.0 * static_cast<double>(n) * std::ceil(std::log(1.0 / tol)));
  constexpr double eps = std::numeric_limits<double>::epsilon();

  // P_j is proportional to spd^(2^j); its columns converge to the dominant
  // eigenspace, whose Rayleigh quotient against the original operator is the
  // eigenvalue regardless of eigenvalue multiplicity or gap size.
  Matrix p = spd;
  double previous = -1.0;
  int stable = 0;
  for (std::size_t it = 0; it < cap; ++it) {
    std::size_t best = 0;
    double best_norm = -1.0;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += p(i, j) * p(i, j);
      if (s > best_norm) {
        best_norm = s;
        best = j;
      }
    }
    Vector v(n);
    const double inv = 1.0 / std::sqrt(best_norm);
    for (std::size_t i = 0; i < n; ++i) v[i] = p(i, best) * inv;
    const Vector gv = multiply(spd, v);
    const double lambda = dot(v, gv);
    double res_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) res_sq += (gv[i] - lambda * v[i]) * (gv[i] - lambda * v[i]);

    // A settled quotient alone is not enough: with a tiny eigengap it drifts
    // very slowly while the vector is still mixed. Require a small residual.
    const double bound = std::max(tol * 1e-2, 64.0 * eps * static_cast<double>(n)) * scale;
    if (std::abs(lambda - previous) <= bound && std::sqrt(res_sq) <= bound) {
      if (++stable >= 2) return {lambda, std::move(v)};
    } else {
      stable = 0;
    }
    previous = lambda;

    p = square(p);
    const double m = max_abs(p);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) p(i, j) /= m;
  }
  throw Error(ErrorKind::NoConvergence,
              "dominant eigenpair did not settle within " + std::to_string(cap) + " squarings");
}

double sigma_max_from_gram(const Matrix& g, double tol) {
  const auto [lambda, v] = dominant_eigenpair(g, tol);
  return std::sqrt(std::max(lambda, 0.0));
}

double sigma_min_from_gram(const Matrix& g, std::size_t rows, double tol) {
  check_tol(tol);
  if (rows < g.rows()) return 0.0;
  const double lambda_max = dominant_eigenpair(g, tol).first;
  Matrix shifted = g;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      shifted(i, j) = (i == j ? lambda_max : 0.0) - g(i, j);
  // Entries this small are rounding noise of a multiple of the identity.
  if (max_abs(shifted) <= 1e-15 * lambda_max) return std::sqrt(lambda_max);
  const auto [mu, v] = dominant_eigenpair(shifted, tol);
  return std::sqrt(std::max(0.0, rayleigh(g, v)));
}

double sigma_max(const Matrix& a, double tol) {
  check_tol(tol);
  if (a.empty()) throw Error(ErrorKind::BadDimensions, "sigma_max of an empty matrix");
  return sigma_max_from_gram(gram(a), tol);
}

double sigma_min(const Matrix& a, double tol) {
  check_tol(tol);
  if (a.empty()) throw Error(ErrorKind::BadDimensions, "sigma_min of an empty matrix");
  if (a.rows() < a.cols()) return 0.0;
  return sigma_min_from_gram(gram(a), a.rows(), tol);
}

ResidualVector residuals(const RowNormalizedMatrix& a, std::span<const double> x,
                         std::span<const double> b) {
  if (x.size() != a.cols() || b.size() != a.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "residuals: dimensions of A, x, b disagree");
  }
  ResidualVector r{Vector(a.rows())};
  for (std::size_t i = 0; i < a.rows(); ++i) r.values[i] = std::abs(dot(a.row(i), x) - b[i]);
  return r;
}

std::vector<std::size_t> smallest_k(std::span<const double> r, std::size_t k) {
  const std::size_t m = r.size();
  k = std::min(k, m);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto less = [&r](std::size_t i, std::size_t j) {
    return r[i] < r[j] || (r[i] == r[j] && i < j);
  };
  if (k < m) std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), less);
  std::vector<char> chosen(m, 0);
  for (std::size_t j = 0; j < k; ++j) chosen[order[j]] = 1;
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < m; ++i)
    if (chosen[i]) out.push_back(i);
  return out;
}

QuantileSelection quantile_select(std::span<const double> r, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw Error(ErrorKind::ParameterDomain, "quantile q must lie in (0, 1]");
  const std::size_t k = floor_count(q, r.size());
  if (k == 0) {
    throw Error(ErrorKind::EmptyQuantile,
                "floor(q m) = 0 for q = " + std::to_string(q) + ", m = " + std::to_string(r.size()));
  }
  QuantileSelection sel;
  sel.indices = smallest_k(r, k);
  for (std::size_t i : sel.indices) sel.threshold = std::max(sel.threshold, r[i]);
  return sel;
}

std::size_t floor_count(double fraction, std::size_t count) noexcept {
  const double p = fraction * static_cast<double>(count);
  const double nearest = std::round(p);
  if (std::abs(p - nearest) <= 1e-9) return static_cast<std::size_t>(std::max(nearest, 0.0));
  return static_cast<std::size_t>(std::max(std::floor(p), 0.0));
}

std::size_t ceil_count(double fraction, std::size_t count) noexcept {
  const double p = fraction * static_cast<double>(count);
  const double nearest = std::round(p);
  if (std::abs(p - nearest) <= 1e-9) return static_cast<std::size_t>(std::max(nearest, 0.0));
  return static_cast<std::size_t>(std::max(std::ceil(p), 0.0));
}

}  // namespace qrk
