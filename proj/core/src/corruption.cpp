#include "qrk/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

#include "qrk/error.hpp"
#include "qrk/matrix_io.hpp"
#include "qrk/random.hpp"

namespace qrk {

namespace {

[[noreturn]] void violation(const std::string& msg) {
  throw Error(ErrorKind::InvariantViolation, msg);
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

void CorruptedSystem::validate() const {
  const std::size_t m = rows();
  const std::size_t n = cols();
  if (x_true.size() != n || b_true.size() != m || b_observed.size() != m) {
    violation("vector lengths do not match the matrix");
  }
  if (!(beta >= 0.0 && beta < 1.0)) violation("beta outside [0, 1)");
  const Vector ax = multiply(a.matrix(), x_true);
  for (std::size_t i = 0; i < m; ++i) {
    if (std::abs(ax[i] - b_true[i]) > 1e-10) {
      violation("b_true differs from A x_true in row " + std::to_string(i));
    }
  }
  for (std::size_t k = 0; k < corrupt_set.size(); ++k) {
    if (corrupt_set[k] >= m) violation("corrupted index out of range");
    if (k > 0 && corrupt_set[k] <= corrupt_set[k - 1]) violation("corrupted indices not strictly ascending");
  }
  if (corrupt_set.size() > ceil_count(beta, m)) {
    violation("|C| = " + std::to_string(corrupt_set.size()) + " exceeds ceil(beta m)");
  }
  std::size_t next = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const bool in_c = next < corrupt_set.size() && corrupt_set[next] == i;
    if (in_c) {
      ++next;
    } else if (b_observed[i] != b_true[i]) {
      violation("b_observed differs from b_true outside C at row " + std::to_string(i));
    }
  }
}

std::string_view to_string(CorruptionModel model) noexcept {
  switch (model) {
    case CorruptionModel::RandomGaussian: return "random-gaussian";
    case CorruptionModel::ConstantOffset: return "constant-offset";
    case CorruptionModel::SignFlip: return "sign-flip";
    case CorruptionModel::AlignedCluster: return "aligned-cluster";
  }
  return "unknown";
}

CorruptionModel parse_corruption_model(std::string_view name) {
  for (auto model : {CorruptionModel::RandomGaussian, CorruptionModel::ConstantOffset,
                     CorruptionModel::SignFlip, CorruptionModel::AlignedCluster}) {
    if (name == to_string(model)) return model;
  }
  throw Error(ErrorKind::Usage, "unknown corruption model '" + std::string(name) + "'");
}

CorruptedSystem generate_gaussian_system(std::size_t m, std::size_t n, std::uint64_t seed) {
  if (n < 1 || m < n) {
    throw Error(ErrorKind::BadDimensions,
                "need m >= n >= 1, got m = " + std::to_string(m) + ", n = " + std::to_string(n));
  }
  Stream rows(seed, Purpose::Matrix);
  Matrix raw(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    auto r = raw.row(i);
    double norm2 = 0.0;
    do {
      for (double& v : r) v = rows.normal();
      norm2 = dot(r, r);
    } while (!(norm2 > 1e-20));
  }
  auto normalized = normalize_rows(raw);

  Stream truth(seed, Purpose::Truth);
  Vector x(n);
  for (double& v : x) v = truth.normal();
  Vector b = multiply(normalized.matrix.matrix(), x);

  CorruptedSystem sys{std::move(normalized.matrix), std::move(x), b, b, {}, 0.0};
  return sys;
}

CorruptedSystem corrupt(const CorruptedSystem& system, const CorruptionSpec& spec) {
  if (!(spec.beta >= 0.0 && spec.beta < 1.0)) {
    throw Error(ErrorKind::BetaOutOfRange, "beta must lie in [0, 1), got " + std::to_string(spec.beta));
  }
  if (spec.magnitude && !std::isfinite(*spec.magnitude)) {
    throw Error(ErrorKind::ParameterDomain, "corruption magnitude must be finite");
  }
  const std::size_t m = system.rows();
  const std::size_t n = system.cols();
  const std::size_t k = std::min(ceil_count(spec.beta, m), m);

  CorruptedSystem out = system;
  out.beta = spec.beta;
  out.b_observed = system.b_true;

  Stream support(spec.seed, Purpose::CorruptionSupport);
  Stream values(spec.seed, Purpose::CorruptionValues);
  const double default_scale = 10.0 * max_abs(system.b_true);

  if (spec.model == CorruptionModel::AlignedCluster) {
    Vector u(n);
    double norm2 = 0.0;
    do {
      for (double& v : u) v = support.normal();
      norm2 = dot(u, u);
    } while (!(norm2 > 1e-20));
    for (double& v : u) v /= std::sqrt(norm2);

    Vector neg_alignment(m);
    for (std::size_t i = 0; i < m; ++i) {
      const double c = dot(system.a.row(i), u);
      neg_alignment[i] = -c * c;
    }
    out.corrupt_set = smallest_k(neg_alignment, k);
    const double shift = spec.magnitude.value_or(default_scale);
    Vector planted = system.x_true;
    for (std::size_t j = 0; j < n; ++j) planted[j] += shift * u[j];
    for (std::size_t i : out.corrupt_set) out.b_observed[i] = dot(system.a.row(i), planted);
    return out;
  }

  out.corrupt_set = support.sample_without_replacement(m, k);
  for (std::size_t i : out.corrupt_set) {
    double& b = out.b_observed[i];
    switch (spec.model) {
      case CorruptionModel::RandomGaussian:
        b += spec.magnitude.value_or(default_scale) * values.normal();
        break;
      case CorruptionModel::ConstantOffset:
        b += spec.magnitude.value_or(10.0);
        break;
      case CorruptionModel::SignFlip:
        b = -b;
        break;
      case CorruptionModel::AlignedCluster:
        break;
    }
  }
  return out;
}

void write_system(std::ostream& os, const CorruptedSystem& s) {
  os << s.rows() << ' ' << s.cols() << ' ' << io::format_double(s.beta) << '\n';
  for (std::size_t i = 0; i < s.rows(); ++i) io::write_vector_line(os, s.a.row(i));
  io::write_vector_line(os, s.x_true);
  io::write_vector_line(os, s.b_true);
  io::write_vector_line(os, s.b_observed);
  os << s.corrupt_set.size() << '\n';
  for (std::size_t k = 0; k < s.corrupt_set.size(); ++k) {
    if (k) os << ' ';
    os << s.corrupt_set[k];
  }
  os << '\n';
}

CorruptedSystem read_system(std::istream& is) {
  io::LineReader reader(is);
  const auto header = io::split_ws(reader.next("header 'm n beta'"));
  if (header.size() != 3) reader.fail("expected header 'm n beta'");
  const std::size_t m = reader.index(header[0]);
  const std::size_t n = reader.index(header[1]);
  const double beta = reader.finite_double(header[2]);
  if (m == 0 || n == 0) reader.fail("dimensions must be positive");

  std::vector<double> data;
  data.reserve(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = reader.doubles(reader.next("matrix row"), n);
    data.insert(data.end(), row.begin(), row.end());
  }
  auto x_true = reader.doubles(reader.next("x_true"), n);
  auto b_true = reader.doubles(reader.next("b_true"), m);
  auto b_observed = reader.doubles(reader.next("b_observed"), m);

  const auto count_tokens = io::split_ws(reader.next("|C|"));
  if (count_tokens.size() != 1) reader.fail("expected a single count |C|");
  const std::size_t count = reader.index(count_tokens[0]);
  std::vector<std::size_t> corrupt_set;
  std::string line;
  if (count > 0) {
    corrupt_set = reader.indices(reader.next("corrupted indices"), count);
  } else if (reader.try_next(line) && !io::split_ws(line).empty()) {
    reader.fail("expected no corrupted indices");
  }
  while (reader.try_next(line)) {
    if (!io::split_ws(line).empty()) reader.fail("trailing content");
  }

  CorruptedSystem sys{RowNormalizedMatrix(Matrix(m, n, std::move(data))), std::move(x_true),
                      std::move(b_true), std::move(b_observed), std::move(corrupt_set), beta};
  sys.validate();
  return sys;
}

void save_system(const CorruptedSystem& system, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "' for writing");
  write_system(os, system);
  if (!os) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

CorruptedSystem load_system(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  return read_system(is);
}

}  // namespace qrk
