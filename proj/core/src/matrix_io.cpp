#include "qrk/matrix_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>

#include "qrk/error.hpp"

namespace qrk::io {

std::string format_double(double v) {
  char buf[32];
  // 17 significant digits always round-trip; try shorter first for readability.
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v || std::isnan(v)) break;
  }
  return buf;
}

void write_vector_line(std::ostream& os, std::span<const double> v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ' ';
    os << format_double(v[i]);
  }
  os << '\n';
}

void write_matrix(std::ostream& os, const Matrix& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) write_vector_line(os, m.row(i));
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool LineReader::try_next(std::string& line) {
  if (!std::getline(is_, line)) return false;
  ++line_;
  return true;
}

std::string LineReader::next(std::string_view what) {
  std::string line;
  if (!try_next(line)) {
    throw Error(ErrorKind::ParseError,
                "line " + std::to_string(line_ + 1) + ": unexpected end of file (expected " +
                    std::string(what) + ")");
  }
  return line;
}

void LineReader::fail(const std::string& msg) const {
  throw Error(ErrorKind::ParseError, "line " + std::to_string(line_) + ": " + msg);
}

double LineReader::finite_double(std::string_view token) const {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    fail("not a number: '" + std::string(token) + "'");
  }
  if (!std::isfinite(v)) fail("non-finite value '" + std::string(token) + "'");
  return v;
}

std::size_t LineReader::index(std::string_view token) const {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    fail("not a nonnegative integer: '" + std::string(token) + "'");
  }
  return v;
}

std::vector<double> LineReader::doubles(std::string_view line, std::size_t count) const {
  const auto tokens = split_ws(line);
  if (tokens.size() != count) {
    fail("expected " + std::to_string(count) + " values, found " + std::to_string(tokens.size()));
  }
  std::vector<double> out;
  out.reserve(count);
  for (auto t : tokens) out.push_back(finite_double(t));
  return out;
}

std::vector<std::size_t> LineReader::indices(std::string_view line, std::size_t count) const {
  const auto tokens = split_ws(line);
  if (tokens.size() != count) {
    fail("expected " + std::to_string(count) + " indices, found " + std::to_string(tokens.size()));
  }
  std::vector<std::size_t> out;
  out.reserve(count);
  for (auto t : tokens) out.push_back(index(t));
  return out;
}

namespace {

Matrix read_matrix_body(LineReader& reader, std::size_t m, std::size_t n) {
  std::vector<double> data;
  data.reserve(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = reader.doubles(reader.next("matrix row"), n);
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(m, n, std::move(data));
}

}  // namespace

Matrix read_matrix(std::istream& is) {
  LineReader reader(is);
  const auto header = split_ws(reader.next("matrix header"));
  if (header.size() != 2) reader.fail("expected header 'm n'");
  const std::size_t m = reader.index(header[0]);
  const std::size_t n = reader.index(header[1]);
  if (m == 0 || n == 0) reader.fail("matrix dimensions must be positive");
  return read_matrix_body(reader, m, n);
}

}  // namespace qrk::io
