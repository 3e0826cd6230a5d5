#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qrk/linalg.hpp"

namespace qrk::io {

/// Shortest text form that reads back to the same double.
std::string format_double(double v);

void write_vector_line(std::ostream& os, std::span<const double> v);

/// Matrix text format: `m n`, then m lines of n decimal values.
void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

/// Line-oriented reader that reports the 1-based line number on ParseError.
class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  /// Next line, or ParseError("unexpected end of file").
  std::string next(std::string_view what);
  bool try_next(std::string& line);
  std::size_t line_number() const noexcept { return line_; }

  [[noreturn]] void fail(const std::string& msg) const;

  /// Parses exactly `count` finite doubles from one line.
  std::vector<double> doubles(std::string_view line, std::size_t count) const;
  std::vector<std::size_t> indices(std::string_view line, std::size_t count) const;
  double finite_double(std::string_view token) const;
  std::size_t index(std::string_view token) const;

 private:
  std::istream& is_;
  std::size_t line_ = 0;
};

std::vector<std::string_view> split_ws(std::string_view line);

}  // namespace qrk::io
