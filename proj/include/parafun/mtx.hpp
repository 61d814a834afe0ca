#pragma once

#include <cctype>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "parafun/errors.hpp"
#include "parafun/matrix.hpp"

// Matrix Market I/O: real array or coordinate matrices, general or symmetric.

namespace parafun {

namespace detail {

inline std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline bool blank_or_comment(const std::string& line) {
  for (char c : line) {
    if (c == '%') return true;
    if (!std::isspace(static_cast<unsigned char>(c))) return false;
  }
  return true;
}

}  // namespace detail

inline DenseMatrix read_matrix(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(1, "empty input");
  ++lineno;
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  if (banner != "%%MatrixMarket" || detail::lower(object) != "matrix") {
    throw ParseError(lineno, "expected '%%MatrixMarket matrix' header");
  }
  format = detail::lower(format);
  field = detail::lower(field);
  symmetry = detail::lower(symmetry);
  if (format != "array" && format != "coordinate") throw ParseError(lineno, "unknown format '" + format + "'");
  if (field != "real" && field != "integer" && field != "double") {
    throw ParseError(lineno, "unsupported field '" + field + "'");
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    throw ParseError(lineno, "unsupported symmetry '" + symmetry + "'");
  }
  const bool symmetric = symmetry == "symmetric";
  const bool coordinate = format == "coordinate";

  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!detail::blank_or_comment(line)) return true;
    }
    return false;
  };

  if (!next_line()) throw ParseError(lineno, "missing size line");
  std::istringstream size_line(line);
  long long rows = -1, cols = -1, nnz = -1;
  size_line >> rows >> cols;
  if (coordinate) size_line >> nnz;
  if (!size_line || rows < 0 || cols < 0 || (coordinate && nnz < 0)) throw ParseError(lineno, "malformed size line");
  if (symmetric && rows != cols) throw ParseError(lineno, "symmetric matrix must be square");

  DenseMatrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  auto parse_value = [&](std::istringstream& s) {
    double v;
    if (!(s >> v)) throw ParseError(lineno, "malformed entry");
    return v;
  };

  if (coordinate) {
    for (long long e = 0; e < nnz; ++e) {
      if (!next_line()) throw ParseError(lineno, "expected " + std::to_string(nnz) + " entries");
      std::istringstream s(line);
      long long i = 0, j = 0;
      if (!(s >> i >> j)) throw ParseError(lineno, "malformed entry");
      const double v = parse_value(s);
      if (i < 1 || j < 1 || i > rows || j > cols) throw ParseError(lineno, "index out of range");
      m(i - 1, j - 1) = v;
      if (symmetric) m(j - 1, i - 1) = v;
    }
  } else {
    // column-major; symmetric stores the lower triangle
    for (long long j = 0; j < cols; ++j) {
      for (long long i = symmetric ? j : 0; i < rows; ++i) {
        if (!next_line()) throw ParseError(lineno, "too few array entries");
        std::istringstream s(line);
        const double v = parse_value(s);
        m(i, j) = v;
        if (symmetric) m(j, i) = v;
      }
    }
  }
  if (next_line()) throw ParseError(lineno, "unexpected trailing data");
  return m;
}

inline DenseMatrix read_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open matrix file '" + path + "'");
  return read_matrix(in);
}

/// Array format, general, 17 significant digits.
inline void write_matrix(std::ostream& out, const DenseMatrix& m) {
  out << "%%MatrixMarket matrix array real general\n" << m.rows() << ' ' << m.cols() << '\n';
  char buf[40];
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g\n", m(i, j));
      out << buf;
    }
}

inline void write_matrix(const std::string& path, const DenseMatrix& m) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write matrix file '" + path + "'");
  write_matrix(out, m);
  if (!out) throw Error("write failed for '" + path + "'");
}

}  // namespace parafun
