#include "dynspec/matrix_market.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

namespace dynspec {

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

struct Header {
  bool coordinate = false;
  bool complex_field = false;
  bool symmetric = false;
};

Header parse_header(const std::string& line, const std::string& path) {
  std::istringstream ss(line);
  std::string banner, object, format, field, symmetry;
  ss >> banner >> object >> format >> field >> symmetry;
  if (lower(banner) != "%%matrixmarket" || lower(object) != "matrix")
    throw IoError(path + ": malformed MatrixMarket banner");
  Header h;
  const std::string f = lower(format);
  if (f == "coordinate")
    h.coordinate = true;
  else if (f == "array")
    h.coordinate = false;
  else
    throw IoError(path + ": unsupported format '" + format + "'");
  const std::string fl = lower(field);
  if (fl == "complex")
    h.complex_field = true;
  else if (fl == "real")
    h.complex_field = false;
  else
    throw IoError(path + ": unsupported field '" + field + "'");
  const std::string sy = lower(symmetry);
  if (sy == "symmetric")
    h.symmetric = true;
  else if (sy == "general")
    h.symmetric = false;
  else
    throw IoError(path + ": unsupported symmetry '" + symmetry + "'");
  return h;
}

bool next_data_line(std::istream& in, std::string& line) {
  while (std::getline(in, line)) {
    std::size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i == line.size() || line[i] == '%') continue;
    return true;
  }
  return false;
}

}  // namespace

MatrixVariant read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  const Header h = parse_header(line, path);

  if (!next_data_line(in, line)) throw IoError(path + ": missing size line");
  std::istringstream size_line(line);

  if (h.coordinate) {
    long long rows = -1, cols = -1, entries = -1;
    size_line >> rows >> cols >> entries;
    if (rows < 0 || cols < 0 || entries < 0)
      throw IoError(path + ": malformed coordinate size line");
    std::vector<SparseMatrix::Triplet> trips;
    trips.reserve(static_cast<std::size_t>(entries) * (h.symmetric ? 2 : 1));
    for (long long k = 0; k < entries; ++k) {
      if (!next_data_line(in, line)) throw IoError(path + ": truncated entry list");
      std::istringstream es(line);
      long long i = 0, j = 0;
      double re = 0.0, im = 0.0;
      es >> i >> j >> re;
      if (h.complex_field) es >> im;
      if (!es) throw IoError(path + ": malformed entry line '" + line + "'");
      if (i < 1 || i > rows || j < 1 || j > cols)
        throw IoError(path + ": entry index out of bounds");
      const std::size_t r = static_cast<std::size_t>(i - 1);
      const std::size_t c = static_cast<std::size_t>(j - 1);
      trips.push_back({r, c, cdouble{re, im}});
      if (h.symmetric && r != c) trips.push_back({c, r, cdouble{re, im}});
    }
    return SparseMatrix::from_triplets(static_cast<std::size_t>(rows),
                                       static_cast<std::size_t>(cols), std::move(trips));
  }

  long long rows = -1, cols = -1;
  size_line >> rows >> cols;
  if (rows < 0 || cols < 0) throw IoError(path + ": malformed array size line");
  if (h.symmetric && rows != cols)
    throw IoError(path + ": symmetric array must be square");
  DenseMatrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
  // Array data is column-major; symmetric files store the lower triangle.
  for (long long j = 0; j < cols; ++j) {
    const long long i0 = h.symmetric ? j : 0;
    for (long long i = i0; i < rows; ++i) {
      if (!next_data_line(in, line)) throw IoError(path + ": truncated array data");
      std::istringstream es(line);
      double re = 0.0, im = 0.0;
      es >> re;
      if (h.complex_field) es >> im;
      if (!es) throw IoError(path + ": malformed array value '" + line + "'");
      m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = cdouble{re, im};
      if (h.symmetric && i != j)
        m(static_cast<std::size_t>(j), static_cast<std::size_t>(i)) = cdouble{re, im};
    }
  }
  return m;
}

namespace {

bool pure_real(const DenseMatrix& m) {
  const cdouble* p = m.data();
  for (std::size_t i = 0; i < m.rows() * m.cols(); ++i)
    if (p[i].imag() != 0.0) return false;
  return true;
}

bool pure_real(const SparseMatrix& m) {
  for (const cdouble& v : m.values())
    if (v.imag() != 0.0) return false;
  return true;
}

void print_value(std::FILE* f, cdouble v, bool complex_field) {
  if (complex_field)
    std::fprintf(f, "%.17g %.17g\n", v.real(), v.imag());
  else
    std::fprintf(f, "%.17g\n", v.real());
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

std::unique_ptr<std::FILE, FileCloser> open_out(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> f(std::fopen(path.c_str(), "w"));
  if (!f) throw IoError(path + ": cannot open for writing");
  return f;
}

}  // namespace

void write_matrix_market(const DenseMatrix& m, const std::string& path) {
  auto f = open_out(path);
  const bool cf = !pure_real(m);
  std::fprintf(f.get(), "%%%%MatrixMarket matrix array %s general\n",
               cf ? "complex" : "real");
  std::fprintf(f.get(), "%zu %zu\n", m.rows(), m.cols());
  for (std::size_t j = 0; j < m.cols(); ++j)
    for (std::size_t i = 0; i < m.rows(); ++i) print_value(f.get(), m(i, j), cf);
}

void write_matrix_market(const SparseMatrix& m, const std::string& path) {
  auto f = open_out(path);
  const bool cf = !pure_real(m);
  std::fprintf(f.get(), "%%%%MatrixMarket matrix coordinate %s general\n",
               cf ? "complex" : "real");
  std::fprintf(f.get(), "%zu %zu %zu\n", m.rows(), m.cols(), m.nnz());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t p = m.row_offsets()[i]; p < m.row_offsets()[i + 1]; ++p) {
      std::fprintf(f.get(), "%zu %zu ", i + 1, m.col_indices()[p] + 1);
      print_value(f.get(), m.values()[p], cf);
    }
}

void write_matrix_market(const MatrixVariant& m, const std::string& path) {
  std::visit([&](const auto& mm) { write_matrix_market(mm, path); }, m);
}

}  // namespace dynspec
