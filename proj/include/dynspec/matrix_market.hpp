#pragma once

#include <stdexcept>
#include <string>

#include "dynspec/matrix.hpp"

namespace dynspec {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a Matrix Market file. Supported: coordinate and array formats,
/// real and complex fields, general and symmetric symmetry (symmetric input
/// is expanded to full storage). Coordinate data yields SparseMatrix, array
/// data DenseMatrix. Throws IoError on malformed input or indices out of
/// bounds.
MatrixVariant read_matrix_market(const std::string& path);

/// Writers emit array format for dense and coordinate format for sparse
/// matrices, choosing the real field when every entry has zero imaginary
/// part. Values are printed with 17 significant digits so a write/read
/// round trip reproduces doubles bitwise.
void write_matrix_market(const DenseMatrix& m, const std::string& path);
void write_matrix_market(const SparseMatrix& m, const std::string& path);
void write_matrix_market(const MatrixVariant& m, const std::string& path);

}  // namespace dynspec
