#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace dynspec {

using cdouble = std::complex<double>;

/// Shape or storage precondition violated (mismatched dimensions, bad index).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Power iteration for the spectral norm failed to settle within its budget.
/// Carries the last Rayleigh estimate so callers can still inspect it.
class SpectralNormError : public std::runtime_error {
 public:
  SpectralNormError(const std::string& msg, double best_estimate)
      : std::runtime_error(msg), best_estimate_(best_estimate) {}
  double best_estimate() const noexcept { return best_estimate_; }

 private:
  double best_estimate_;
};

/// Row-major dense matrix over complex double.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, cdouble fill = cdouble{})
      : rows_(rows), cols_(cols), e_(rows * cols, fill) {}

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool is_square() const noexcept { return rows_ == cols_; }

  cdouble& operator()(std::size_t i, std::size_t j) { return e_[i * cols_ + j]; }
  const cdouble& operator()(std::size_t i, std::size_t j) const { return e_[i * cols_ + j]; }

  std::span<cdouble> row(std::size_t i) { return {e_.data() + i * cols_, cols_}; }
  std::span<const cdouble> row(std::size_t i) const { return {e_.data() + i * cols_, cols_}; }

  cdouble* data() noexcept { return e_.data(); }
  const cdouble* data() const noexcept { return e_.data(); }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cdouble> e_;
};

/// Diagonal matrix, stored as its diagonal.
struct DiagonalMatrix {
  std::vector<cdouble> d;

  DiagonalMatrix() = default;
  explicit DiagonalMatrix(std::vector<cdouble> diag) : d(std::move(diag)) {}

  std::size_t size() const noexcept { return d.size(); }
  DenseMatrix to_dense() const;
};

/// Compressed-row sparse matrix. Column indices are sorted within each row.
class SparseMatrix {
 public:
  SparseMatrix() = default;
  SparseMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), row_offsets_(rows + 1, 0) {}

  struct Triplet {
    std::size_t r, c;
    cdouble v;
  };

  /// Builds CSR from triplets; duplicates are summed, columns sorted.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols,
                                    std::vector<Triplet> triplets);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::size_t> row_offsets() const { return row_offsets_; }
  std::span<const std::size_t> col_indices() const { return col_indices_; }
  std::span<const cdouble> values() const { return values_; }
  std::span<cdouble> values() { return values_; }

  /// Entry lookup by binary search within the row; zero when absent.
  cdouble at(std::size_t i, std::size_t j) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_offsets_;
  std::vector<std::size_t> col_indices_;
  std::vector<cdouble> values_;
};

using MatrixVariant = std::variant<DenseMatrix, SparseMatrix>;

std::size_t mat_rows(const MatrixVariant& m);
std::size_t mat_cols(const MatrixVariant& m);

DenseMatrix transpose(const DenseMatrix& a);
SparseMatrix transpose(const SparseMatrix& a);
MatrixVariant transpose(const MatrixVariant& a);

DenseMatrix densify(const SparseMatrix& a);
DenseMatrix densify(const MatrixVariant& a);
SparseMatrix sparse_from_diagonal(const DiagonalMatrix& d);

std::vector<cdouble> diagonal_of(const DenseMatrix& a);
std::vector<cdouble> diagonal_of(const SparseMatrix& a);
std::vector<cdouble> diagonal_of(const MatrixVariant& a);

// Matrix products. Mixed dense/sparse forms cover every combination the
// iteration drivers need; A * S iterates rows of S so CSR multiplies cheaply
// from the right.
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul(const DenseMatrix& a, const SparseMatrix& b);
DenseMatrix matmul(const SparseMatrix& a, const DenseMatrix& b);
SparseMatrix matmul(const SparseMatrix& a, const SparseMatrix& b);
DenseMatrix matmul(const DenseMatrix& a, const MatrixVariant& b);

std::vector<cdouble> matvec(const DenseMatrix& a, std::span<const cdouble> x);
std::vector<cdouble> matvec(const SparseMatrix& a, std::span<const cdouble> x);
std::vector<cdouble> matvec(const MatrixVariant& a, std::span<const cdouble> x);

// Elementwise (Hadamard) product. Sparse-dense combinations keep the sparse
// pattern; sparse-sparse keeps the pattern intersection.
DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b);
SparseMatrix hadamard(const SparseMatrix& a, const DenseMatrix& b);
SparseMatrix hadamard(const DenseMatrix& a, const SparseMatrix& b);
SparseMatrix hadamard(const SparseMatrix& a, const SparseMatrix& b);

// Triangle product a |> b = (I . a) b: row m of b scaled by a_m^m.
DenseMatrix triangle(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix triangle(const SparseMatrix& a, const DenseMatrix& b);
SparseMatrix triangle(const DenseMatrix& a, const SparseMatrix& b);
SparseMatrix triangle(const SparseMatrix& a, const SparseMatrix& b);

double max_abs(const DenseMatrix& a);
double max_abs(const SparseMatrix& a);
double max_abs(const MatrixVariant& a);
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
double vec_inf_norm(std::span<const cdouble> v);
double vec_two_norm(std::span<const cdouble> v);
bool all_finite(const DenseMatrix& a);
bool all_finite(std::span<const cdouble> v);

/// Largest singular value by power iteration on a^H a from the normalized
/// all-ones vector. Deterministic; throws SpectralNormError past max_iter.
double spectral_norm(const DenseMatrix& a, double tol = 1e-10, int max_iter = 10000);
double spectral_norm(const SparseMatrix& a, double tol = 1e-10, int max_iter = 10000);
double spectral_norm(const MatrixVariant& a, double tol = 1e-10, int max_iter = 10000);

/// Direct dense solve (LU, partial pivoting). Intended for small systems:
/// homotopy rebasing, Newton corrections, Rayleigh-quotient baselines.
std::vector<cdouble> solve_linear(DenseMatrix a, std::vector<cdouble> b);
/// Solves A X = B column by column with a single factorization.
DenseMatrix solve_linear_multi(DenseMatrix a, const DenseMatrix& b);

}  // namespace dynspec
