#include "dynspec/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace dynspec {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DiagonalMatrix::to_dense() const {
  DenseMatrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  for (const auto& t : triplets)
    require(t.r < rows && t.c < cols, "triplet index out of bounds");
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.r != b.r ? a.r < b.r : a.c < b.c;
  });
  SparseMatrix m(rows, cols);
  m.col_indices_.reserve(triplets.size());
  m.values_.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size();) {
    std::size_t j = i + 1;
    cdouble v = triplets[i].v;
    while (j < triplets.size() && triplets[j].r == triplets[i].r &&
           triplets[j].c == triplets[i].c) {
      v += triplets[j].v;
      ++j;
    }
    m.col_indices_.push_back(triplets[i].c);
    m.values_.push_back(v);
    ++m.row_offsets_[triplets[i].r + 1];
    i = j;
  }
  for (std::size_t r = 0; r < rows; ++r) m.row_offsets_[r + 1] += m.row_offsets_[r];
  return m;
}

cdouble SparseMatrix::at(std::size_t i, std::size_t j) const {
  require(i < rows_ && j < cols_, "sparse index out of bounds");
  auto begin = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i]);
  auto end = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[i + 1]);
  auto it = std::lower_bound(begin, end, j);
  if (it == end || *it != j) return {};
  return values_[static_cast<std::size_t>(it - col_indices_.begin())];
}

std::size_t mat_rows(const MatrixVariant& m) {
  return std::visit([](const auto& a) { return a.rows(); }, m);
}

std::size_t mat_cols(const MatrixVariant& m) {
  return std::visit([](const auto& a) { return a.cols(); }, m);
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

SparseMatrix transpose(const SparseMatrix& a) {
  std::vector<SparseMatrix::Triplet> trips;
  trips.reserve(a.nnz());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = a.row_offsets()[i]; k < a.row_offsets()[i + 1]; ++k)
      trips.push_back({a.col_indices()[k], i, a.values()[k]});
  return SparseMatrix::from_triplets(a.cols(), a.rows(), std::move(trips));
}

MatrixVariant transpose(const MatrixVariant& a) {
  return std::visit([](const auto& m) -> MatrixVariant { return transpose(m); }, a);
}

DenseMatrix densify(const SparseMatrix& a) {
  DenseMatrix m(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = a.row_offsets()[i]; k < a.row_offsets()[i + 1]; ++k)
      m(i, a.col_indices()[k]) = a.values()[k];
  return m;
}

DenseMatrix densify(const MatrixVariant& a) {
  if (std::holds_alternative<DenseMatrix>(a)) return std::get<DenseMatrix>(a);
  return densify(std::get<SparseMatrix>(a));
}

SparseMatrix sparse_from_diagonal(const DiagonalMatrix& d) {
  std::vector<SparseMatrix::Triplet> trips;
  trips.reserve(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) trips.push_back({i, i, d.d[i]});
  return SparseMatrix::from_triplets(d.size(), d.size(), std::move(trips));
}

std::vector<cdouble> diagonal_of(const DenseMatrix& a) {
  require(a.is_square(), "diagonal of non-square matrix");
  std::vector<cdouble> d(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) d[i] = a(i, i);
  return d;
}

std::vector<cdouble> diagonal_of(const SparseMatrix& a) {
  require(a.rows() == a.cols(), "diagonal of non-square matrix");
  std::vector<cdouble> d(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) d[i] = a.at(i, i);
  return d;
}

std::vector<cdouble> diagonal_of(const MatrixVariant& a) {
  return std::visit([](const auto& m) { return diagonal_of(m); }, a);
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul shape mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cdouble* ci = c.data() + i * c.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cdouble aik = a(i, k);
      if (aik == cdouble{}) continue;
      const cdouble* bk = b.data() + k * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

DenseMatrix matmul(const DenseMatrix& a, const SparseMatrix& b) {
  require(a.cols() == b.rows(), "matmul shape mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cdouble* ci = c.data() + i * c.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cdouble aik = a(i, k);
      if (aik == cdouble{}) continue;
      for (std::size_t p = b.row_offsets()[k]; p < b.row_offsets()[k + 1]; ++p)
        ci[b.col_indices()[p]] += aik * b.values()[p];
    }
  }
  return c;
}

DenseMatrix matmul(const SparseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul shape mismatch");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cdouble* ci = c.data() + i * c.cols();
    for (std::size_t p = a.row_offsets()[i]; p < a.row_offsets()[i + 1]; ++p) {
      const cdouble v = a.values()[p];
      const cdouble* bk = b.data() + a.col_indices()[p] * b.cols();
      for (std::size_t j = 0; j < b.cols(); ++j) ci[j] += v * bk[j];
    }
  }
  return c;
}

SparseMatrix matmul(const SparseMatrix& a, const SparseMatrix& b) {
  require(a.cols() == b.rows(), "matmul shape mismatch");
  // Gustavson row-by-row product with a dense accumulator.
  std::vector<cdouble> acc(b.cols(), cdouble{});
  std::vector<std::size_t> touched;
  std::vector<SparseMatrix::Triplet> trips;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    touched.clear();
    for (std::size_t p = a.row_offsets()[i]; p < a.row_offsets()[i + 1]; ++p) {
      const cdouble v = a.values()[p];
      const std::size_t k = a.col_indices()[p];
      for (std::size_t q = b.row_offsets()[k]; q < b.row_offsets()[k + 1]; ++q) {
        const std::size_t j = b.col_indices()[q];
        if (acc[j] == cdouble{}) touched.push_back(j);
        acc[j] += v * b.values()[q];
      }
    }
    for (std::size_t j : touched) {
      trips.push_back({i, j, acc[j]});
      acc[j] = cdouble{};
    }
  }
  return SparseMatrix::from_triplets(a.rows(), b.cols(), std::move(trips));
}

DenseMatrix matmul(const DenseMatrix& a, const MatrixVariant& b) {
  return std::visit([&](const auto& m) { return matmul(a, m); }, b);
}

std::vector<cdouble> matvec(const DenseMatrix& a, std::span<const cdouble> x) {
  require(a.cols() == x.size(), "matvec shape mismatch");
  std::vector<cdouble> y(a.rows(), cdouble{});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const cdouble* ai = a.data() + i * a.cols();
    cdouble s{};
    for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
    y[i] = s;
  }
  return y;
}

std::vector<cdouble> matvec(const SparseMatrix& a, std::span<const cdouble> x) {
  require(a.cols() == x.size(), "matvec shape mismatch");
  std::vector<cdouble> y(a.rows(), cdouble{});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    cdouble s{};
    for (std::size_t p = a.row_offsets()[i]; p < a.row_offsets()[i + 1]; ++p)
      s += a.values()[p] * x[a.col_indices()[p]];
    y[i] = s;
  }
  return y;
}

std::vector<cdouble> matvec(const MatrixVariant& a, std::span<const cdouble> x) {
  return std::visit([&](const auto& m) { return matvec(m, x); }, a);
}

DenseMatrix hadamard(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard shape mismatch");
  DenseMatrix c(a.rows(), a.cols());
  const cdouble* pa = a.data();
  const cdouble* pb = b.data();
  cdouble* pc = c.data();
  const std::size_t n = a.rows() * a.cols();
  for (std::size_t i = 0; i < n; ++i) pc[i] = pa[i] * pb[i];
  return c;
}

SparseMatrix hadamard(const SparseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard shape mismatch");
  std::vector<SparseMatrix::Triplet> trips;
  trips.reserve(a.nnz());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t p = a.row_offsets()[i]; p < a.row_offsets()[i + 1]; ++p)
      trips.push_back({i, a.col_indices()[p], a.values()[p] * b(i, a.col_indices()[p])});
  return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(trips));
}

SparseMatrix hadamard(const DenseMatrix& a, const SparseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard shape mismatch");
  std::vector<SparseMatrix::Triplet> trips;
  trips.reserve(b.nnz());
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t p = b.row_offsets()[i]; p < b.row_offsets()[i + 1]; ++p)
      trips.push_back({i, b.col_indices()[p], a(i, b.col_indices()[p]) * b.values()[p]});
  return SparseMatrix::from_triplets(b.rows(), b.cols(), std::move(trips));
}

SparseMatrix hadamard(const SparseMatrix& a, const SparseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard shape mismatch");
  std::vector<SparseMatrix::Triplet> trips;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    std::size_t p = a.row_offsets()[i];
    std::size_t q = b.row_offsets()[i];
    const std::size_t pe = a.row_offsets()[i + 1];
    const std::size_t qe = b.row_offsets()[i + 1];
    while (p < pe && q < qe) {
      const std::size_t ca = a.col_indices()[p];
      const std::size_t cb = b.col_indices()[q];
      if (ca == cb) {
        trips.push_back({i, ca, a.values()[p] * b.values()[q]});
        ++p;
        ++q;
      } else if (ca < cb) {
        ++p;
      } else {
        ++q;
      }
    }
  }
  return SparseMatrix::from_triplets(a.rows(), a.cols(), std::move(trips));
}

DenseMatrix triangle(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.is_square(), "triangle left operand must be square");
  require(a.rows() == b.rows(), "triangle shape mismatch");
  DenseMatrix c(b.rows(), b.cols());
  for (std::size_t m = 0; m < b.rows(); ++m) {
    const cdouble amm = a(m, m);
    const cdouble* bm = b.data() + m * b.cols();
    cdouble* cm = c.data() + m * c.cols();
    for (std::size_t j = 0; j < b.cols(); ++j) cm[j] = amm * bm[j];
  }
  return c;
}

DenseMatrix triangle(const SparseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == a.cols(), "triangle left operand must be square");
  require(a.rows() == b.rows(), "triangle shape mismatch");
  DenseMatrix c(b.rows(), b.cols());
  for (std::size_t m = 0; m < b.rows(); ++m) {
    const cdouble amm = a.at(m, m);
    const cdouble* bm = b.data() + m * b.cols();
    cdouble* cm = c.data() + m * c.cols();
    for (std::size_t j = 0; j < b.cols(); ++j) cm[j] = amm * bm[j];
  }
  return c;
}

namespace {

SparseMatrix scale_rows_sparse(const SparseMatrix& b, const std::vector<cdouble>& s) {
  std::vector<SparseMatrix::Triplet> trips;
  trips.reserve(b.nnz());
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t p = b.row_offsets()[i]; p < b.row_offsets()[i + 1]; ++p)
      trips.push_back({i, b.col_indices()[p], s[i] * b.values()[p]});
  return SparseMatrix::from_triplets(b.rows(), b.cols(), std::move(trips));
}

}  // namespace

SparseMatrix triangle(const DenseMatrix& a, const SparseMatrix& b) {
  require(a.is_square(), "triangle left operand must be square");
  require(a.rows() == b.rows(), "triangle shape mismatch");
  return scale_rows_sparse(b, diagonal_of(a));
}

SparseMatrix triangle(const SparseMatrix& a, const SparseMatrix& b) {
  require(a.rows() == a.cols(), "triangle left operand must be square");
  require(a.rows() == b.rows(), "triangle shape mismatch");
  return scale_rows_sparse(b, diagonal_of(a));
}

double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  const cdouble* p = a.data();
  const std::size_t n = a.rows() * a.cols();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(p[i]));
  return m;
}

double max_abs(const SparseMatrix& a) {
  double m = 0.0;
  for (const cdouble& v : a.values()) m = std::max(m, std::abs(v));
  return m;
}

double max_abs(const MatrixVariant& a) {
  return std::visit([](const auto& m) { return max_abs(m); }, a);
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "max_abs_diff shape mismatch");
  double m = 0.0;
  const cdouble* pa = a.data();
  const cdouble* pb = b.data();
  const std::size_t n = a.rows() * a.cols();
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(pa[i] - pb[i]));
  return m;
}

double vec_inf_norm(std::span<const cdouble> v) {
  double m = 0.0;
  for (const cdouble& x : v) m = std::max(m, std::abs(x));
  return m;
}

double vec_two_norm(std::span<const cdouble> v) {
  double s = 0.0;
  for (const cdouble& x : v) s += std::norm(x);
  return std::sqrt(s);
}

bool all_finite(const DenseMatrix& a) {
  const cdouble* p = a.data();
  const std::size_t n = a.rows() * a.cols();
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(p[i].real()) || !std::isfinite(p[i].imag())) return false;
  return true;
}

bool all_finite(std::span<const cdouble> v) {
  for (const cdouble& x : v)
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) return false;
  return true;
}

namespace {

// Power iteration on a^H a. Forward and adjoint products are supplied by the
// caller so dense and sparse storage share one driver.
template <typename Fwd, typename Adj>
double power_norm(std::size_t rows, std::size_t cols, Fwd&& fwd, Adj&& adj, double tol,
                  int max_iter) {
  if (rows == 0 || cols == 0) return 0.0;
  std::vector<cdouble> v(cols, cdouble{1.0 / std::sqrt(double(cols)), 0.0});
  std::vector<cdouble> w(rows);
  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    fwd(v, w);
    const double s = vec_two_norm(w);
    if (s == 0.0) return 0.0;
    adj(w, v);
    const double g = vec_two_norm(v);
    if (g == 0.0) return s;
    for (cdouble& x : v) x /= g;
    const double next = std::sqrt(g);
    if (it > 0 && std::abs(next - sigma) <= tol * std::max(next, 1e-300)) return next;
    sigma = next;
  }
  throw SpectralNormError("spectral_norm: power iteration did not settle", sigma);
}

}  // namespace

double spectral_norm(const DenseMatrix& a, double tol, int max_iter) {
  return power_norm(
      a.rows(), a.cols(),
      [&](const std::vector<cdouble>& x, std::vector<cdouble>& y) {
        for (std::size_t i = 0; i < a.rows(); ++i) {
          const cdouble* ai = a.data() + i * a.cols();
          cdouble s{};
          for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
          y[i] = s;
        }
      },
      [&](const std::vector<cdouble>& y, std::vector<cdouble>& x) {
        std::fill(x.begin(), x.end(), cdouble{});
        for (std::size_t i = 0; i < a.rows(); ++i) {
          const cdouble* ai = a.data() + i * a.cols();
          const cdouble yi = y[i];
          for (std::size_t j = 0; j < a.cols(); ++j) x[j] += std::conj(ai[j]) * yi;
        }
      },
      tol, max_iter);
}

double spectral_norm(const SparseMatrix& a, double tol, int max_iter) {
  return power_norm(
      a.rows(), a.cols(),
      [&](const std::vector<cdouble>& x, std::vector<cdouble>& y) {
        for (std::size_t i = 0; i < a.rows(); ++i) {
          cdouble s{};
          for (std::size_t p = a.row_offsets()[i]; p < a.row_offsets()[i + 1]; ++p)
            s += a.values()[p] * x[a.col_indices()[p]];
          y[i] = s;
        }
      },
      [&](const std::vector<cdouble>& y, std::vector<cdouble>& x) {
        std::fill(x.begin(), x.end(), cdouble{});
        for (std::size_t i = 0; i < a.rows(); ++i) {
          const cdouble yi = y[i];
          for (std::size_t p = a.row_offsets()[i]; p < a.row_offsets()[i + 1]; ++p)
            x[a.col_indices()[p]] += std::conj(a.values()[p]) * yi;
        }
      },
      tol, max_iter);
}

double spectral_norm(const MatrixVariant& a, double tol, int max_iter) {
  return std::visit([&](const auto& m) { return spectral_norm(m, tol, max_iter); }, a);
}

namespace {

// In-place LU with partial pivoting; perm gets the row permutation.
void lu_factor(DenseMatrix& a, std::vector<std::size_t>& perm) {
  const std::size_t n = a.rows();
  perm.resize(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    double best = std::abs(a(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      const double v = std::abs(a(i, k));
      if (v > best) {
        best = v;
        piv = i;
      }
    }
    if (best == 0.0) throw std::runtime_error("solve_linear: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(piv, j));
      std::swap(perm[k], perm[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const cdouble f = a(i, k) / a(k, k);
      a(i, k) = f;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
}

std::vector<cdouble> lu_solve(const DenseMatrix& lu, const std::vector<std::size_t>& perm,
                              std::span<const cdouble> b) {
  const std::size_t n = lu.rows();
  std::vector<cdouble> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm[i]];
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t j = ii + 1; j < n; ++j) x[ii] -= lu(ii, j) * x[j];
    x[ii] /= lu(ii, ii);
  }
  return x;
}

}  // namespace

std::vector<cdouble> solve_linear(DenseMatrix a, std::vector<cdouble> b) {
  require(a.is_square() && a.rows() == b.size(), "solve_linear shape mismatch");
  std::vector<std::size_t> perm;
  lu_factor(a, perm);
  return lu_solve(a, perm, b);
}

DenseMatrix solve_linear_multi(DenseMatrix a, const DenseMatrix& b) {
  require(a.is_square() && a.rows() == b.rows(), "solve_linear_multi shape mismatch");
  std::vector<std::size_t> perm;
  lu_factor(a, perm);
  DenseMatrix x(b.rows(), b.cols());
  std::vector<cdouble> col(b.rows());
  for (std::size_t j = 0; j < b.cols(); ++j) {
    for (std::size_t i = 0; i < b.rows(); ++i) col[i] = b(i, j);
    std::vector<cdouble> sol = lu_solve(a, perm, col);
    for (std::size_t i = 0; i < b.rows(); ++i) x(i, j) = sol[i];
  }
  return x;
}

}  // namespace dynspec
