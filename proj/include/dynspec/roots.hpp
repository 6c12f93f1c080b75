#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "dynspec/matrix.hpp"

namespace dynspec {

/// Simultaneous polynomial root iteration failed to settle.
class RootSolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Characteristic polynomial of a square dense matrix by the
/// Faddeev-LeVerrier recurrence. Returns coefficients low to high,
/// c[n] = 1 (monic), so p(x) = sum_i c[i] x^i.
std::vector<cdouble> characteristic_polynomial(const DenseMatrix& a);

/// All roots of a polynomial (coefficients low to high, leading nonzero)
/// by Durand-Kerner iteration. Exact zero roots are deflated first.
std::vector<cdouble> durand_kerner(std::span<const cdouble> coeffs, double tol = 1e-12,
                                   int max_iter = 1000);

/// Eigenvalues of a small dense matrix via the two routines above.
std::vector<cdouble> eigenvalues_dense_small(const DenseMatrix& a, double tol = 1e-12);

}  // namespace dynspec
