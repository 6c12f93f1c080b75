#pragma once

#include <vector>

#include "dynspec/dpt.hpp"
#include "dynspec/matrix.hpp"
#include "dynspec/partition.hpp"

namespace dynspec {

/// Perturbation-series coefficients of the eigenvector matrix and the
/// eigenvalue corrections. coefficients[l] multiplies lambda^l;
/// eigencorrections[l-1][n] is the order-l correction to eigenvalue n, so
/// eps_n(lambda) = d_n + sum_{l>=1} lambda^l eigencorrections[l-1][n].
struct RSExpansion {
  DiagonalMatrix d;
  std::vector<DenseMatrix> coefficients;
  std::vector<std::vector<cdouble>> eigencorrections;

  int order() const { return int(coefficients.size()) - 1; }
};

/// Series coefficients up to the requested order via the closed recursion
///   a0 = I,
///   a_l = theta .* (a_{l-1} D' - sum_{s=0}^{l-1} (a_s D') |> a_{l-1-s}),
/// keeping only the diagonals of past products, so memory is
/// (order + 2) dense matrices. The value of p.lambda is ignored.
RSExpansion rs_coefficients(const PartitionedProblem& p, int order);

struct RSValue {
  DenseMatrix a;
  std::vector<cdouble> eigenvalues;
};

/// Horner evaluation of the partial sums at a given lambda.
RSValue rs_partial_sum(const RSExpansion& e, cdouble lambda);

/// Max-abs difference between k map applications (from the identity) and the
/// order-k partial sum at the same lambda. Both truncations agree through
/// order k, so this gap is O(lambda^{k+1}).
double truncation_agreement(const PartitionedProblem& p, int order, cdouble lambda);

struct CompareOptions {
  int rs_max_order = 500;
  double rs_blowup_factor = 1e3;  // step growth over the running minimum ...
  int rs_blowup_run = 5;          // ... sustained this many orders = divergent
  double residual_factor = 100.0; // residual_tol = residual_factor * tol
};

struct OrderComparison {
  int k_d = -1;   // iterations of the map, or last iteration attempted
  int k_rs = -1;  // series order reached
  bool d_converged = false;
  bool rs_converged = false;
};

/// Orders-to-tolerance comparison between the fixed-point iteration and the
/// partial sums at the same lambda. Convergence on both sides requires a
/// step below tol and an eigenpair residual below residual_factor * tol;
/// series whose increments blow up against their running minimum, or which
/// exhaust rs_max_order, count as non-convergent.
OrderComparison compare_orders(const PartitionedProblem& p, cdouble lambda,
                               double tol, const CompareOptions& copts = {},
                               const IterationOptions& dopts = {});

}  // namespace dynspec
