#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dynspec/matrix.hpp"
#include "dynspec/partition.hpp"

namespace dynspec {

enum class ConvergenceStatus {
  Converged,
  BoundedNonConverged,
  Diverged,
  MaxIterations,
};

std::string to_string(ConvergenceStatus s);

struct IterationOptions {
  double tol = 1e-12;                  // step-norm threshold (max-abs entry)
  double residual_tol = 1e-10;         // per-row eigenpair residual threshold
  int max_iter = 10000;
  double divergence_threshold = 1e8;   // max-abs entry beyond which the orbit
                                       // is declared divergent
  int cycle_window = 16;               // look-back for periodic-orbit
                                       // detection; 0 disables it
  double degeneracy_tol = 1e-12;
};

/// Current iterate of the full map together with its step count.
struct EigenIterate {
  DenseMatrix a;
  int k = 0;
};

struct ConvergenceReport {
  EigenIterate state;
  std::vector<cdouble> eigenvalues;
  ConvergenceStatus status = ConvergenceStatus::MaxIterations;
  int iterations = 0;
  std::vector<double> residuals;  // per chart row, inf-norm relative to the row
  double step_norm = 0.0;
};

/// Optional per-iteration observer: (k, step_norm, max_residual).
using TraceSink = std::function<void(int, double, double)>;

/// One application of the full map
///   F(A) = I + lambda * theta .* (A Delta' - (A Delta') |> A),
/// where .* is the elementwise product and |> scales row m of its right
/// operand by the diagonal entry m of its left operand. delta_t must be the
/// transposed perturbation. The unit diagonal of the result is exact.
DenseMatrix step_full(const DenseMatrix& a, const GapMatrix& theta,
                      const MatrixVariant& delta_t, cdouble lambda);

/// One application of the row map for chart index gaps.row:
///   F_n(z)^m = delta_nm + lambda * theta_nm * ((Dz)^m - (Dz)^n z^m),
/// with one matrix-vector product against delta (not transposed).
std::vector<cdouble> step_single(std::span<const cdouble> z, const GapRow& gaps,
                                 const MatrixVariant& delta, cdouble lambda);
std::vector<cdouble> step_single(std::span<const cdouble> z, std::size_t n,
                                 const GapMatrix& theta, const MatrixVariant& delta,
                                 cdouble lambda);

/// Eigenvalue read-off for a chart-normalized row vector:
/// eps_n + lambda * (Delta z)^n. When lambda is folded into Delta pass 1.
cdouble eigenvalue_of(std::span<const cdouble> z, std::size_t n,
                      const DiagonalMatrix& d, const MatrixVariant& delta,
                      cdouble lambda);

/// Fixed-point iteration of the full map from A = I at p.lambda.
/// Converged requires both step_norm < tol and every row residual below
/// residual_tol; orbits that revisit an earlier iterate (period >= 2) are
/// classified BoundedNonConverged, escapes beyond divergence_threshold are
/// Diverged, and an exhausted budget yields MaxIterations. Diverged reports
/// carry NaN eigenvalues and residuals; every other status reports the
/// read-offs of the final iterate.
ConvergenceReport iterate_full(const PartitionedProblem& p,
                               const IterationOptions& opts = {},
                               const TraceSink& trace = {});

/// Nonautonomous variant: step k (k = 1, 2, ...) uses
/// lambda_k = lambda * (1 - alpha^(k-1)), so the schedule starts at 0 and
/// approaches lambda geometrically. Convergence is only tested once
/// |lambda_k - lambda| <= tol * |lambda|. alpha = 0 reproduces the
/// autonomous scheme after the first step.
ConvergenceReport iterate_ramped(const PartitionedProblem& p, double alpha,
                                 const IterationOptions& opts = {},
                                 const TraceSink& trace = {});

/// Exactly k applications of the full map from A = I at the given lambda,
/// with no convergence or divergence logic. Used by truncation comparisons.
DenseMatrix iterate_fixed(const PartitionedProblem& p, int k, cdouble lambda);

struct SingleRowReport {
  std::vector<cdouble> z;
  cdouble eigenvalue{};
  ConvergenceStatus status = ConvergenceStatus::MaxIterations;
  int iterations = 0;
  double residual = 0.0;
  double step_norm = 0.0;
};

/// Row-map iteration from z = e_row, with the same classification rules as
/// iterate_full. ramp_alpha > 0 applies the nonautonomous schedule.
SingleRowReport iterate_single(const PartitionedProblem& p, std::size_t row,
                               const IterationOptions& opts = {},
                               double ramp_alpha = 0.0, const TraceSink& trace = {});

struct DominantEigenpair {
  std::size_t row = 0;       // chart index of the dominant level
  std::vector<cdouble> z_chart;
  std::vector<cdouble> z_unit;
  cdouble eigenvalue{};
  ConvergenceStatus status = ConvergenceStatus::MaxIterations;
  int iterations = 0;
  double residual = 0.0;
  double step_norm = 0.0;
};

/// Single-vector solve for the eigenvector continued from the largest
/// unperturbed level (by real part). Never materializes the full gap matrix,
/// so it runs at sizes where build_theta would not. Throws
/// DegenerateSpectrum when the dominant level is ambiguous.
DominantEigenpair dominant_eigenpair(const PartitionedProblem& p,
                                     const IterationOptions& opts = {});

/// Jacobian of the row map at z:
///   (dF_n)^m_k = lambda * theta_nm * (Delta_mk - delta_mk (Dz)^n - z^m Delta_nk).
/// Row n is identically zero because the chart coordinate is pinned.
DenseMatrix jacobian_single(std::span<const cdouble> z, std::size_t n,
                            const GapMatrix& theta, const MatrixVariant& delta,
                            cdouble lambda);

/// Drops row and column n (the pinned chart direction).
DenseMatrix reduced_jacobian(const DenseMatrix& j, std::size_t n);

/// Multipliers (eigenvalues of the reduced Jacobian) via the characteristic
/// polynomial and simultaneous root iteration. Dimension is capped at 8.
std::vector<cdouble> multipliers(const DenseMatrix& reduced);

/// Staged continuation: q stages with targets s * lambda / q. After each
/// stage the problem is rebased by the converged eigenvector basis
/// (M -> V^-1 M V with V the transposed iterate) and re-split so the
/// remaining perturbation has zero diagonal. Densifies the problem, so it is
/// intended for moderate sizes. A non-converged stage aborts with the partial
/// composition; the final report carries residuals against the original M.
ConvergenceReport homotopy_solve(const PartitionedProblem& p, int stages,
                                 const IterationOptions& opts = {});

}  // namespace dynspec
