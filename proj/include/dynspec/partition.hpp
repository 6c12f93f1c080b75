#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "dynspec/matrix.hpp"

namespace dynspec {

/// Two unperturbed levels collide (or nearly collide), so gap denominators
/// are unusable. Carries the offending pair.
class DegenerateSpectrum : public std::runtime_error {
 public:
  DegenerateSpectrum(const std::string& msg, std::size_t i, std::size_t j, cdouble ei,
                     cdouble ej)
      : std::runtime_error(msg), i_(i), j_(j), ei_(ei), ej_(ej) {}
  std::size_t first() const noexcept { return i_; }
  std::size_t second() const noexcept { return j_; }
  cdouble first_value() const noexcept { return ei_; }
  cdouble second_value() const noexcept { return ej_; }

 private:
  std::size_t i_, j_;
  cdouble ei_, ej_;
};

/// Gap matrix: theta(n, m) = 1 / (eps_n - eps_m), zero diagonal.
struct GapMatrix {
  DenseMatrix theta;
};

/// One row of the gap matrix, for single-vector iteration at sizes where the
/// full N x N table would be wasteful or impossible.
struct GapRow {
  std::size_t row = 0;
  std::vector<cdouble> inv_gaps;  // inv_gaps[row] == 0
};

/// A perturbation split M = D + lambda * Delta. The transpose of Delta is
/// cached at construction because the full-map iteration multiplies by it
/// from the right on every step.
struct PartitionedProblem {
  DiagonalMatrix d;
  MatrixVariant delta;
  MatrixVariant delta_t;
  cdouble lambda{1.0, 0.0};

  std::size_t size() const { return d.size(); }
};

enum class PartitionMode { DiagonalSplit };

/// Serializable description of how a problem was built.
struct ProblemDescriptor {
  std::string kind;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  cdouble lambda{1.0, 0.0};
};

PartitionedProblem make_problem(DiagonalMatrix d, MatrixVariant delta, cdouble lambda);

/// Epstein-Nesbet style split of a square matrix: D = diag(m),
/// Delta = m - diag(m) with an exactly zero diagonal, lambda = 1.
PartitionedProblem partition(const MatrixVariant& m,
                             PartitionMode mode = PartitionMode::DiagonalSplit);

/// Bounding-box estimate of the spectral spread of the unperturbed levels;
/// used to scale the degeneracy threshold.
double spectral_spread(const DiagonalMatrix& d);

/// Builds the full gap matrix. A pair of levels closer than
/// degeneracy_tol * max(1, spread) raises DegenerateSpectrum.
GapMatrix build_theta(const DiagonalMatrix& d, double degeneracy_tol = 1e-12);

/// Gap row for a single chart index n, same degeneracy policy restricted to
/// gaps involving n. Never materializes the full table.
GapRow build_gap_row(const DiagonalMatrix& d, std::size_t n,
                     double degeneracy_tol = 1e-12);

// Fixture problems. Both have zero-diagonal, unit-scale perturbations.
PartitionedProblem build_two_by_two(cdouble lambda = cdouble{1.0, 0.0});
PartitionedProblem build_three_by_three(cdouble lambda = cdouble{1.0, 0.0});

/// Harmonic-oscillator family restricted to the even sector: levels
/// eps_n = 2n + 1/2 and the rank-one perturbation
/// Delta(n, m) = phi_2n(0) * phi_2m(0), built from the stable ratio
/// recurrence phi_2n(0) = -phi_2(n-1)(0) * sqrt((2n-1)/(2n)),
/// phi_0(0) = pi^(-1/4).
PartitionedProblem build_oscillator(std::size_t n_basis);

/// D = diag(1..n), Delta dense i.i.d. uniform on [-1, 1] (not symmetrized).
PartitionedProblem build_random_uniform(std::size_t n, std::uint64_t seed);

/// Erdos-Renyi graph Laplacian L = Deg - Adj with exactly n distinct edges
/// drawn uniformly without replacement among the n(n-1)/2 vertex pairs.
/// Requires n >= 3.
SparseMatrix build_er_laplacian(std::size_t n, std::uint64_t seed);

/// Oscillator diagonal perturbed by lambda * L for an ER Laplacian L, then
/// re-split so the perturbation has zero diagonal (diagonal of lambda * L is
/// absorbed into D and lambda is folded to 1).
PartitionedProblem build_er_perturbed_oscillator(std::size_t n, std::uint64_t seed,
                                                 cdouble lambda);

/// Oscillator diagonal perturbed by a dense nonsymmetric uniform matrix with
/// entries in [-scale, scale], re-split the same way.
PartitionedProblem build_uniform_perturbed_oscillator(std::size_t n, std::uint64_t seed,
                                                      cdouble lambda, double scale = 1.0);

}  // namespace dynspec
