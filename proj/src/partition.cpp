#include "dynspec/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

#include "dynspec/rng.hpp"

namespace dynspec {

PartitionedProblem make_problem(DiagonalMatrix d, MatrixVariant delta, cdouble lambda) {
  if (mat_rows(delta) != d.size() || mat_cols(delta) != d.size())
    throw ShapeError("make_problem: delta shape does not match diagonal");
  PartitionedProblem p;
  p.delta_t = transpose(delta);
  p.d = std::move(d);
  p.delta = std::move(delta);
  p.lambda = lambda;
  return p;
}

PartitionedProblem partition(const MatrixVariant& m, PartitionMode mode) {
  (void)mode;  // single mode today; the enum keeps call sites explicit
  if (mat_rows(m) != mat_cols(m)) throw ShapeError("partition: matrix must be square");
  DiagonalMatrix d{diagonal_of(m)};
  if (std::holds_alternative<DenseMatrix>(m)) {
    DenseMatrix delta = std::get<DenseMatrix>(m);
    for (std::size_t i = 0; i < delta.rows(); ++i) delta(i, i) = cdouble{};
    return make_problem(std::move(d), std::move(delta), cdouble{1.0, 0.0});
  }
  const SparseMatrix& s = std::get<SparseMatrix>(m);
  std::vector<SparseMatrix::Triplet> trips;
  trips.reserve(s.nnz());
  for (std::size_t i = 0; i < s.rows(); ++i)
    for (std::size_t p = s.row_offsets()[i]; p < s.row_offsets()[i + 1]; ++p)
      if (s.col_indices()[p] != i) trips.push_back({i, s.col_indices()[p], s.values()[p]});
  SparseMatrix delta = SparseMatrix::from_triplets(s.rows(), s.cols(), std::move(trips));
  return make_problem(std::move(d), std::move(delta), cdouble{1.0, 0.0});
}

double spectral_spread(const DiagonalMatrix& d) {
  if (d.size() == 0) return 0.0;
  double re_lo = d.d[0].real(), re_hi = re_lo;
  double im_lo = d.d[0].imag(), im_hi = im_lo;
  for (const cdouble& e : d.d) {
    re_lo = std::min(re_lo, e.real());
    re_hi = std::max(re_hi, e.real());
    im_lo = std::min(im_lo, e.imag());
    im_hi = std::max(im_hi, e.imag());
  }
  return std::hypot(re_hi - re_lo, im_hi - im_lo);
}

namespace {

double degeneracy_threshold(const DiagonalMatrix& d, double tol) {
  return tol * std::max(1.0, spectral_spread(d));
}

[[noreturn]] void throw_degenerate(std::size_t i, std::size_t j, cdouble ei, cdouble ej) {
  throw DegenerateSpectrum("degenerate spectrum: levels " + std::to_string(i) + " and " +
                               std::to_string(j) + " coincide within tolerance",
                           i, j, ei, ej);
}

}  // namespace

GapMatrix build_theta(const DiagonalMatrix& d, double degeneracy_tol) {
  const std::size_t n = d.size();
  const double thresh = degeneracy_threshold(d, degeneracy_tol);
  DenseMatrix theta(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const cdouble gap = d.d[i] - d.d[j];
      if (std::abs(gap) <= thresh) throw_degenerate(i, j, d.d[i], d.d[j]);
      theta(i, j) = 1.0 / gap;
    }
  return GapMatrix{std::move(theta)};
}

GapRow build_gap_row(const DiagonalMatrix& d, std::size_t n, double degeneracy_tol) {
  if (n >= d.size()) throw ShapeError("build_gap_row: row out of range");
  const double thresh = degeneracy_threshold(d, degeneracy_tol);
  GapRow row;
  row.row = n;
  row.inv_gaps.assign(d.size(), cdouble{});
  for (std::size_t m = 0; m < d.size(); ++m) {
    if (m == n) continue;
    const cdouble gap = d.d[n] - d.d[m];
    if (std::abs(gap) <= thresh) throw_degenerate(n, m, d.d[n], d.d[m]);
    row.inv_gaps[m] = 1.0 / gap;
  }
  return row;
}

PartitionedProblem build_two_by_two(cdouble lambda) {
  DiagonalMatrix d{{cdouble{0.0, 0.0}, cdouble{1.0, 0.0}}};
  DenseMatrix delta(2, 2);
  delta(0, 1) = 1.0;
  delta(1, 0) = 1.0;
  return make_problem(std::move(d), std::move(delta), lambda);
}

PartitionedProblem build_three_by_three(cdouble lambda) {
  DiagonalMatrix d{{cdouble{0.0, 0.0}, cdouble{1.0, 0.0}, cdouble{3.0, 0.0}}};
  DenseMatrix delta(3, 3);
  delta(0, 1) = 1.0;
  delta(0, 2) = 2.0;
  delta(1, 0) = 1.0;
  delta(1, 2) = 3.0;
  delta(2, 0) = 2.0;
  delta(2, 1) = 3.0;
  return make_problem(std::move(d), std::move(delta), lambda);
}

PartitionedProblem build_oscillator(std::size_t n_basis) {
  if (n_basis == 0) throw ShapeError("build_oscillator: empty basis");
  std::vector<cdouble> eps(n_basis);
  std::vector<double> phi(n_basis);
  phi[0] = std::pow(std::numbers::pi, -0.25);
  for (std::size_t n = 1; n < n_basis; ++n)
    phi[n] = -phi[n - 1] * std::sqrt((2.0 * double(n) - 1.0) / (2.0 * double(n)));
  for (std::size_t n = 0; n < n_basis; ++n) eps[n] = 2.0 * double(n) + 0.5;
  DenseMatrix delta(n_basis, n_basis);
  for (std::size_t n = 0; n < n_basis; ++n)
    for (std::size_t m = 0; m < n_basis; ++m) delta(n, m) = phi[n] * phi[m];
  return make_problem(DiagonalMatrix{std::move(eps)}, std::move(delta),
                      cdouble{1.0, 0.0});
}

PartitionedProblem build_random_uniform(std::size_t n, std::uint64_t seed) {
  Rng rng = Rng::stream(seed, "random-uniform");
  std::vector<cdouble> eps(n);
  for (std::size_t i = 0; i < n; ++i) eps[i] = double(i + 1);
  DenseMatrix delta(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) delta(i, j) = rng.uniform(-1.0, 1.0);
  return make_problem(DiagonalMatrix{std::move(eps)}, std::move(delta),
                      cdouble{1.0, 0.0});
}

SparseMatrix build_er_laplacian(std::size_t n, std::uint64_t seed) {
  if (n < 3) throw ShapeError("build_er_laplacian: need at least 3 vertices");
  Rng rng = Rng::stream(seed, "er-laplacian");
  // n distinct unordered pairs, uniform without replacement (rejection on a
  // hash set; the pair space has n(n-1)/2 >= 3 elements so this terminates).
  std::unordered_set<std::uint64_t> picked;
  picked.reserve(n * 2);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  edges.reserve(n);
  while (edges.size() < n) {
    std::size_t i = static_cast<std::size_t>(rng.uniform_below(n));
    std::size_t j = static_cast<std::size_t>(rng.uniform_below(n));
    if (i == j) continue;
    if (i < j) std::swap(i, j);
    const std::uint64_t key = std::uint64_t(i) * std::uint64_t(n) + std::uint64_t(j);
    if (!picked.insert(key).second) continue;
    edges.emplace_back(i, j);
  }
  std::vector<double> degree(n, 0.0);
  std::vector<SparseMatrix::Triplet> trips;
  trips.reserve(3 * n);
  for (const auto& [i, j] : edges) {
    degree[i] += 1.0;
    degree[j] += 1.0;
    trips.push_back({i, j, cdouble{-1.0, 0.0}});
    trips.push_back({j, i, cdouble{-1.0, 0.0}});
  }
  for (std::size_t i = 0; i < n; ++i)
    if (degree[i] != 0.0) trips.push_back({i, i, cdouble{degree[i], 0.0}});
  return SparseMatrix::from_triplets(n, n, std::move(trips));
}

PartitionedProblem build_er_perturbed_oscillator(std::size_t n, std::uint64_t seed,
                                                 cdouble lambda) {
  const SparseMatrix lap = build_er_laplacian(n, seed);
  std::vector<cdouble> eps(n);
  for (std::size_t i = 0; i < n; ++i)
    eps[i] = 2.0 * double(i) + 0.5 + lambda * lap.at(i, i);
  std::vector<SparseMatrix::Triplet> trips;
  trips.reserve(lap.nnz());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = lap.row_offsets()[i]; p < lap.row_offsets()[i + 1]; ++p)
      if (lap.col_indices()[p] != i)
        trips.push_back({i, lap.col_indices()[p], lambda * lap.values()[p]});
  SparseMatrix delta = SparseMatrix::from_triplets(n, n, std::move(trips));
  return make_problem(DiagonalMatrix{std::move(eps)}, std::move(delta),
                      cdouble{1.0, 0.0});
}

PartitionedProblem build_uniform_perturbed_oscillator(std::size_t n, std::uint64_t seed,
                                                      cdouble lambda, double scale) {
  Rng rng = Rng::stream(seed, "uniform-oscillator");
  std::vector<cdouble> eps(n);
  DenseMatrix delta(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double r = rng.uniform(-scale, scale);
      if (i == j)
        eps[i] = 2.0 * double(i) + 0.5 + lambda * r;
      else
        delta(i, j) = lambda * r;
    }
  return make_problem(DiagonalMatrix{std::move(eps)}, std::move(delta),
                      cdouble{1.0, 0.0});
}

}  // namespace dynspec
