#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dynspec/dpt.hpp"
#include "dynspec/matrix.hpp"
#include "dynspec/partition.hpp"

namespace dynspec {

/// Radius of the lambda-disk on which the map is a guaranteed contraction:
/// (3 - 2 sqrt(2)) / (|theta| |Delta|) in spectral norms, roughly
/// 0.17 / (|theta| |Delta|). Inside it the iteration cannot escape the ball
/// of radius sqrt(2) around the identity.
double guaranteed_radius(const GapMatrix& theta, const MatrixVariant& delta);

struct ScanGrid {
  double re_min = -1.0;
  double re_max = 1.0;
  double im_min = -1.0;
  double im_max = 1.0;
  std::size_t res_re = 100;
  std::size_t res_im = 100;
};

/// Midpoint for a single-sample axis, inclusive endpoints otherwise.
double grid_coordinate(double lo, double hi, std::size_t res, std::size_t i);

enum class CellClass : std::uint8_t {
  Converged = 0,
  BoundedNonConverged = 1,
  Diverged = 2,
};

std::string to_string(CellClass c);

struct DomainGrid {
  ScanGrid grid;
  std::vector<CellClass> classes;       // row-major, im index major
  std::vector<std::int32_t> iterations;

  std::size_t index(std::size_t i_im, std::size_t j_re) const {
    return i_im * grid.res_re + j_re;
  }
  double re_at(std::size_t j) const {
    return grid_coordinate(grid.re_min, grid.re_max, grid.res_re, j);
  }
  double im_at(std::size_t i) const {
    return grid_coordinate(grid.im_min, grid.im_max, grid.res_im, i);
  }
};

struct ScanMode {
  enum class Kind { Full, SingleRow };
  Kind kind = Kind::Full;
  std::size_t row = 0;      // chart row for SingleRow scans
  double ramp_alpha = 0.0;  // > 0 switches to the nonautonomous schedule
};

/// Classifies every grid cell by running the iteration at that lambda.
/// Orbits that hit the iteration budget without settling are reported as
/// BoundedNonConverged. threads = 0 uses the hardware concurrency; the
/// output is identical for any thread count.
DomainGrid scan_domain(const PartitionedProblem& base, const ScanGrid& grid,
                       const ScanMode& mode = {}, const IterationOptions& opts = {},
                       unsigned threads = 0);

struct BifurcationSample {
  double lambda = 0.0;
  std::vector<cdouble> values;  // empty when the orbit escaped
};

/// Real-lambda orbit diagram for one coordinate of the row map: per sample,
/// iterate `transient` steps from the chart start, then record the
/// coordinate for `keep` further steps.
std::vector<BifurcationSample> bifurcation_scan(
    const PartitionedProblem& base, std::size_t row, std::size_t coord,
    double lambda_lo, double lambda_hi, std::size_t samples, int transient,
    int keep, const IterationOptions& opts = {});

/// Bivariate polynomial P(lambda, mu) with integer coefficients, stored as
/// explicit terms. P vanishes when mu is a multiplier of a fixed point of
/// the corresponding row map, so its unit-circle mu-slice projects onto the
/// stability boundary in the lambda plane.
struct BoundaryPolynomial {
  struct Term {
    double c;
    int dl;  // power of lambda
    int dm;  // power of mu
  };
  std::string name;
  std::vector<Term> terms;
};

cdouble eval_boundary_poly(const BoundaryPolynomial& b, cdouble lambda, cdouble mu);

/// Largest monomial magnitude at (lambda, mu), floored at 1; used to
/// normalize residuals of eval_boundary_poly.
double boundary_poly_scale(const BoundaryPolynomial& b, cdouble lambda, cdouble mu);

/// P(lambda, mu) = 4 lambda^2 + 2 mu - mu^2, the curve of the symmetric
/// off-diagonal 2x2 fixture (any row).
const BoundaryPolynomial& boundary_curve_2x2();

/// Degree-7 curves of the 3x3 fixture; n is the 1-based row index.
const BoundaryPolynomial& boundary_poly_3x3(int n);

enum class FixtureKind { TwoByTwo, ThreeByThree };

/// All affine fixed points of the row map of a fixture at the given lambda,
/// as full chart-normalized vectors. The 2x2 case solves the scalar
/// quadratic directly; the 3x3 case runs a deterministic multi-start Newton
/// search on the chart system.
std::vector<std::vector<cdouble>> fixture_fixed_points(FixtureKind kind,
                                                       std::size_t row,
                                                       cdouble lambda);

struct CurveValidation {
  double max_residual = 0.0;          // max over samples of the per-sample value
  std::vector<double> residuals;      // per sample: min over (fixed point, mu)
  std::size_t evaluated = 0;
  std::size_t skipped = 0;            // samples with no fixed point found
};

/// Evaluates the fixture's boundary polynomial on every multiplier of every
/// located fixed point; per sample keeps the smallest normalized residual.
CurveValidation validate_multiplier_curve(FixtureKind kind, std::size_t row,
                                          std::span<const cdouble> lambdas);

/// Binary PPM rendering: converged cells black, bounded cells grey,
/// divergent cells on a light-to-dark gradient (darker = slower escape).
/// Overlay marks the nearest cell of each given lambda in red.
void render_domain(const DomainGrid& g, const std::string& ppm_path,
                   std::span<const cdouble> overlay = {});

void write_domain_csv(const DomainGrid& g, const std::string& csv_path);
DomainGrid read_domain_csv(const std::string& csv_path);

}  // namespace dynspec
