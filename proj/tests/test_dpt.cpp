#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "dynspec/dpt.hpp"
#include "dynspec/matrix.hpp"
#include "dynspec/partition.hpp"
#include "dynspec/rng.hpp"
#include "oracles.hpp"

using namespace dynspec;

namespace {

// Closed-form eigenvalues of the two-level fixture at real or complex lambda:
// (1 -+ sqrt(1 + 4 lambda^2)) / 2.
std::pair<cdouble, cdouble> two_level_eigen(cdouble lambda) {
  const cdouble s = std::sqrt(cdouble{1.0, 0.0} + 4.0 * lambda * lambda);
  return {(cdouble{1.0, 0.0} - s) * 0.5, (cdouble{1.0, 0.0} + s) * 0.5};
}

PartitionedProblem random_problem(std::size_t n, std::uint64_t seed, cdouble lambda) {
  auto p = build_random_uniform(n, seed);
  p.lambda = lambda;
  return p;
}

}  // namespace

TEST_SUITE("dpt") {

TEST_CASE("first full step from the identity") {
  const cdouble lambda{0.3, 0.0};
  const auto p = build_two_by_two(lambda);
  const auto theta = build_theta(p.d);
  const auto a1 = step_full(DenseMatrix::identity(2), theta, p.delta_t, lambda);
  CHECK(a1(0, 0) == cdouble{1.0, 0.0});
  CHECK(a1(1, 1) == cdouble{1.0, 0.0});
  CHECK(std::abs(a1(0, 1) - cdouble{-0.3, 0.0}) < 1e-16);
  CHECK(std::abs(a1(1, 0) - cdouble{0.3, 0.0}) < 1e-16);
}

TEST_CASE("unit diagonal is exact, not approximate") {
  auto p = random_problem(5, 17, cdouble{0.05, 0.02});
  const auto theta = build_theta(p.d);
  DenseMatrix a = DenseMatrix::identity(5);
  for (int k = 0; k < 50; ++k) {
    a = step_full(a, theta, p.delta_t, p.lambda);
    for (std::size_t i = 0; i < 5; ++i) CHECK(a(i, i) == cdouble{1.0, 0.0});
  }
}

TEST_CASE("chart rows evolve independently") {
  auto p = random_problem(4, 23, cdouble{0.04, -0.01});
  const auto theta = build_theta(p.d);

  DenseMatrix a = DenseMatrix::identity(4);
  std::vector<std::vector<cdouble>> rows(4);
  for (std::size_t n = 0; n < 4; ++n)
    rows[n] = std::vector<cdouble>(a.row(n).begin(), a.row(n).end());

  for (int k = 0; k < 6; ++k) {
    a = step_full(a, theta, p.delta_t, p.lambda);
    for (std::size_t n = 0; n < 4; ++n) {
      rows[n] = step_single(rows[n], n, theta, p.delta, p.lambda);
      for (std::size_t m = 0; m < 4; ++m)
        CHECK(std::abs(rows[n][m] - a(n, m)) < 1e-14);
    }
  }
}

TEST_CASE("two-level fixed point matches the closed form") {
  const cdouble lambda{0.3, 0.0};
  const auto rep = iterate_full(build_two_by_two(lambda));
  REQUIRE(rep.status == ConvergenceStatus::Converged);
  const auto [lo, hi] = two_level_eigen(lambda);
  CHECK(std::abs(rep.eigenvalues[0] - lo) < 1e-12);
  CHECK(std::abs(rep.eigenvalues[1] - hi) < 1e-12);

  // Chart entries are the scalar-map fixed points.
  const double root = std::sqrt(1.0 + 4.0 * 0.09);
  const double xstar = (1.0 - root) / 0.6;
  CHECK(std::abs(rep.state.a(0, 1) - cdouble{xstar, 0.0}) < 1e-12);
  CHECK(std::abs(rep.state.a(1, 0) - cdouble{-xstar, 0.0}) < 1e-12);
  for (double r : rep.residuals) CHECK(r < 1e-10);
  CHECK(rep.step_norm < 1e-12);
  CHECK(rep.iterations > 1);
}

TEST_CASE("zero coupling converges in one step") {
  const auto rep = iterate_full(build_two_by_two(cdouble{}));
  REQUIRE(rep.status == ConvergenceStatus::Converged);
  CHECK(rep.iterations == 1);
  CHECK(rep.eigenvalues[0] == cdouble{});
  CHECK(rep.eigenvalues[1] == cdouble{1.0, 0.0});
}

TEST_CASE("escaping orbit is flagged divergent") {
  const auto rep = iterate_full(build_two_by_two(cdouble{2.0, 0.0}));
  CHECK(rep.status == ConvergenceStatus::Diverged);
  CHECK(rep.iterations < 10000);
  CHECK_FALSE(all_finite(rep.eigenvalues));
}

TEST_CASE("period-two orbit is flagged bounded, and the window can be disabled") {
  // Just past the period-doubling coupling sqrt(3)/2 the scalar factor map
  // has an attracting 2-cycle.
  const auto p = build_two_by_two(cdouble{0.88, 0.0});
  const auto rep = iterate_full(p);
  CHECK(rep.status == ConvergenceStatus::BoundedNonConverged);
  CHECK(rep.iterations < 10000);

  IterationOptions opts;
  opts.cycle_window = 0;
  opts.max_iter = 500;
  const auto rep2 = iterate_full(p, opts);
  CHECK(rep2.status == ConvergenceStatus::MaxIterations);
  CHECK(rep2.iterations == 500);
}

TEST_CASE("budget exhaustion reports MaxIterations with finite state") {
  IterationOptions opts;
  opts.max_iter = 3;
  const auto rep = iterate_full(build_two_by_two(cdouble{0.3, 0.0}), opts);
  CHECK(rep.status == ConvergenceStatus::MaxIterations);
  CHECK(rep.iterations == 3);
  CHECK(all_finite(rep.state.a));
  CHECK(all_finite(rep.eigenvalues));
}

TEST_CASE("convergence requires the residual gate, not just small steps") {
  IterationOptions opts;
  opts.residual_tol = 0.0;  // unattainable
  opts.max_iter = 300;
  const auto rep = iterate_full(build_two_by_two(cdouble{0.3, 0.0}), opts);
  CHECK(rep.status == ConvergenceStatus::MaxIterations);
  CHECK(rep.step_norm < 1e-12);  // steps did settle; the residual gate held
}

TEST_CASE("trace sink sees every iteration") {
  std::vector<int> ks;
  std::vector<double> steps, resids;
  TraceSink sink = [&](int k, double s, double r) {
    ks.push_back(k);
    steps.push_back(s);
    resids.push_back(r);
  };
  const auto rep = iterate_full(build_two_by_two(cdouble{0.3, 0.0}), {}, sink);
  REQUIRE(rep.status == ConvergenceStatus::Converged);
  REQUIRE(int(ks.size()) == rep.iterations);
  for (std::size_t i = 0; i < ks.size(); ++i) CHECK(ks[i] == int(i) + 1);
  CHECK(resids.back() < 1e-10);
  CHECK(steps.back() < 1e-12);
}

TEST_CASE("eigenvalue read-off from a chart row") {
  const cdouble lambda{0.3, 0.0};
  const auto p = build_two_by_two(lambda);
  const double root = std::sqrt(1.0 + 4.0 * 0.09);
  const std::vector<cdouble> z = {cdouble{1.0, 0.0}, cdouble{(1.0 - root) / 0.6, 0.0}};
  const cdouble got = eigenvalue_of(z, 0, p.d, p.delta, lambda);
  CHECK(std::abs(got - two_level_eigen(lambda).first) < 1e-14);
}

TEST_CASE("fixed iteration counts match the scalar orbit") {
  const cdouble lambda{0.21, 0.0};
  const auto p = build_two_by_two(lambda);
  const auto a1 = iterate_fixed(p, 1, lambda);
  CHECK(std::abs(a1(0, 1) - cdouble{-0.21, 0.0}) < 1e-16);
  const auto a2 = iterate_fixed(p, 2, lambda);
  // f(f(0)) for f(x) = lambda (x^2 - 1): lambda^3 - lambda.
  const double want = 0.21 * 0.21 * 0.21 - 0.21;
  CHECK(std::abs(a2(0, 1) - cdouble{want, 0.0}) < 1e-15);
  CHECK(std::abs(a2(1, 0) - cdouble{-want, 0.0}) < 1e-15);
}

TEST_CASE("ramped schedule with alpha 0 shifts the autonomous run by one step") {
  const auto p = build_two_by_two(cdouble{0.3, 0.0});
  const auto plain = iterate_full(p);
  const auto ramped = iterate_ramped(p, 0.0);
  REQUIRE(plain.status == ConvergenceStatus::Converged);
  REQUIRE(ramped.status == ConvergenceStatus::Converged);
  CHECK(ramped.iterations == plain.iterations + 1);
  CHECK(std::abs(ramped.eigenvalues[0] - plain.eigenvalues[0]) < 1e-14);
  CHECK(std::abs(ramped.eigenvalues[1] - plain.eigenvalues[1]) < 1e-14);
}

TEST_CASE("ramped schedule converges to the same fixed point") {
  const auto p = build_two_by_two(cdouble{0.3, 0.0});
  const auto plain = iterate_full(p);
  const auto ramped = iterate_ramped(p, 0.7);
  REQUIRE(ramped.status == ConvergenceStatus::Converged);
  CHECK(max_abs_diff(ramped.state.a, plain.state.a) < 1e-10);
  CHECK(ramped.iterations > plain.iterations);  // schedule spends steps settling
  CHECK_THROWS_AS((void)iterate_ramped(p, 1.0), std::invalid_argument);
  CHECK_THROWS_AS((void)iterate_ramped(p, -0.1), std::invalid_argument);
}

TEST_CASE("single-row iteration matches the scalar factor map") {
  const cdouble lambda{0.3, 0.0};
  const auto p = build_two_by_two(lambda);
  const auto rep = iterate_single(p, 0);
  REQUIRE(rep.status == ConvergenceStatus::Converged);
  const double root = std::sqrt(1.0 + 4.0 * 0.09);
  CHECK(std::abs(rep.z[0] - cdouble{1.0, 0.0}) == 0.0);
  CHECK(std::abs(rep.z[1] - cdouble{(1.0 - root) / 0.6, 0.0}) < 1e-12);
  CHECK(std::abs(rep.eigenvalue - two_level_eigen(lambda).first) < 1e-12);
  CHECK(rep.residual < 1e-10);

  CHECK(oracles::scalar_map_fate(cdouble{0.3, 0.0}) ==
        oracles::ScalarFate::Converged);

  // Divergence and bounded classification carry over.
  CHECK(iterate_single(build_two_by_two(cdouble{2.0, 0.0}), 0).status ==
        ConvergenceStatus::Diverged);
  CHECK(iterate_single(build_two_by_two(cdouble{0.88, 0.0}), 0).status ==
        ConvergenceStatus::BoundedNonConverged);
}

TEST_CASE("single-row iteration agrees with the full map row") {
  auto p = random_problem(5, 31, cdouble{0.03, 0.01});
  const auto full = iterate_full(p);
  REQUIRE(full.status == ConvergenceStatus::Converged);
  for (std::size_t n = 0; n < 5; ++n) {
    const auto rep = iterate_single(p, n);
    REQUIRE(rep.status == ConvergenceStatus::Converged);
    CHECK(std::abs(rep.eigenvalue - full.eigenvalues[n]) < 1e-10);
    for (std::size_t m = 0; m < 5; ++m)
      CHECK(std::abs(rep.z[m] - full.state.a(n, m)) < 1e-9);
  }
}

TEST_CASE("dominant eigenpair on a diagonal problem stops immediately") {
  const DiagonalMatrix d(std::vector<cdouble>{{0, 0}, {1, 0}, {3, 0}});
  const auto p = make_problem(d, MatrixVariant{DenseMatrix(3, 3)}, cdouble{1.0, 0.0});
  const auto rep = dominant_eigenpair(p);
  REQUIRE(rep.status == ConvergenceStatus::Converged);
  CHECK(rep.row == 2);
  CHECK(rep.iterations == 1);
  CHECK(std::abs(rep.eigenvalue - cdouble{3.0, 0.0}) == 0.0);
  CHECK(std::abs(vec_two_norm(rep.z_unit) - 1.0) < 1e-14);
}

TEST_CASE("dominant eigenpair rejects an ambiguous top level") {
  const DiagonalMatrix d(std::vector<cdouble>{{0, 0}, {2, 0}, {2 + 1e-15, 0}});
  const auto p = make_problem(d, MatrixVariant{DenseMatrix(3, 3)}, cdouble{1.0, 0.0});
  CHECK_THROWS_AS((void)dominant_eigenpair(p), DegenerateSpectrum);
}

TEST_CASE("dominant eigenpair matches a power-iteration oracle") {
  auto p = build_oscillator(40);
  p.lambda = cdouble{0.5, 0.0};
  const auto rep = dominant_eigenpair(p);
  REQUIRE(rep.status == ConvergenceStatus::Converged);
  CHECK(rep.row == 39);
  CHECK(rep.residual < 1e-10);
  CHECK(std::abs(vec_two_norm(rep.z_unit) - 1.0) < 1e-12);

  // Real symmetric M = D + lambda Delta; plain power iteration dominates.
  const auto delta = densify(p.delta);
  oracles::RealCsr m;
  m.offsets.push_back(0);
  for (std::size_t i = 0; i < 40; ++i) {
    m.diag.push_back(p.d.d[i].real());
    for (std::size_t j = 0; j < 40; ++j) {
      m.cols.push_back(j);
      m.vals.push_back(0.5 * delta(i, j).real());
    }
    m.offsets.push_back(m.cols.size());
  }
  const auto power = oracles::shifted_power_iteration(m, 0.0, 20000);
  CHECK(std::abs(rep.eigenvalue.real() - power.eigenvalue) < 1e-8);
  CHECK(std::abs(rep.eigenvalue.imag()) < 1e-10);
}

TEST_CASE("row-map jacobian matches central differences and pins its row") {
  auto p = random_problem(4, 37, cdouble{0.07, 0.02});
  const auto theta = build_theta(p.d);
  const std::size_t n = 1;

  Rng rng = Rng::stream(37, "test-jac");
  std::vector<cdouble> z(4);
  for (auto& v : z) v = cdouble{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
  z[n] = cdouble{1.0, 0.0};

  const auto j = jacobian_single(z, n, theta, p.delta, p.lambda);
  REQUIRE(j.rows() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(j(n, k) == cdouble{});

  const double h = 1e-6;
  for (std::size_t k = 0; k < 4; ++k) {
    auto zp = z, zm = z;
    zp[k] += cdouble{h, 0.0};
    zm[k] -= cdouble{h, 0.0};
    const auto fp = step_single(zp, n, theta, p.delta, p.lambda);
    const auto fm = step_single(zm, n, theta, p.delta, p.lambda);
    for (std::size_t m = 0; m < 4; ++m) {
      const cdouble fd = (fp[m] - fm[m]) / (2.0 * h);
      CHECK(std::abs(j(m, k) - fd) < 1e-7);
    }
  }
}

TEST_CASE("reduced jacobian drops the pinned direction") {
  DenseMatrix j(3, 3);
  int v = 1;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t k = 0; k < 3; ++k) j(i, k) = double(v++);
  const auto r = reduced_jacobian(j, 1);
  REQUIRE(r.rows() == 2);
  REQUIRE(r.cols() == 2);
  CHECK(r(0, 0) == cdouble{1.0, 0.0});
  CHECK(r(0, 1) == cdouble{3.0, 0.0});
  CHECK(r(1, 0) == cdouble{7.0, 0.0});
  CHECK(r(1, 1) == cdouble{9.0, 0.0});
}

TEST_CASE("multipliers of the two-level attractor match the scalar derivative") {
  const cdouble lambda{0.8, 0.0};
  const auto p = build_two_by_two(lambda);
  const auto rep = iterate_single(p, 0);
  REQUIRE(rep.status == ConvergenceStatus::Converged);
  const auto theta = build_theta(p.d);
  const auto j = jacobian_single(rep.z, 0, theta, p.delta, lambda);
  const auto mu = multipliers(reduced_jacobian(j, 0));
  REQUIRE(mu.size() == 1);
  CHECK(std::abs(mu[0] - oracles::scalar_attracting_multiplier(cdouble{0.8, 0.0})) <
        1e-10);

  DenseMatrix too_big(9, 9);
  CHECK_THROWS_AS((void)multipliers(too_big), ShapeError);
}

TEST_CASE("staged continuation reaches couplings the direct map cannot") {
  const auto p = build_two_by_two(cdouble{1.2, 0.0});
  const auto direct = iterate_full(p);
  CHECK(direct.status != ConvergenceStatus::Converged);

  const auto hom = homotopy_solve(p, 4);
  REQUIRE(hom.status == ConvergenceStatus::Converged);
  const auto [lo, hi] = two_level_eigen(cdouble{1.2, 0.0});
  CHECK(std::abs(hom.eigenvalues[0] - lo) < 1e-9);
  CHECK(std::abs(hom.eigenvalues[1] - hi) < 1e-9);
  for (double r : hom.residuals) CHECK(r < 1e-9);

  CHECK_THROWS_AS((void)homotopy_solve(p, 0), std::invalid_argument);
}

TEST_CASE("single-stage continuation agrees with the direct solve") {
  const auto p = build_two_by_two(cdouble{0.3, 0.0});
  const auto direct = iterate_full(p);
  const auto hom = homotopy_solve(p, 1);
  REQUIRE(hom.status == ConvergenceStatus::Converged);
  CHECK(std::abs(hom.eigenvalues[0] - direct.eigenvalues[0]) < 1e-12);
  CHECK(std::abs(hom.eigenvalues[1] - direct.eigenvalues[1]) < 1e-12);
  CHECK(max_abs_diff(hom.state.a, direct.state.a) < 1e-10);
}

}  // TEST_SUITE
