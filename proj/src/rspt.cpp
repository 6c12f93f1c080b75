#include "dynspec/rspt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dynspec {

namespace {

std::vector<cdouble> diagonal_of_dense(const DenseMatrix& m) {
  std::vector<cdouble> d(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) d[i] = m(i, i);
  return d;
}

// a_l = theta .* (p - sum_{s=0}^{l-1} diag_s |> a_{l-1-s}), evaluated row by
// row so the subtracted products never materialize.
DenseMatrix next_coefficient(const GapMatrix& theta, const DenseMatrix& p,
                             const std::vector<DenseMatrix>& coeffs,
                             const std::vector<std::vector<cdouble>>& diags,
                             int l) {
  const std::size_t n = p.rows();
  DenseMatrix out(n, n);
  std::vector<cdouble> row(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < n; ++m) row[m] = p(i, m);
    for (int s = 0; s < l; ++s) {
      const cdouble scale = diags[std::size_t(s)][i];
      if (scale == cdouble{}) continue;
      const auto past = coeffs[std::size_t(l - 1 - s)].row(i);
      for (std::size_t m = 0; m < n; ++m) row[m] -= scale * past[m];
    }
    for (std::size_t m = 0; m < n; ++m)
      out(i, m) = theta.theta(i, m) * row[m];
  }
  return out;
}

double series_residual(const DiagonalMatrix& d, cdouble lambda,
                       const DenseMatrix& s, const DenseMatrix& p) {
  const std::size_t n = s.rows();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const cdouble eps = d.d[i] + lambda * p(i, i);
    double num = 0.0;
    double den = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      const cdouble r = (d.d[m] - eps) * s(i, m) + lambda * p(i, m);
      num = std::max(num, std::abs(r));
      den = std::max(den, std::abs(s(i, m)));
    }
    worst = std::max(worst, num / std::max(den, 1e-300));
  }
  return worst;
}

}  // namespace

RSExpansion rs_coefficients(const PartitionedProblem& p, int order) {
  if (order < 0)
    throw std::invalid_argument("rs_coefficients: negative order");
  const GapMatrix theta = build_theta(p.d);
  const std::size_t n = p.size();

  RSExpansion e;
  e.d = p.d;
  e.coefficients.reserve(std::size_t(order) + 1);
  e.coefficients.push_back(DenseMatrix::identity(n));
  e.eigencorrections.reserve(std::size_t(order));

  for (int l = 1; l <= order; ++l) {
    const DenseMatrix prod = matmul(e.coefficients[std::size_t(l - 1)], p.delta_t);
    e.eigencorrections.push_back(diagonal_of_dense(prod));
    e.coefficients.push_back(
        next_coefficient(theta, prod, e.coefficients, e.eigencorrections, l));
  }
  return e;
}

RSValue rs_partial_sum(const RSExpansion& e, cdouble lambda) {
  const int k = e.order();
  if (k < 0) throw ShapeError("rs_partial_sum: empty expansion");
  const std::size_t n = e.coefficients[0].rows();

  RSValue v;
  v.a = e.coefficients[std::size_t(k)];
  for (int l = k - 1; l >= 0; --l) {
    cdouble* cur = v.a.data();
    const cdouble* lo = e.coefficients[std::size_t(l)].data();
    const std::size_t count = n * n;
    for (std::size_t i = 0; i < count; ++i) cur[i] = lambda * cur[i] + lo[i];
  }

  v.eigenvalues.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    cdouble acc{};
    for (int l = k; l >= 1; --l)
      acc = e.eigencorrections[std::size_t(l - 1)][i] + lambda * acc;
    v.eigenvalues[i] = e.d.d[i] + lambda * acc;
  }
  return v;
}

double truncation_agreement(const PartitionedProblem& p, int order,
                            cdouble lambda) {
  const DenseMatrix mapped = iterate_fixed(p, order, lambda);
  const RSValue series = rs_partial_sum(rs_coefficients(p, order), lambda);
  return max_abs_diff(mapped, series.a);
}

OrderComparison compare_orders(const PartitionedProblem& p, cdouble lambda,
                               double tol, const CompareOptions& copts,
                               const IterationOptions& dopts) {
  if (!(tol > 0.0)) throw std::invalid_argument("compare_orders: tol must be positive");
  OrderComparison out;

  {
    PartitionedProblem q = p;
    q.lambda = lambda;
    IterationOptions opts = dopts;
    opts.tol = tol;
    opts.residual_tol = copts.residual_factor * tol;
    const ConvergenceReport rep = iterate_full(q, opts);
    out.k_d = rep.iterations;
    out.d_converged = rep.status == ConvergenceStatus::Converged;
  }

  const GapMatrix theta = build_theta(p.d);
  const std::size_t n = p.size();
  const double residual_tol = copts.residual_factor * tol;

  std::vector<DenseMatrix> coeffs;
  std::vector<std::vector<cdouble>> diags;
  coeffs.push_back(DenseMatrix::identity(n));
  DenseMatrix sum = coeffs[0];

  cdouble lampow{1.0, 0.0};
  double runmin = std::numeric_limits<double>::infinity();
  int blowups = 0;

  out.k_rs = copts.rs_max_order;
  for (int l = 1; l <= copts.rs_max_order; ++l) {
    const DenseMatrix prod = matmul(coeffs[std::size_t(l - 1)], p.delta_t);
    diags.push_back(diagonal_of_dense(prod));
    coeffs.push_back(next_coefficient(theta, prod, coeffs, diags, l));

    lampow *= lambda;
    const DenseMatrix& al = coeffs.back();
    {
      cdouble* sd = sum.data();
      const cdouble* ad = al.data();
      const std::size_t count = n * n;
      for (std::size_t i = 0; i < count; ++i) sd[i] += lampow * ad[i];
    }
    const double step = std::abs(lampow) * max_abs(al);

    if (!std::isfinite(step)) {
      out.k_rs = l;
      return out;
    }
    if (step < tol) {
      const DenseMatrix pm = matmul(sum, p.delta_t);
      if (series_residual(p.d, lambda, sum, pm) < residual_tol) {
        out.k_rs = l;
        out.rs_converged = true;
        return out;
      }
    }
    // Exactly zero increments (parity gaps in symmetric problems) say
    // nothing about growth; only positive increments feed the detector.
    if (step > 0.0) {
      if (std::isfinite(runmin) && step > copts.rs_blowup_factor * runmin) {
        if (++blowups >= copts.rs_blowup_run) {
          out.k_rs = l;
          return out;
        }
      } else {
        blowups = 0;
      }
      runmin = std::min(runmin, step);
    }
  }
  return out;
}

}  // namespace dynspec
