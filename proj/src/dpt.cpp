#include "dynspec/dpt.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <limits>
#include <stdexcept>
#include <utility>
#include <variant>

#include "dynspec/roots.hpp"

namespace dynspec {

namespace {

constexpr double kTinyDen = 1e-300;

// Per-row eigenpair residuals for a full iterate, reusing p = a * delta_t.
// eps_i = d_i + lambda p_ii; the row residual is the inf-norm of
// (M - eps_i I) applied to row i, relative to the row's largest entry.
double residuals_of(const DiagonalMatrix& d, cdouble lambda, const DenseMatrix& a,
                    const DenseMatrix& p, std::vector<cdouble>& eig,
                    std::vector<double>& res) {
  const std::size_t n = a.rows();
  eig.resize(n);
  res.resize(n);
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const cdouble eps = d.d[i] + lambda * p(i, i);
    eig[i] = eps;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      const cdouble r = (d.d[m] - eps) * a(i, m) + lambda * p(i, m);
      num = std::max(num, std::abs(r));
      den = std::max(den, std::abs(a(i, m)));
    }
    res[i] = num / std::max(den, kTinyDen);
    worst = std::max(worst, res[i]);
  }
  return worst;
}

// Residual of a single chart row, reusing w = delta * z.
double residual_single(const DiagonalMatrix& d, cdouble lambda,
                       std::span<const cdouble> z, std::span<const cdouble> w,
                       cdouble eps) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t m = 0; m < z.size(); ++m) {
    const cdouble r = (d.d[m] - eps) * z[m] + lambda * w[m];
    num = std::max(num, std::abs(r));
    den = std::max(den, std::abs(z[m]));
  }
  return num / std::max(den, kTinyDen);
}

bool within_tol(const DenseMatrix& a, const DenseMatrix& b, double tol) {
  const cdouble* pa = a.data();
  const cdouble* pb = b.data();
  const std::size_t total = a.rows() * a.cols();
  for (std::size_t i = 0; i < total; ++i) {
    const double dr = pa[i].real() - pb[i].real();
    const double di = pa[i].imag() - pb[i].imag();
    if (std::abs(dr) >= tol || std::abs(di) >= tol) return false;
  }
  return true;
}

bool within_tol(std::span<const cdouble> a, std::span<const cdouble> b, double tol) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double dr = a[i].real() - b[i].real();
    const double di = a[i].imag() - b[i].imag();
    if (std::abs(dr) >= tol || std::abs(di) >= tol) return false;
  }
  return true;
}

// Bound the look-back buffer to roughly 64 MB; a window too short to hold a
// period-2 revisit disables cycle detection entirely.
int effective_window(int requested, std::size_t n) {
  if (requested <= 0) return 0;
  const double entries = double(n) * double(n);
  const double cap = 4.0e6 / std::max(entries, 1.0);
  int win = requested;
  if (cap < win) win = int(cap);
  return win < 2 ? 0 : win;
}

ConvergenceReport run_full(const PartitionedProblem& p, const IterationOptions& opts,
                           bool ramped, double alpha, const TraceSink& trace) {
  const std::size_t n = p.size();
  const GapMatrix theta = build_theta(p.d, opts.degeneracy_tol);
  const cdouble lam = p.lambda;
  const double cycle_margin = 1e3 * opts.tol;

  DenseMatrix a = DenseMatrix::identity(n);
  DenseMatrix pmat = matmul(a, p.delta_t);

  const int win = effective_window(opts.cycle_window, n);
  std::deque<DenseMatrix> window;  // previous iterates, most recent first

  ConvergenceReport rep;
  std::vector<cdouble> eig;
  std::vector<double> res;

  auto finish = [&](DenseMatrix af, const DenseMatrix* pf, ConvergenceStatus st,
                    int k, double step) {
    rep.status = st;
    rep.iterations = k;
    rep.step_norm = step;
    if (st != ConvergenceStatus::Diverged && all_finite(af)) {
      DenseMatrix pown(0, 0);
      if (pf == nullptr) {
        pown = matmul(af, p.delta_t);
        pf = &pown;
      }
      residuals_of(p.d, lam, af, *pf, rep.eigenvalues, rep.residuals);
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rep.eigenvalues.assign(n, cdouble{nan, nan});
      rep.residuals.assign(n, nan);
    }
    rep.state = EigenIterate{std::move(af), k};
  };

  double step = 0.0;
  for (int k = 1; k <= opts.max_iter; ++k) {
    const cdouble lam_k =
        ramped ? lam * (1.0 - std::pow(alpha, double(k - 1))) : lam;
    const bool settled =
        !ramped || std::abs(lam_k - lam) <= opts.tol * std::abs(lam);

    DenseMatrix an(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      const cdouble pii = pmat(i, i);
      for (std::size_t j = 0; j < n; ++j) {
        an(i, j) = (i == j)
                       ? cdouble{1.0, 0.0}
                       : lam_k * theta.theta(i, j) * (pmat(i, j) - pii * a(i, j));
      }
    }
    step = max_abs_diff(an, a);

    if (!all_finite(an) || max_abs(an) > opts.divergence_threshold) {
      finish(std::move(an), nullptr, ConvergenceStatus::Diverged, k, step);
      return rep;
    }

    DenseMatrix pn = matmul(an, p.delta_t);
    double max_res = std::numeric_limits<double>::quiet_NaN();
    if (trace) {
      max_res = residuals_of(p.d, lam, an, pn, eig, res);
      trace(k, step, max_res);
    }

    if (settled && step < opts.tol) {
      if (!trace) max_res = residuals_of(p.d, lam, an, pn, eig, res);
      if (max_res < opts.residual_tol) {
        rep.status = ConvergenceStatus::Converged;
        rep.iterations = k;
        rep.step_norm = step;
        rep.eigenvalues = eig;
        rep.residuals = res;
        rep.state = EigenIterate{std::move(an), k};
        return rep;
      }
      // Step settled but the residual has not: keep iterating.
    } else if (win > 0 && settled && step > cycle_margin) {
      for (const DenseMatrix& past : window) {
        if (within_tol(an, past, opts.tol)) {
          finish(std::move(an), &pn, ConvergenceStatus::BoundedNonConverged, k,
                 step);
          return rep;
        }
      }
    }

    if (win > 0) {
      window.push_front(std::move(a));
      if (int(window.size()) > win - 1) window.pop_back();
    }
    a = std::move(an);
    pmat = std::move(pn);
  }

  finish(std::move(a), &pmat, ConvergenceStatus::MaxIterations, opts.max_iter,
         step);
  return rep;
}

SingleRowReport run_single(const PartitionedProblem& p, const GapRow& gaps,
                           const IterationOptions& opts, double ramp_alpha,
                           const TraceSink& trace) {
  const std::size_t n = p.size();
  const std::size_t row = gaps.row;
  const cdouble lam = p.lambda;
  const bool ramped = ramp_alpha > 0.0;
  const double cycle_margin = 1e3 * opts.tol;

  std::vector<cdouble> z(n, cdouble{});
  z[row] = 1.0;
  std::vector<cdouble> w = matvec(p.delta, z);

  const int win = opts.cycle_window >= 2 ? opts.cycle_window : 0;
  std::deque<std::vector<cdouble>> window;

  SingleRowReport rep;
  auto finish = [&](std::vector<cdouble> zf, const std::vector<cdouble>* wf,
                    ConvergenceStatus st, int k, double step) {
    rep.status = st;
    rep.iterations = k;
    rep.step_norm = step;
    if (st != ConvergenceStatus::Diverged && all_finite(zf)) {
      std::vector<cdouble> wown;
      if (wf == nullptr) {
        wown = matvec(p.delta, zf);
        wf = &wown;
      }
      rep.eigenvalue = p.d.d[row] + lam * (*wf)[row];
      rep.residual = residual_single(p.d, lam, zf, *wf, rep.eigenvalue);
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rep.eigenvalue = cdouble{nan, nan};
      rep.residual = nan;
    }
    rep.z = std::move(zf);
  };

  double step = 0.0;
  for (int k = 1; k <= opts.max_iter; ++k) {
    const cdouble lam_k =
        ramped ? lam * (1.0 - std::pow(ramp_alpha, double(k - 1))) : lam;
    const bool settled =
        !ramped || std::abs(lam_k - lam) <= opts.tol * std::abs(lam);

    std::vector<cdouble> zn(n);
    const cdouble wn = w[row];
    for (std::size_t m = 0; m < n; ++m) {
      zn[m] = (m == row) ? cdouble{1.0, 0.0}
                         : lam_k * gaps.inv_gaps[m] * (w[m] - wn * z[m]);
    }
    step = 0.0;
    for (std::size_t m = 0; m < n; ++m)
      step = std::max(step, std::abs(zn[m] - z[m]));

    if (!all_finite(zn) || vec_inf_norm(zn) > opts.divergence_threshold) {
      finish(std::move(zn), nullptr, ConvergenceStatus::Diverged, k, step);
      return rep;
    }

    std::vector<cdouble> wnext = matvec(p.delta, zn);
    double res = std::numeric_limits<double>::quiet_NaN();
    cdouble eps{};
    if (trace || (settled && step < opts.tol)) {
      eps = p.d.d[row] + lam * wnext[row];
      res = residual_single(p.d, lam, zn, wnext, eps);
    }
    if (trace) trace(k, step, res);

    if (settled && step < opts.tol) {
      if (res < opts.residual_tol) {
        rep.status = ConvergenceStatus::Converged;
        rep.iterations = k;
        rep.step_norm = step;
        rep.eigenvalue = eps;
        rep.residual = res;
        rep.z = std::move(zn);
        return rep;
      }
    } else if (win > 0 && settled && step > cycle_margin) {
      for (const auto& past : window) {
        if (within_tol(zn, past, opts.tol)) {
          finish(std::move(zn), &wnext, ConvergenceStatus::BoundedNonConverged,
                 k, step);
          return rep;
        }
      }
    }

    if (win > 0) {
      window.push_front(std::move(z));
      if (int(window.size()) > win - 1) window.pop_back();
    }
    z = std::move(zn);
    w = std::move(wnext);
  }

  finish(std::move(z), &w, ConvergenceStatus::MaxIterations, opts.max_iter, step);
  return rep;
}

}  // namespace

std::string to_string(ConvergenceStatus s) {
  switch (s) {
    case ConvergenceStatus::Converged:
      return "Converged";
    case ConvergenceStatus::BoundedNonConverged:
      return "BoundedNonConverged";
    case ConvergenceStatus::Diverged:
      return "Diverged";
    case ConvergenceStatus::MaxIterations:
      return "MaxIterations";
  }
  return "Unknown";
}

DenseMatrix step_full(const DenseMatrix& a, const GapMatrix& theta,
                      const MatrixVariant& delta_t, cdouble lambda) {
  const std::size_t n = a.rows();
  if (a.cols() != n || theta.theta.rows() != n)
    throw ShapeError("step_full: dimension mismatch");
  const DenseMatrix p = matmul(a, delta_t);
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const cdouble pii = p(i, i);
    for (std::size_t j = 0; j < n; ++j) {
      out(i, j) = (i == j)
                      ? cdouble{1.0, 0.0}
                      : lambda * theta.theta(i, j) * (p(i, j) - pii * a(i, j));
    }
  }
  return out;
}

std::vector<cdouble> step_single(std::span<const cdouble> z, const GapRow& gaps,
                                 const MatrixVariant& delta, cdouble lambda) {
  const std::size_t n = z.size();
  if (gaps.inv_gaps.size() != n)
    throw ShapeError("step_single: dimension mismatch");
  const std::vector<cdouble> w = matvec(delta, z);
  const cdouble wn = w[gaps.row];
  std::vector<cdouble> out(n);
  for (std::size_t m = 0; m < n; ++m) {
    out[m] = (m == gaps.row)
                 ? cdouble{1.0, 0.0}
                 : lambda * gaps.inv_gaps[m] * (w[m] - wn * z[m]);
  }
  return out;
}

std::vector<cdouble> step_single(std::span<const cdouble> z, std::size_t n,
                                 const GapMatrix& theta, const MatrixVariant& delta,
                                 cdouble lambda) {
  const std::size_t dim = z.size();
  if (theta.theta.rows() != dim || n >= dim)
    throw ShapeError("step_single: dimension mismatch");
  GapRow gaps;
  gaps.row = n;
  gaps.inv_gaps.resize(dim);
  for (std::size_t m = 0; m < dim; ++m) gaps.inv_gaps[m] = theta.theta(n, m);
  return step_single(z, gaps, delta, lambda);
}

cdouble eigenvalue_of(std::span<const cdouble> z, std::size_t n,
                      const DiagonalMatrix& d, const MatrixVariant& delta,
                      cdouble lambda) {
  if (z.size() != d.size() || n >= z.size())
    throw ShapeError("eigenvalue_of: dimension mismatch");
  const std::vector<cdouble> w = matvec(delta, z);
  return d.d[n] + lambda * w[n];
}

ConvergenceReport iterate_full(const PartitionedProblem& p,
                               const IterationOptions& opts,
                               const TraceSink& trace) {
  return run_full(p, opts, false, 0.0, trace);
}

ConvergenceReport iterate_ramped(const PartitionedProblem& p, double alpha,
                                 const IterationOptions& opts,
                                 const TraceSink& trace) {
  if (!(alpha >= 0.0) || alpha >= 1.0)
    throw std::invalid_argument("iterate_ramped: alpha must lie in [0, 1)");
  return run_full(p, opts, true, alpha, trace);
}

DenseMatrix iterate_fixed(const PartitionedProblem& p, int k, cdouble lambda) {
  if (k < 0) throw std::invalid_argument("iterate_fixed: negative step count");
  const GapMatrix theta = build_theta(p.d);
  DenseMatrix a = DenseMatrix::identity(p.size());
  for (int i = 0; i < k; ++i) a = step_full(a, theta, p.delta_t, lambda);
  return a;
}

SingleRowReport iterate_single(const PartitionedProblem& p, std::size_t row,
                               const IterationOptions& opts, double ramp_alpha,
                               const TraceSink& trace) {
  if (row >= p.size()) throw ShapeError("iterate_single: row out of range");
  if (!(ramp_alpha >= 0.0) || ramp_alpha >= 1.0)
    throw std::invalid_argument("iterate_single: ramp alpha must lie in [0, 1)");
  const GapRow gaps = build_gap_row(p.d, row, opts.degeneracy_tol);
  return run_single(p, gaps, opts, ramp_alpha, trace);
}

DominantEigenpair dominant_eigenpair(const PartitionedProblem& p,
                                     const IterationOptions& opts) {
  const std::size_t n = p.size();
  if (n == 0) throw ShapeError("dominant_eigenpair: empty problem");

  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (p.d.d[i].real() > p.d.d[best].real()) best = i;

  if (n > 1) {
    std::size_t runner = best == 0 ? 1 : 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == best) continue;
      if (p.d.d[i].real() > p.d.d[runner].real()) runner = i;
    }
    const double spread = spectral_spread(p.d);
    const double thr = opts.degeneracy_tol * std::max(1.0, spread);
    if (p.d.d[best].real() - p.d.d[runner].real() < thr)
      throw DegenerateSpectrum("dominant_eigenpair: ambiguous dominant level",
                               best, runner, p.d.d[best], p.d.d[runner]);
  }

  const GapRow gaps = build_gap_row(p.d, best, opts.degeneracy_tol);
  SingleRowReport r = run_single(p, gaps, opts, 0.0, {});

  DominantEigenpair out;
  out.row = best;
  out.eigenvalue = r.eigenvalue;
  out.status = r.status;
  out.iterations = r.iterations;
  out.residual = r.residual;
  out.step_norm = r.step_norm;
  out.z_chart = std::move(r.z);
  out.z_unit = out.z_chart;
  const double nrm = vec_two_norm(out.z_unit);
  if (nrm > 0.0 && std::isfinite(nrm)) {
    for (cdouble& v : out.z_unit) v /= nrm;
  }
  return out;
}

DenseMatrix jacobian_single(std::span<const cdouble> z, std::size_t n,
                            const GapMatrix& theta, const MatrixVariant& delta,
                            cdouble lambda) {
  const std::size_t dim = z.size();
  if (theta.theta.rows() != dim || n >= dim)
    throw ShapeError("jacobian_single: dimension mismatch");
  const std::vector<cdouble> w = matvec(delta, z);
  const cdouble wn = w[n];
  DenseMatrix j(dim, dim);

  if (const auto* dd = std::get_if<DenseMatrix>(&delta)) {
    for (std::size_t m = 0; m < dim; ++m) {
      if (m == n) continue;
      const cdouble t = lambda * theta.theta(n, m);
      for (std::size_t k = 0; k < dim; ++k) {
        cdouble v = (*dd)(m, k) - z[m] * (*dd)(n, k);
        if (k == m) v -= wn;
        j(m, k) = t * v;
      }
    }
  } else {
    const auto& sp = std::get<SparseMatrix>(delta);
    const auto offs = sp.row_offsets();
    const auto cols = sp.col_indices();
    const auto vals = sp.values();
    for (std::size_t m = 0; m < dim; ++m) {
      if (m == n) continue;
      const cdouble t = lambda * theta.theta(n, m);
      for (std::size_t e = offs[m]; e < offs[m + 1]; ++e)
        j(m, cols[e]) += t * vals[e];
      for (std::size_t e = offs[n]; e < offs[n + 1]; ++e)
        j(m, cols[e]) -= t * z[m] * vals[e];
      j(m, m) -= t * wn;
    }
  }
  return j;
}

DenseMatrix reduced_jacobian(const DenseMatrix& j, std::size_t n) {
  const std::size_t dim = j.rows();
  if (j.cols() != dim || n >= dim || dim == 0)
    throw ShapeError("reduced_jacobian: dimension mismatch");
  DenseMatrix out(dim - 1, dim - 1);
  std::size_t oi = 0;
  for (std::size_t i = 0; i < dim; ++i) {
    if (i == n) continue;
    std::size_t oj = 0;
    for (std::size_t k = 0; k < dim; ++k) {
      if (k == n) continue;
      out(oi, oj) = j(i, k);
      ++oj;
    }
    ++oi;
  }
  return out;
}

std::vector<cdouble> multipliers(const DenseMatrix& reduced) {
  if (reduced.rows() != reduced.cols())
    throw ShapeError("multipliers: matrix must be square");
  if (reduced.rows() > 8)
    throw ShapeError("multipliers: dimension capped at 8");
  return eigenvalues_dense_small(reduced);
}

ConvergenceReport homotopy_solve(const PartitionedProblem& p, int stages,
                                 const IterationOptions& opts) {
  if (stages < 1)
    throw std::invalid_argument("homotopy_solve: stages must be >= 1");
  const std::size_t n = p.size();
  const DenseMatrix delta_dense = densify(p.delta);

  DenseMatrix w = DenseMatrix::identity(n);
  ConvergenceReport last;
  int total = 0;

  for (int s = 1; s <= stages; ++s) {
    const cdouble lam_s = p.lambda * (double(s) / double(stages));
    DenseMatrix ms = delta_dense;
    {
      cdouble* md = ms.data();
      const std::size_t count = n * n;
      for (std::size_t i = 0; i < count; ++i) md[i] *= lam_s;
      for (std::size_t i = 0; i < n; ++i) ms(i, i) += p.d.d[i];
    }
    const DenseMatrix rotated = solve_linear_multi(w, matmul(ms, w));
    const PartitionedProblem sub = partition(MatrixVariant{rotated});
    last = iterate_full(sub, opts);
    total += last.iterations;
    if (last.status != ConvergenceStatus::Converged) break;
    const DenseMatrix v = transpose(last.state.a);
    w = matmul(w, v);
  }

  DenseMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const cdouble wii = w(i, i);
    if (std::abs(wii) == 0.0)
      throw std::runtime_error("homotopy_solve: singular stage basis");
    for (std::size_t m = 0; m < n; ++m) a(i, m) = w(m, i) / wii;
  }

  ConvergenceReport rep;
  rep.status = last.status;
  rep.iterations = total;
  rep.step_norm = last.step_norm;
  if (all_finite(a)) {
    const DenseMatrix pm = matmul(a, p.delta_t);
    residuals_of(p.d, p.lambda, a, pm, rep.eigenvalues, rep.residuals);
  } else {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rep.eigenvalues.assign(n, cdouble{nan, nan});
    rep.residuals.assign(n, nan);
  }
  rep.state = EigenIterate{std::move(a), total};
  return rep;
}

}  // namespace dynspec
