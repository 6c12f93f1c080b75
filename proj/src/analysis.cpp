#include "dynspec/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <exception>
#include <limits>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "dynspec/matrix_market.hpp"
#include "dynspec/rng.hpp"

namespace dynspec {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f != nullptr) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

CellClass classify(ConvergenceStatus s) {
  switch (s) {
    case ConvergenceStatus::Converged:
      return CellClass::Converged;
    case ConvergenceStatus::Diverged:
      return CellClass::Diverged;
    default:
      return CellClass::BoundedNonConverged;
  }
}

}  // namespace

double grid_coordinate(double lo, double hi, std::size_t res, std::size_t i) {
  if (res == 0) throw ShapeError("grid_coordinate: empty axis");
  if (res == 1) return 0.5 * (lo + hi);
  return lo + (hi - lo) * (double(i) / double(res - 1));
}

std::string to_string(CellClass c) {
  switch (c) {
    case CellClass::Converged:
      return "Converged";
    case CellClass::BoundedNonConverged:
      return "BoundedNonConverged";
    case CellClass::Diverged:
      return "Diverged";
  }
  return "Unknown";
}

double guaranteed_radius(const GapMatrix& theta, const MatrixVariant& delta) {
  const double tn = spectral_norm(theta.theta);
  const double dn = spectral_norm(delta);
  const double denom = tn * dn;
  if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
  return (3.0 - 2.0 * std::sqrt(2.0)) / denom;
}

DomainGrid scan_domain(const PartitionedProblem& base, const ScanGrid& grid,
                       const ScanMode& mode, const IterationOptions& opts,
                       unsigned threads) {
  if (grid.res_re == 0 || grid.res_im == 0)
    throw ShapeError("scan_domain: empty grid");
  if (mode.kind == ScanMode::Kind::SingleRow && mode.row >= base.size())
    throw ShapeError("scan_domain: row out of range");

  // Validate the spectrum once up front so worker threads cannot throw.
  if (mode.kind == ScanMode::Kind::SingleRow)
    build_gap_row(base.d, mode.row, opts.degeneracy_tol);
  else
    build_theta(base.d, opts.degeneracy_tol);

  DomainGrid out;
  out.grid = grid;
  const std::size_t cells = grid.res_re * grid.res_im;
  out.classes.assign(cells, CellClass::BoundedNonConverged);
  out.iterations.assign(cells, 0);

  unsigned nthreads = threads != 0 ? threads : std::thread::hardware_concurrency();
  if (nthreads == 0) nthreads = 1;
  nthreads = unsigned(std::min<std::size_t>(nthreads, cells));

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_lock;

  auto worker = [&]() {
    try {
      PartitionedProblem local = base;
      for (;;) {
        const std::size_t cell = next.fetch_add(1);
        if (cell >= cells) break;
        const std::size_t i = cell / grid.res_re;
        const std::size_t j = cell % grid.res_re;
        local.lambda = cdouble{out.re_at(j), out.im_at(i)};
        ConvergenceStatus status;
        int iters;
        if (mode.kind == ScanMode::Kind::SingleRow) {
          const SingleRowReport r =
              iterate_single(local, mode.row, opts, mode.ramp_alpha, {});
          status = r.status;
          iters = r.iterations;
        } else {
          const ConvergenceReport r =
              mode.ramp_alpha > 0.0 ? iterate_ramped(local, mode.ramp_alpha, opts)
                                    : iterate_full(local, opts);
          status = r.status;
          iters = r.iterations;
        }
        out.classes[cell] = classify(status);
        out.iterations[cell] = iters;
      }
    } catch (...) {
      const std::lock_guard<std::mutex> hold(error_lock);
      if (!first_error) first_error = std::current_exception();
    }
  };

  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (unsigned t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

std::vector<BifurcationSample> bifurcation_scan(
    const PartitionedProblem& base, std::size_t row, std::size_t coord,
    double lambda_lo, double lambda_hi, std::size_t samples, int transient,
    int keep, const IterationOptions& opts) {
  const std::size_t n = base.size();
  if (row >= n || coord >= n) throw ShapeError("bifurcation_scan: index out of range");
  if (samples == 0 || transient < 0 || keep <= 0)
    throw std::invalid_argument("bifurcation_scan: bad sampling parameters");

  const GapRow gaps = build_gap_row(base.d, row, opts.degeneracy_tol);
  std::vector<BifurcationSample> out;
  out.reserve(samples);

  for (std::size_t s = 0; s < samples; ++s) {
    BifurcationSample sample;
    sample.lambda = grid_coordinate(lambda_lo, lambda_hi, samples, s);
    const cdouble lam{sample.lambda, 0.0};

    std::vector<cdouble> z(n, cdouble{});
    z[row] = 1.0;
    bool escaped = false;
    const int total = transient + keep;
    for (int k = 0; k < total; ++k) {
      z = step_single(z, gaps, base.delta, lam);
      if (!all_finite(z) || vec_inf_norm(z) > opts.divergence_threshold) {
        escaped = true;
        break;
      }
      if (k >= transient) sample.values.push_back(z[coord]);
    }
    if (escaped) sample.values.clear();
    out.push_back(std::move(sample));
  }
  return out;
}

cdouble eval_boundary_poly(const BoundaryPolynomial& b, cdouble lambda,
                           cdouble mu) {
  int max_dl = 0;
  int max_dm = 0;
  for (const auto& t : b.terms) {
    max_dl = std::max(max_dl, t.dl);
    max_dm = std::max(max_dm, t.dm);
  }
  std::vector<cdouble> lp(std::size_t(max_dl) + 1, cdouble{1.0, 0.0});
  std::vector<cdouble> mp(std::size_t(max_dm) + 1, cdouble{1.0, 0.0});
  for (int i = 1; i <= max_dl; ++i) lp[std::size_t(i)] = lp[std::size_t(i - 1)] * lambda;
  for (int i = 1; i <= max_dm; ++i) mp[std::size_t(i)] = mp[std::size_t(i - 1)] * mu;
  cdouble acc{};
  for (const auto& t : b.terms)
    acc += t.c * lp[std::size_t(t.dl)] * mp[std::size_t(t.dm)];
  return acc;
}

double boundary_poly_scale(const BoundaryPolynomial& b, cdouble lambda,
                           cdouble mu) {
  const double al = std::abs(lambda);
  const double am = std::abs(mu);
  double scale = 1.0;
  for (const auto& t : b.terms)
    scale = std::max(scale,
                     std::abs(t.c) * std::pow(al, t.dl) * std::pow(am, t.dm));
  return scale;
}

const BoundaryPolynomial& boundary_curve_2x2() {
  static const BoundaryPolynomial poly{
      "two-by-two",
      {{4, 2, 0}, {2, 0, 1}, {-1, 0, 2}},
  };
  return poly;
}

const BoundaryPolynomial& boundary_poly_3x3(int n) {
  static const BoundaryPolynomial p1{
      "three-by-three row 1",
      {
          {63792, 7, 0},  {-28352, 6, 1}, {-68040, 6, 0},  {-29556, 5, 2},
          {89352, 5, 1},  {-13239, 5, 0}, {960, 4, 3},     {14516, 4, 2},
          {-39164, 4, 1}, {12116, 4, 0},  {5616, 3, 4},    {-26658, 3, 3},
          {29988, 3, 2},  {-546, 3, 1},   {-2448, 3, 0},   {468, 2, 5},
          {-3720, 2, 4},  {12820, 2, 3},  {-17648, 2, 2},  {7584, 2, 1},
          {-1296, 2, 0},  {-243, 1, 6},   {1404, 1, 5},    {-2619, 1, 4},
          {1350, 1, 3},   {432, 1, 2},    {108, 0, 6},     {-792, 0, 5},
          {1980, 0, 4},   {-1872, 0, 3},  {432, 0, 2},
      },
  };
  static const BoundaryPolynomial p2{
      "three-by-three row 2",
      {
          {113408, 7, 0}, {-63792, 6, 1}, {-120960, 6, 0}, {7416, 5, 2},
          {53208, 5, 1},  {36424, 5, 0},  {6525, 4, 3},    {-11034, 4, 2},
          {-13824, 4, 1}, {-5664, 4, 0},  {-3156, 3, 4},   {-2472, 3, 3},
          {10332, 3, 2},  {3696, 3, 1},   {3088, 3, 0},    {-72, 2, 5},
          {1800, 2, 4},   {-1800, 2, 3},  {-2088, 2, 2},   {-1296, 2, 1},
          {-576, 2, 0},   {128, 1, 6},    {-24, 1, 5},     {-736, 1, 4},
          {-120, 1, 3},   {1328, 1, 2},   {-72, 0, 6},     {108, 0, 5},
          {360, 0, 4},    {-432, 0, 3},   {-288, 0, 2},
      },
  };
  static const BoundaryPolynomial p3{
      "three-by-three row 3",
      {
          {35440, 7, 0},   {-42528, 6, 1}, {-37800, 6, 0}, {-32360, 5, 2},
          {110080, 5, 1},  {-23295, 5, 0}, {29112, 4, 3},  {-4800, 4, 2},
          {-88614, 4, 1},  {51024, 4, 0},  {14640, 3, 4},  {-78760, 3, 3},
          {116760, 3, 2},  {-52920, 3, 1}, {5400, 3, 0},   {-2376, 2, 5},
          {-10152, 2, 4},  {70296, 2, 3},  {-101496, 2, 2}, {41904, 2, 1},
          {-864, 2, 0},    {-1080, 1, 6},  {7920, 1, 5},   {-19620, 1, 4},
          {19440, 1, 3},   {-6480, 1, 2},  {1296, 0, 6},   {-7992, 0, 5},
          {17712, 0, 4},   {-16416, 0, 3}, {5184, 0, 2},
      },
  };
  switch (n) {
    case 1:
      return p1;
    case 2:
      return p2;
    case 3:
      return p3;
    default:
      throw std::invalid_argument("boundary_poly_3x3: n must be 1, 2 or 3");
  }
}

namespace {

// Quadratic a x^2 + b x + c = 0 over the complexes; degenerate leading
// coefficients fall back to the linear root.
std::vector<cdouble> quadratic_roots(cdouble a, cdouble b, cdouble c) {
  constexpr double tiny = 1e-14;
  if (std::abs(a) < tiny) {
    if (std::abs(b) < tiny) return {};
    return {-c / b};
  }
  const cdouble disc = std::sqrt(b * b - 4.0 * a * c);
  // Pick the sign that avoids cancellation in -b -+ disc.
  const cdouble q = (std::real(std::conj(b) * disc) >= 0.0) ? -0.5 * (b + disc)
                                                            : -0.5 * (b - disc);
  std::vector<cdouble> roots;
  roots.push_back(q / a);
  if (std::abs(q) > 0.0)
    roots.push_back(c / q);
  else
    roots.push_back(cdouble{});
  return roots;
}

cdouble dense_entry(const MatrixVariant& m, std::size_t i, std::size_t j) {
  if (const auto* d = std::get_if<DenseMatrix>(&m)) return (*d)(i, j);
  return std::get<SparseMatrix>(m).at(i, j);
}

std::vector<std::vector<cdouble>> fixed_points_2x2(const PartitionedProblem& p,
                                                   std::size_t row,
                                                   cdouble lambda) {
  const std::size_t m = row == 0 ? 1 : 0;
  const GapMatrix theta = build_theta(p.d);
  const cdouble th = theta.theta(row, m);
  const cdouble dnn = dense_entry(p.delta, row, row);
  const cdouble dmm = dense_entry(p.delta, m, m);
  const cdouble dmn = dense_entry(p.delta, m, row);
  const cdouble dnm = dense_entry(p.delta, row, m);

  // Fixed points of x = lambda th (dmn + dmm x - dnn x - dnm x^2).
  const cdouble a = lambda * th * dnm;
  const cdouble b = cdouble{1.0, 0.0} - lambda * th * (dmm - dnn);
  const cdouble c = -lambda * th * dmn;
  std::vector<std::vector<cdouble>> out;
  for (const cdouble x : quadratic_roots(a, b, c)) {
    std::vector<cdouble> z(2, cdouble{});
    z[row] = 1.0;
    z[m] = x;
    out.push_back(std::move(z));
  }
  if (out.empty()) {
    std::vector<cdouble> z(2, cdouble{});
    z[row] = 1.0;
    out.push_back(std::move(z));
  }
  return out;
}

std::vector<std::vector<cdouble>> fixed_points_newton(
    const PartitionedProblem& p, std::size_t row, cdouble lambda) {
  const std::size_t n = p.size();
  const GapMatrix theta = build_theta(p.d);
  std::vector<std::size_t> free_dims;
  for (std::size_t i = 0; i < n; ++i)
    if (i != row) free_dims.push_back(i);
  const std::size_t dof = free_dims.size();

  Rng rng = Rng::stream(0x5eedu, "curve-newton");
  std::vector<std::vector<cdouble>> found;

  constexpr int kStarts = 81;
  constexpr int kNewtonIters = 60;
  for (int start = 0; start < kStarts; ++start) {
    std::vector<cdouble> z(n, cdouble{});
    z[row] = 1.0;
    if (start > 0) {
      for (const std::size_t i : free_dims)
        z[i] = cdouble{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
    }

    bool ok = false;
    for (int it = 0; it < kNewtonIters; ++it) {
      const std::vector<cdouble> fz = step_single(z, row, theta, p.delta, lambda);
      DenseMatrix jg =
          reduced_jacobian(jacobian_single(z, row, theta, p.delta, lambda), row);
      for (std::size_t i = 0; i < dof; ++i) jg(i, i) -= 1.0;

      std::vector<cdouble> g(dof);
      for (std::size_t i = 0; i < dof; ++i)
        g[i] = -(fz[free_dims[i]] - z[free_dims[i]]);

      std::vector<cdouble> stepv;
      try {
        stepv = solve_linear(jg, g);
      } catch (const std::runtime_error&) {
        break;  // singular Jacobian; abandon this start
      }
      double stepn = 0.0;
      double zn = 1.0;
      for (std::size_t i = 0; i < dof; ++i) {
        z[free_dims[i]] += stepv[i];
        stepn = std::max(stepn, std::abs(stepv[i]));
        zn = std::max(zn, std::abs(z[free_dims[i]]));
      }
      if (!all_finite(z) || zn > 1e8) break;
      if (stepn < 1e-13 * zn) {
        ok = true;
        break;
      }
    }
    if (!ok) continue;

    const std::vector<cdouble> fz = step_single(z, row, theta, p.delta, lambda);
    double resid = 0.0;
    double zn = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      resid = std::max(resid, std::abs(fz[i] - z[i]));
      zn = std::max(zn, std::abs(z[i]));
    }
    if (resid > 1e-10 * zn || zn > 1e6) continue;

    bool duplicate = false;
    for (const auto& prev : found) {
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        d = std::max(d, std::abs(prev[i] - z[i]));
      if (d < 1e-8 * zn) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) found.push_back(z);
  }
  return found;
}

}  // namespace

std::vector<std::vector<cdouble>> fixture_fixed_points(FixtureKind kind,
                                                       std::size_t row,
                                                       cdouble lambda) {
  if (kind == FixtureKind::TwoByTwo) {
    if (row >= 2) throw ShapeError("fixture_fixed_points: row out of range");
    return fixed_points_2x2(build_two_by_two(), row, lambda);
  }
  if (row >= 3) throw ShapeError("fixture_fixed_points: row out of range");
  return fixed_points_newton(build_three_by_three(), row, lambda);
}

CurveValidation validate_multiplier_curve(FixtureKind kind, std::size_t row,
                                          std::span<const cdouble> lambdas) {
  const PartitionedProblem p =
      kind == FixtureKind::TwoByTwo ? build_two_by_two() : build_three_by_three();
  if (row >= p.size())
    throw ShapeError("validate_multiplier_curve: row out of range");
  const GapMatrix theta = build_theta(p.d);
  const BoundaryPolynomial& poly = kind == FixtureKind::TwoByTwo
                                       ? boundary_curve_2x2()
                                       : boundary_poly_3x3(int(row) + 1);

  CurveValidation out;
  for (const cdouble lam : lambdas) {
    const auto fixed_points = fixture_fixed_points(kind, row, lam);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& z : fixed_points) {
      const DenseMatrix jac = jacobian_single(z, row, theta, p.delta, lam);
      const std::vector<cdouble> mus = multipliers(reduced_jacobian(jac, row));
      for (const cdouble mu : mus) {
        const double r = std::abs(eval_boundary_poly(poly, lam, mu)) /
                         boundary_poly_scale(poly, lam, mu);
        best = std::min(best, r);
      }
    }
    if (!std::isfinite(best)) {
      ++out.skipped;
      continue;
    }
    out.residuals.push_back(best);
    out.max_residual = std::max(out.max_residual, best);
    ++out.evaluated;
  }
  return out;
}

void render_domain(const DomainGrid& g, const std::string& ppm_path,
                   std::span<const cdouble> overlay) {
  const std::size_t w = g.grid.res_re;
  const std::size_t h = g.grid.res_im;
  if (g.classes.size() != w * h || g.iterations.size() != w * h)
    throw ShapeError("render_domain: grid size mismatch");

  std::vector<unsigned char> pixels(w * h * 3, 0);
  auto paint = [&](std::size_t i_im, std::size_t j_re, unsigned char r,
                   unsigned char gg, unsigned char b) {
    // Image rows run from im_max (top) down to im_min.
    const std::size_t row = h - 1 - i_im;
    unsigned char* px = &pixels[(row * w + j_re) * 3];
    px[0] = r;
    px[1] = gg;
    px[2] = b;
  };

  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const std::size_t cell = g.index(i, j);
      switch (g.classes[cell]) {
        case CellClass::Converged:
          paint(i, j, 0, 0, 0);
          break;
        case CellClass::BoundedNonConverged:
          paint(i, j, 70, 70, 70);
          break;
        case CellClass::Diverged: {
          const double t = std::min(1.0, double(g.iterations[cell]) / 256.0);
          const auto shade = (unsigned char)std::lround(240.0 - 140.0 * t);
          paint(i, j, shade, shade, shade);
          break;
        }
      }
    }
  }

  for (const cdouble lam : overlay) {
    double jr, ir;
    if (w == 1) {
      jr = 0.0;
    } else {
      jr = (lam.real() - g.grid.re_min) / (g.grid.re_max - g.grid.re_min) *
           double(w - 1);
    }
    if (h == 1) {
      ir = 0.0;
    } else {
      ir = (lam.imag() - g.grid.im_min) / (g.grid.im_max - g.grid.im_min) *
           double(h - 1);
    }
    const auto j = (long)std::lround(jr);
    const auto i = (long)std::lround(ir);
    if (j < 0 || i < 0 || j >= long(w) || i >= long(h)) continue;
    paint(std::size_t(i), std::size_t(j), 220, 30, 30);
  }

  FilePtr f(std::fopen(ppm_path.c_str(), "wb"));
  if (!f) throw IoError("render_domain: cannot open " + ppm_path);
  std::fprintf(f.get(), "P6\n%zu %zu\n255\n", w, h);
  if (std::fwrite(pixels.data(), 1, pixels.size(), f.get()) != pixels.size())
    throw IoError("render_domain: short write to " + ppm_path);
}

void write_domain_csv(const DomainGrid& g, const std::string& csv_path) {
  FilePtr f(std::fopen(csv_path.c_str(), "w"));
  if (!f) throw IoError("write_domain_csv: cannot open " + csv_path);
  std::fprintf(f.get(),
               "# re_min=%.17g re_max=%.17g im_min=%.17g im_max=%.17g "
               "res_re=%zu res_im=%zu\n",
               g.grid.re_min, g.grid.re_max, g.grid.im_min, g.grid.im_max,
               g.grid.res_re, g.grid.res_im);
  std::fprintf(f.get(), "re,im,class,iterations\n");
  for (std::size_t i = 0; i < g.grid.res_im; ++i) {
    for (std::size_t j = 0; j < g.grid.res_re; ++j) {
      const std::size_t cell = g.index(i, j);
      std::fprintf(f.get(), "%.17g,%.17g,%s,%d\n", g.re_at(j), g.im_at(i),
                   to_string(g.classes[cell]).c_str(),
                   int(g.iterations[cell]));
    }
  }
}

DomainGrid read_domain_csv(const std::string& csv_path) {
  FilePtr f(std::fopen(csv_path.c_str(), "r"));
  if (!f) throw IoError("read_domain_csv: cannot open " + csv_path);

  DomainGrid g;
  char line[512];
  if (!std::fgets(line, sizeof line, f.get()))
    throw IoError("read_domain_csv: empty file");
  if (std::sscanf(line,
                  "# re_min=%lg re_max=%lg im_min=%lg im_max=%lg res_re=%zu "
                  "res_im=%zu",
                  &g.grid.re_min, &g.grid.re_max, &g.grid.im_min,
                  &g.grid.im_max, &g.grid.res_re, &g.grid.res_im) != 6)
    throw IoError("read_domain_csv: bad metadata line");
  if (!std::fgets(line, sizeof line, f.get()) ||
      std::strncmp(line, "re,im,class,iterations", 22) != 0)
    throw IoError("read_domain_csv: bad header line");

  const std::size_t cells = g.grid.res_re * g.grid.res_im;
  g.classes.reserve(cells);
  g.iterations.reserve(cells);
  while (std::fgets(line, sizeof line, f.get())) {
    double re, im;
    char cls[64];
    int iters;
    if (std::sscanf(line, "%lg,%lg,%63[^,],%d", &re, &im, cls, &iters) != 4)
      throw IoError("read_domain_csv: bad data row");
    CellClass c;
    if (std::strcmp(cls, "Converged") == 0)
      c = CellClass::Converged;
    else if (std::strcmp(cls, "BoundedNonConverged") == 0)
      c = CellClass::BoundedNonConverged;
    else if (std::strcmp(cls, "Diverged") == 0)
      c = CellClass::Diverged;
    else
      throw IoError("read_domain_csv: unknown class " + std::string(cls));
    g.classes.push_back(c);
    g.iterations.push_back(iters);
  }
  if (g.classes.size() != cells)
    throw IoError("read_domain_csv: row count does not match grid");
  return g;
}

}  // namespace dynspec
