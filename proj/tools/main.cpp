// dynspec: command-line front end for the dynamical eigenvalue library.
//
// Subcommands: solve, dominant, compare, scan, bifurcate, bench,
// oscillator-export. Exit codes are a stable contract for scripting:
//   0  success (Converged where convergence is the question)
//   2  the run completed but the iteration or series legitimately failed
//      to converge
//   1  usage or input error
// Every completed run writes a manifest JSON capturing the full
// configuration, the seed, the library version, and the wall time.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dynspec/analysis.hpp"
#include "dynspec/dpt.hpp"
#include "dynspec/json_io.hpp"
#include "dynspec/matrix.hpp"
#include "dynspec/matrix_market.hpp"
#include "dynspec/partition.hpp"
#include "dynspec/rng.hpp"
#include "dynspec/rspt.hpp"
#include "dynspec/version.hpp"

namespace {

using namespace dynspec;
using nlohmann::ordered_json;

/// Input problems a CLI user made inconsistent; always maps to exit 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw IoError("write failed: " + path);
}

std::vector<double> parse_double_list(const std::string& csv) {
  std::vector<double> vals;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::size_t pos = 0;
    const double v = std::stod(item, &pos);
    while (pos < item.size() && std::isspace(static_cast<unsigned char>(item[pos])))
      ++pos;
    if (pos != item.size()) throw UsageError("bad number in list: '" + item + "'");
    vals.push_back(v);
  }
  if (vals.empty()) throw UsageError("empty number list: '" + csv + "'");
  return vals;
}

std::vector<std::size_t> parse_size_list(const std::string& csv) {
  std::vector<std::size_t> out;
  for (const double v : parse_double_list(csv)) {
    if (v < 1.0 || v != std::floor(v))
      throw UsageError("sizes must be positive integers: '" + csv + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Problem selection (builder XOR files)
// ---------------------------------------------------------------------------

struct ProblemFlags {
  bool two_by_two = false;
  bool three_by_three = false;
  std::size_t oscillator_n = 0;
  std::size_t random_uniform_n = 0;
  std::size_t er_n = 0;
  std::size_t uniform_osc_n = 0;
  double scale = 1.0;
  std::string file_d;
  std::string file_delta;
};

void add_problem_flags(CLI::App* sub, ProblemFlags& pf) {
  sub->add_flag("--two-by-two", pf.two_by_two,
                "Symmetric 2x2 fixture: D=diag(0,1), off-diagonal coupling");
  sub->add_flag("--three-by-three", pf.three_by_three,
                "3x3 fixture: D=diag(0,1,3) with dense symmetric coupling");
  sub->add_option("--oscillator", pf.oscillator_n,
                  "Even-sector oscillator with rank-one coupling, N basis states");
  sub->add_option("--random-uniform", pf.random_uniform_n,
                  "D=diag(1..N), dense uniform[-1,1] coupling drawn from --seed");
  sub->add_option("--er", pf.er_n,
                  "Oscillator diagonal perturbed by a sparse Erdos-Renyi "
                  "Laplacian scaled by --lambda (real), N levels");
  sub->add_option("--uniform-osc", pf.uniform_osc_n,
                  "Oscillator diagonal perturbed by a dense uniform matrix "
                  "scaled by --lambda and --scale, N levels");
  sub->add_option("--scale", pf.scale,
                  "Entry scale for --uniform-osc (default 1.0)");
  sub->add_option("--file-d", pf.file_d,
                  "Matrix Market file holding the diagonal part D");
  sub->add_option("--file-delta", pf.file_delta,
                  "Matrix Market file holding the perturbation");
}

int problem_source_count(const ProblemFlags& pf) {
  int n = 0;
  n += pf.two_by_two ? 1 : 0;
  n += pf.three_by_three ? 1 : 0;
  n += pf.oscillator_n > 0 ? 1 : 0;
  n += pf.random_uniform_n > 0 ? 1 : 0;
  n += pf.er_n > 0 ? 1 : 0;
  n += pf.uniform_osc_n > 0 ? 1 : 0;
  n += (!pf.file_d.empty() || !pf.file_delta.empty()) ? 1 : 0;
  return n;
}

std::string problem_kind(const ProblemFlags& pf) {
  if (pf.two_by_two) return "two-by-two";
  if (pf.three_by_three) return "three-by-three";
  if (pf.oscillator_n > 0) return "oscillator";
  if (pf.random_uniform_n > 0) return "random-uniform";
  if (pf.er_n > 0) return "er";
  if (pf.uniform_osc_n > 0) return "uniform-osc";
  return "files";
}

std::size_t problem_n(const ProblemFlags& pf) {
  if (pf.two_by_two) return 2;
  if (pf.three_by_three) return 3;
  if (pf.oscillator_n > 0) return pf.oscillator_n;
  if (pf.random_uniform_n > 0) return pf.random_uniform_n;
  if (pf.er_n > 0) return pf.er_n;
  if (pf.uniform_osc_n > 0) return pf.uniform_osc_n;
  return 0;  // files: known only after reading
}

void validate_problem_flags(const ProblemFlags& pf) {
  const int sources = problem_source_count(pf);
  if (sources == 0)
    throw UsageError(
        "no problem selected: pass exactly one of --two-by-two, "
        "--three-by-three, --oscillator N, --random-uniform N, --er N, "
        "--uniform-osc N, or --file-d/--file-delta");
  if (sources > 1)
    throw UsageError("conflicting problem flags: pass exactly one source");
  if (!pf.file_d.empty() != !pf.file_delta.empty())
    throw UsageError("--file-d and --file-delta must be given together");
}

DiagonalMatrix diagonal_from_matrix(const MatrixVariant& m, const std::string& path) {
  const auto check_square = [&](std::size_t r, std::size_t c) {
    if (r != c) throw UsageError("D must be square: " + path);
  };
  std::vector<cdouble> diag;
  if (std::holds_alternative<DenseMatrix>(m)) {
    const auto& d = std::get<DenseMatrix>(m);
    check_square(d.rows(), d.cols());
    diag.resize(d.rows());
    for (std::size_t i = 0; i < d.rows(); ++i) {
      for (std::size_t j = 0; j < d.cols(); ++j) {
        if (i != j && d(i, j) != cdouble{0.0, 0.0})
          throw UsageError("D has a nonzero off-diagonal entry: " + path);
      }
      diag[i] = d(i, i);
    }
  } else {
    const auto& s = std::get<SparseMatrix>(m);
    check_square(s.rows(), s.cols());
    diag.resize(s.rows());
    for (std::size_t i = 0; i < s.rows(); ++i) {
      for (std::size_t k = s.row_offsets()[i]; k < s.row_offsets()[i + 1]; ++k) {
        const std::size_t j = s.col_indices()[k];
        if (i != j && s.values()[k] != cdouble{0.0, 0.0})
          throw UsageError("D has a nonzero off-diagonal entry: " + path);
        if (i == j) diag[i] = s.values()[k];
      }
    }
  }
  return DiagonalMatrix(std::move(diag));
}

/// Builds the selected problem at the given coupling. For the re-split
/// families (er, uniform-osc) lambda is folded into the builder and the
/// returned problem carries lambda = 1.
PartitionedProblem build_problem(const ProblemFlags& pf, cdouble lambda,
                                 std::uint64_t seed) {
  validate_problem_flags(pf);
  if (pf.two_by_two) return build_two_by_two(lambda);
  if (pf.three_by_three) return build_three_by_three(lambda);
  if (pf.oscillator_n > 0) {
    PartitionedProblem p = build_oscillator(pf.oscillator_n);
    p.lambda = lambda;
    return p;
  }
  if (pf.random_uniform_n > 0) {
    PartitionedProblem p = build_random_uniform(pf.random_uniform_n, seed);
    p.lambda = lambda;
    return p;
  }
  if (pf.er_n > 0) return build_er_perturbed_oscillator(pf.er_n, seed, lambda);
  if (pf.uniform_osc_n > 0)
    return build_uniform_perturbed_oscillator(pf.uniform_osc_n, seed, lambda,
                                              pf.scale);
  const MatrixVariant dm = read_matrix_market(pf.file_d);
  MatrixVariant delta = read_matrix_market(pf.file_delta);
  DiagonalMatrix d = diagonal_from_matrix(dm, pf.file_d);
  return make_problem(std::move(d), std::move(delta), lambda);
}

ordered_json problem_config_json(const ProblemFlags& pf, cdouble lambda,
                                 std::uint64_t seed) {
  ordered_json j;
  j["kind"] = problem_kind(pf);
  j["n"] = problem_n(pf);
  j["seed"] = seed;
  j["lambda"] = ordered_json::array({lambda.real(), lambda.imag()});
  if (!pf.file_d.empty()) {
    j["file_d"] = pf.file_d;
    j["file_delta"] = pf.file_delta;
  }
  if (pf.uniform_osc_n > 0) j["scale"] = pf.scale;
  return j;
}

// ---------------------------------------------------------------------------
// Shared iteration / manifest plumbing
// ---------------------------------------------------------------------------

struct CommonFlags {
  double lambda_re = 1.0;
  double lambda_im = 0.0;
  std::uint64_t seed = 1;
  IterationOptions opts;
  std::string manifest_path = "dynspec_manifest.json";
  unsigned threads = 0;
  bool threads_given = false;
};

void add_common_flags(CLI::App* sub, CommonFlags& cf, int default_max_iter) {
  cf.opts.max_iter = default_max_iter;
  sub->add_option("--lambda", cf.lambda_re, "Coupling strength (real part)");
  sub->add_option("--lambda-im", cf.lambda_im, "Coupling strength (imaginary part)");
  sub->add_option("--seed", cf.seed,
                  "Seed for every random draw in the run (default 1)");
  sub->add_option("--tol", cf.opts.tol, "Step-norm convergence threshold");
  sub->add_option("--residual-tol", cf.opts.residual_tol,
                  "Eigenpair residual threshold");
  sub->add_option("--max-iter", cf.opts.max_iter, "Iteration budget");
  sub->add_option("--divergence-threshold", cf.opts.divergence_threshold,
                  "Entry magnitude that classifies the orbit as divergent");
  sub->add_option("--cycle-window", cf.opts.cycle_window,
                  "Look-back window for periodic-orbit detection");
  sub->add_option("--manifest", cf.manifest_path,
                  "Path of the run manifest JSON");
  sub->add_option("--threads", cf.threads,
                  "Worker threads for scans (0 = hardware); DYNSPEC_THREADS "
                  "is the environment fallback");
}

unsigned resolve_threads(const CLI::App* sub, CommonFlags& cf) {
  if (sub->count("--threads") > 0) return cf.threads;
  if (const char* env = std::getenv("DYNSPEC_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
      throw UsageError(std::string("DYNSPEC_THREADS is not a number: ") + env);
    }
  }
  return cf.threads;
}

ordered_json options_json(const IterationOptions& o) {
  ordered_json j;
  j["tol"] = o.tol;
  j["residual_tol"] = o.residual_tol;
  j["max_iter"] = o.max_iter;
  j["divergence_threshold"] = o.divergence_threshold;
  j["cycle_window"] = o.cycle_window;
  j["degeneracy_tol"] = o.degeneracy_tol;
  return j;
}

void write_manifest(const std::string& path, const std::string& subcommand,
                    ordered_json config, double wall_seconds) {
  ordered_json m;
  m["subcommand"] = subcommand;
  m["library_version"] = version_string;
  m["config"] = std::move(config);
  m["wall_seconds"] = wall_seconds;
  write_text_file(path, m.dump(2) + "\n");
}

int exit_code_for(ConvergenceStatus s) {
  return s == ConvergenceStatus::Converged ? 0 : 2;
}

// ---------------------------------------------------------------------------
// solve
// ---------------------------------------------------------------------------

struct SolveFlags {
  ProblemFlags pf;
  CommonFlags cf;
  double ramp = 0.0;
  int homotopy = 0;
  std::string report_path;
  std::string eigvec_path;
};

int run_solve(const CLI::App* sub, SolveFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  if (f.ramp > 0.0 && f.homotopy > 0)
    throw UsageError("--ramp and --homotopy are mutually exclusive");
  const cdouble lambda{f.cf.lambda_re, f.cf.lambda_im};
  const PartitionedProblem p = build_problem(f.pf, lambda, f.cf.seed);

  ConvergenceReport rep;
  std::string mode = "direct";
  if (f.homotopy > 0) {
    mode = "homotopy";
    rep = homotopy_solve(p, f.homotopy, f.cf.opts);
  } else if (f.ramp > 0.0) {
    mode = "ramped";
    rep = iterate_ramped(p, f.ramp, f.cf.opts);
  } else {
    rep = iterate_full(p, f.cf.opts);
  }

  nlohmann::json j = report_to_json(rep);
  j["n"] = p.size();
  j["lambda"] = json_complex(p.lambda);
  j["mode"] = mode;
  const std::string text = j.dump(2) + "\n";
  std::fputs(text.c_str(), stdout);
  if (!f.report_path.empty()) write_text_file(f.report_path, text);
  if (!f.eigvec_path.empty()) write_matrix_market(rep.state.a, f.eigvec_path);

  ordered_json cfg;
  cfg["problem"] = problem_config_json(f.pf, lambda, f.cf.seed);
  cfg["options"] = options_json(f.cf.opts);
  cfg["mode"] = mode;
  if (f.ramp > 0.0) cfg["ramp"] = f.ramp;
  if (f.homotopy > 0) cfg["homotopy"] = f.homotopy;
  cfg["report"] = f.report_path;
  cfg["eigvec"] = f.eigvec_path;
  cfg["threads"] = resolve_threads(sub, f.cf);
  write_manifest(f.cf.manifest_path, "solve", std::move(cfg), seconds_since(t0));
  return exit_code_for(rep.status);
}

// ---------------------------------------------------------------------------
// dominant
// ---------------------------------------------------------------------------

struct DominantFlags {
  ProblemFlags pf;
  CommonFlags cf;
};

int run_dominant(const CLI::App* sub, DominantFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const cdouble lambda{f.cf.lambda_re, f.cf.lambda_im};
  const PartitionedProblem p = build_problem(f.pf, lambda, f.cf.seed);

  const auto t_solve = std::chrono::steady_clock::now();
  const DominantEigenpair dom = dominant_eigenpair(p, f.cf.opts);
  const double solve_seconds = seconds_since(t_solve);

  std::printf(
      "status=%s row=%zu eigenvalue_re=%.17g eigenvalue_im=%.17g "
      "residual=%.17g iterations=%d wall_seconds=%.6f\n",
      to_string(dom.status).c_str(), dom.row, dom.eigenvalue.real(),
      dom.eigenvalue.imag(), dom.residual, dom.iterations, solve_seconds);

  ordered_json cfg;
  cfg["problem"] = problem_config_json(f.pf, lambda, f.cf.seed);
  cfg["options"] = options_json(f.cf.opts);
  cfg["threads"] = resolve_threads(sub, f.cf);
  write_manifest(f.cf.manifest_path, "dominant", std::move(cfg),
                 seconds_since(t0));
  return exit_code_for(dom.status);
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

struct CompareFlags {
  ProblemFlags pf;
  CommonFlags cf;
  std::string lambdas_csv = "0.05,0.1,0.2";
  std::size_t seeds = 20;
  int max_order = 500;
  std::string out_path = "compare.csv";
};

int run_compare(const CLI::App* sub, CompareFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<double> lambdas = parse_double_list(f.lambdas_csv);
  if (f.seeds == 0) throw UsageError("--seeds must be at least 1");
  if (f.cf.lambda_im != 0.0)
    throw UsageError("compare sweeps real lambda lists only");

  CompareOptions copts;
  copts.rs_max_order = f.max_order;

  std::string csv = "seed,lambda,k_d,k_rs,d_converged,rs_converged\n";
  std::string summary;
  for (const double lam : lambdas) {
    std::vector<double> diffs;
    std::size_t ok_d = 0, ok_rs = 0;
    for (std::uint64_t s = 0; s < f.seeds; ++s) {
      const std::uint64_t seed = f.cf.seed + s;
      const PartitionedProblem p = build_problem(f.pf, cdouble{lam, 0.0}, seed);
      const OrderComparison c =
          compare_orders(p, p.lambda, f.cf.opts.tol, copts, f.cf.opts);
      char line[160];
      std::snprintf(line, sizeof line, "%llu,%.17g,%d,%d,%d,%d\n",
                    static_cast<unsigned long long>(seed), lam, c.k_d, c.k_rs,
                    c.d_converged ? 1 : 0, c.rs_converged ? 1 : 0);
      csv += line;
      if (c.d_converged) ++ok_d;
      if (c.rs_converged) ++ok_rs;
      if (c.d_converged && c.rs_converged)
        diffs.push_back(double(c.k_rs) - double(c.k_d));
    }
    double median = std::nan("");
    if (!diffs.empty()) {
      std::sort(diffs.begin(), diffs.end());
      const std::size_t m = diffs.size();
      median = (m % 2 == 1) ? diffs[m / 2]
                            : 0.5 * (diffs[m / 2 - 1] + diffs[m / 2]);
    }
    char line[200];
    std::snprintf(line, sizeof line,
                  "lambda=%.17g success_d=%.4f success_rs=%.4f "
                  "median_k_rs_minus_k_d=%.1f\n",
                  lam, double(ok_d) / double(f.seeds),
                  double(ok_rs) / double(f.seeds), median);
    summary += line;
  }
  write_text_file(f.out_path, csv);
  std::fputs(summary.c_str(), stdout);

  ordered_json cfg;
  cfg["problem"] = problem_config_json(f.pf, cdouble{0.0, 0.0}, f.cf.seed);
  cfg["options"] = options_json(f.cf.opts);
  cfg["lambdas"] = lambdas;
  cfg["seeds"] = f.seeds;
  cfg["max_order"] = f.max_order;
  cfg["out"] = f.out_path;
  cfg["threads"] = resolve_threads(sub, f.cf);
  write_manifest(f.cf.manifest_path, "compare", std::move(cfg),
                 seconds_since(t0));
  return 0;
}

// ---------------------------------------------------------------------------
// scan
// ---------------------------------------------------------------------------

struct ScanFlags {
  ProblemFlags pf;
  CommonFlags cf;
  std::size_t grid = 100;
  std::vector<double> window{-1.2, 1.2, -1.2, 1.2};
  std::size_t row = 0;  // 1-based; 0 = full map
  double ramp = 0.0;
  std::vector<double> overlay;
  std::string out_ppm = "scan.ppm";
  std::string out_csv = "scan.csv";
};

int run_scan(const CLI::App* sub, ScanFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  if (f.grid == 0) throw UsageError("--grid must be at least 1");
  if (f.window.size() != 4)
    throw UsageError("--window takes four numbers: re_min re_max im_min im_max");
  if (f.overlay.size() % 2 != 0)
    throw UsageError("--overlay takes re/im pairs");
  const cdouble lambda{f.cf.lambda_re, f.cf.lambda_im};
  const PartitionedProblem p = build_problem(f.pf, lambda, f.cf.seed);
  if (f.row > p.size())
    throw UsageError("--row exceeds the problem size");

  ScanGrid grid;
  grid.re_min = f.window[0];
  grid.re_max = f.window[1];
  grid.im_min = f.window[2];
  grid.im_max = f.window[3];
  grid.res_re = f.grid;
  grid.res_im = f.grid;

  ScanMode mode;
  mode.kind = f.row > 0 ? ScanMode::Kind::SingleRow : ScanMode::Kind::Full;
  mode.row = f.row > 0 ? f.row - 1 : 0;
  mode.ramp_alpha = f.ramp;

  const unsigned threads = resolve_threads(sub, f.cf);
  const DomainGrid g = scan_domain(p, grid, mode, f.cf.opts, threads);

  std::vector<cdouble> overlay;
  for (std::size_t i = 0; i + 1 < f.overlay.size(); i += 2)
    overlay.push_back(cdouble{f.overlay[i], f.overlay[i + 1]});
  render_domain(g, f.out_ppm, overlay);
  write_domain_csv(g, f.out_csv);

  std::size_t counts[3] = {0, 0, 0};
  for (const CellClass c : g.classes) ++counts[static_cast<std::size_t>(c)];
  std::printf("grid=%zux%zu converged=%zu bounded=%zu diverged=%zu\n",
              grid.res_re, grid.res_im, counts[0], counts[1], counts[2]);

  ordered_json cfg;
  cfg["problem"] = problem_config_json(f.pf, lambda, f.cf.seed);
  cfg["options"] = options_json(f.cf.opts);
  cfg["grid"] = f.grid;
  cfg["window"] = f.window;
  cfg["row"] = f.row;
  cfg["ramp"] = f.ramp;
  cfg["overlay"] = f.overlay;
  cfg["out_ppm"] = f.out_ppm;
  cfg["out_csv"] = f.out_csv;
  cfg["threads"] = threads;
  write_manifest(f.cf.manifest_path, "scan", std::move(cfg), seconds_since(t0));
  return 0;
}

// ---------------------------------------------------------------------------
// bifurcate
// ---------------------------------------------------------------------------

struct BifurcateFlags {
  ProblemFlags pf;
  CommonFlags cf;
  std::size_t row = 1;    // 1-based
  std::size_t coord = 0;  // 1-based; 0 = auto (first index != row)
  std::vector<double> interval{0.0, 1.2};
  std::size_t samples = 400;
  int transient = 1000;
  int keep = 64;
  std::string out_path = "bifurcation.csv";
};

int run_bifurcate(const CLI::App* sub, BifurcateFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  if (f.interval.size() != 2)
    throw UsageError("--interval takes two numbers: lo hi");
  const cdouble lambda{f.cf.lambda_re, f.cf.lambda_im};
  const PartitionedProblem p = build_problem(f.pf, lambda, f.cf.seed);
  if (f.row == 0 || f.row > p.size())
    throw UsageError("--row is 1-based and must be within the problem size");
  if (f.coord == 0) f.coord = f.row == 1 ? 2 : 1;
  if (f.coord > p.size() || f.coord == f.row)
    throw UsageError("--coord must name a coordinate other than --row");

  const auto samples =
      bifurcation_scan(p, f.row - 1, f.coord - 1, f.interval[0], f.interval[1],
                       f.samples, f.transient, f.keep, f.cf.opts);

  std::string csv = "lambda,value_re,value_im\n";
  for (const BifurcationSample& s : samples) {
    for (const cdouble v : s.values) {
      char line[120];
      std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", s.lambda,
                    v.real(), v.imag());
      csv += line;
    }
  }
  write_text_file(f.out_path, csv);
  std::printf("samples=%zu rows=%zu\n", samples.size(),
              static_cast<std::size_t>(
                  std::count(csv.begin(), csv.end(), '\n') - 1));

  ordered_json cfg;
  cfg["problem"] = problem_config_json(f.pf, lambda, f.cf.seed);
  cfg["options"] = options_json(f.cf.opts);
  cfg["row"] = f.row;
  cfg["coord"] = f.coord;
  cfg["interval"] = f.interval;
  cfg["samples"] = f.samples;
  cfg["transient"] = f.transient;
  cfg["keep"] = f.keep;
  cfg["out"] = f.out_path;
  cfg["threads"] = resolve_threads(sub, f.cf);
  write_manifest(f.cf.manifest_path, "bifurcate", std::move(cfg),
                 seconds_since(t0));
  return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchFlags {
  CommonFlags cf;
  std::string sizes_csv = "16";
  int reps = 5;
  double coupling = 0.5;  // lambda as a fraction of the guaranteed radius
  std::string out_path = "bench.csv";
};

template <typename F>
double median_seconds(int reps, F&& body) {
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    body();
    times.push_back(seconds_since(t0));
  }
  std::sort(times.begin(), times.end());
  const std::size_t m = times.size();
  return (m % 2 == 1) ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
}

/// Plain power iteration on the dense operator, stopped on the eigenpair
/// residual; returns the iteration count actually used.
int power_baseline(const DenseMatrix& m, std::vector<cdouble> v, double tol,
                   int max_iter) {
  const std::size_t n = m.rows();
  for (int it = 1; it <= max_iter; ++it) {
    std::vector<cdouble> w = matvec(m, v);
    const double norm = vec_inf_norm(w);
    if (!(norm > 0.0) || !std::isfinite(norm)) return it;
    for (auto& x : w) x /= norm;
    cdouble num{0.0, 0.0}, den{0.0, 0.0};
    const std::vector<cdouble> mw = matvec(m, w);
    for (std::size_t i = 0; i < n; ++i) {
      num += std::conj(w[i]) * mw[i];
      den += std::conj(w[i]) * w[i];
    }
    const cdouble rho = num / den;
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      resid = std::max(resid, std::abs(mw[i] - rho * w[i]));
    v = w;
    if (resid < tol) return it;
  }
  return max_iter;
}

/// Rayleigh-quotient iteration with dense direct solves.
int rqi_baseline(const DenseMatrix& m, std::vector<cdouble> v, double tol,
                 int max_iter) {
  const std::size_t n = m.rows();
  for (int it = 1; it <= max_iter; ++it) {
    const double norm = vec_two_norm(v);
    if (!(norm > 0.0)) return it;
    for (auto& x : v) x /= norm;
    const std::vector<cdouble> mv = matvec(m, v);
    cdouble rho{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) rho += std::conj(v[i]) * mv[i];
    double resid = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      resid = std::max(resid, std::abs(mv[i] - rho * v[i]));
    if (resid < tol) return it;
    DenseMatrix shifted = m;
    for (std::size_t i = 0; i < n; ++i) shifted(i, i) -= rho;
    try {
      v = solve_linear(shifted, v);
    } catch (const std::runtime_error&) {
      return it;  // exactly singular shift: converged to working precision
    }
  }
  return max_iter;
}

int run_bench(const CLI::App* sub, BenchFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<std::size_t> sizes = parse_size_list(f.sizes_csv);
  if (f.reps < 1) throw UsageError("--reps must be at least 1");

  std::string csv = "method,N,reps,median_seconds,ratio_to_mmt\n";
  for (const std::size_t n : sizes) {
    PartitionedProblem p = build_random_uniform(n, f.cf.seed);
    const GapMatrix theta = build_theta(p.d, f.cf.opts.degeneracy_tol);
    const double radius = guaranteed_radius(theta, p.delta);
    p.lambda = cdouble{f.coupling * radius, 0.0};

    DenseMatrix m = p.d.to_dense();
    const auto& delta = std::get<DenseMatrix>(p.delta);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) m(i, j) += p.lambda * delta(i, j);

    Rng rng = Rng::stream(f.cf.seed, "bench-start");
    std::vector<cdouble> v0(n);
    for (auto& x : v0) x = cdouble{rng.uniform(-1.0, 1.0), 0.0};

    const double t_mmt = median_seconds(f.reps, [&] {
      volatile double sink = max_abs(matmul(m, m));
      (void)sink;
    });
    const double t_full = median_seconds(f.reps, [&] {
      volatile int sink = iterate_full(p, f.cf.opts).iterations;
      (void)sink;
    });
    const double t_dom = median_seconds(f.reps, [&] {
      volatile int sink = dominant_eigenpair(p, f.cf.opts).iterations;
      (void)sink;
    });
    const double t_pow = median_seconds(f.reps, [&] {
      volatile int sink =
          power_baseline(m, v0, f.cf.opts.residual_tol, f.cf.opts.max_iter);
      (void)sink;
    });
    const double t_rqi = median_seconds(f.reps, [&] {
      volatile int sink = rqi_baseline(m, v0, f.cf.opts.residual_tol, 200);
      (void)sink;
    });

    const struct {
      const char* name;
      double t;
    } rows[] = {{"mmt", t_mmt},
                {"dpt_full", t_full},
                {"dpt_dominant", t_dom},
                {"power_iteration", t_pow},
                {"rqi", t_rqi}};
    for (const auto& r : rows) {
      char line[160];
      std::snprintf(line, sizeof line, "%s,%zu,%d,%.9e,%.6f\n", r.name, n,
                    f.reps, r.t, t_mmt > 0.0 ? r.t / t_mmt : 0.0);
      csv += line;
    }
  }
  write_text_file(f.out_path, csv);
  std::fputs(csv.c_str(), stdout);

  ordered_json cfg;
  cfg["sizes"] = sizes;
  cfg["reps"] = f.reps;
  cfg["coupling"] = f.coupling;
  cfg["seed"] = f.cf.seed;
  cfg["options"] = options_json(f.cf.opts);
  cfg["out"] = f.out_path;
  cfg["threads"] = resolve_threads(sub, f.cf);
  write_manifest(f.cf.manifest_path, "bench", std::move(cfg), seconds_since(t0));
  return 0;
}

// ---------------------------------------------------------------------------
// oscillator-export
// ---------------------------------------------------------------------------

struct ExportFlags {
  CommonFlags cf;
  std::size_t n = 100;
  std::string out_d = "d.mtx";
  std::string out_delta = "delta.mtx";
};

int run_export(const CLI::App* sub, ExportFlags& f) {
  const auto t0 = std::chrono::steady_clock::now();
  if (f.n == 0) throw UsageError("--n must be at least 1");
  const PartitionedProblem p = build_oscillator(f.n);

  std::vector<SparseMatrix::Triplet> trip;
  trip.reserve(f.n);
  for (std::size_t i = 0; i < f.n; ++i) trip.push_back({i, i, p.d.d[i]});
  write_matrix_market(SparseMatrix::from_triplets(f.n, f.n, std::move(trip)),
                      f.out_d);
  write_matrix_market(p.delta, f.out_delta);
  std::printf("wrote %s and %s (n=%zu)\n", f.out_d.c_str(),
              f.out_delta.c_str(), f.n);

  ordered_json cfg;
  cfg["n"] = f.n;
  cfg["out_d"] = f.out_d;
  cfg["out_delta"] = f.out_delta;
  cfg["threads"] = resolve_threads(sub, f.cf);
  write_manifest(f.cf.manifest_path, "oscillator-export", std::move(cfg),
                 seconds_since(t0));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "dynspec: eigenpairs of D + lambda*Delta by fixed-point iteration of a "
      "quadratic matrix map, with series baselines, convergence-domain "
      "scans, and benchmarks"};
  app.require_subcommand(1);

  SolveFlags solve_f;
  CLI::App* solve = app.add_subcommand(
      "solve", "Run the full-map iteration and report every eigenpair");
  add_problem_flags(solve, solve_f.pf);
  add_common_flags(solve, solve_f.cf, 10000);
  solve->add_option("--ramp", solve_f.ramp,
                    "Nonautonomous coupling schedule exponent alpha in (0,1)");
  solve->add_option("--homotopy", solve_f.homotopy,
                    "Number of coupling continuation stages");
  solve->add_option("--report", solve_f.report_path,
                    "Also write the report JSON to this file");
  solve->add_option("--eigvec", solve_f.eigvec_path,
                    "Write the final eigenvector matrix in Matrix Market form");

  DominantFlags dom_f;
  CLI::App* dominant = app.add_subcommand(
      "dominant", "Single-vector solve for the dominant eigenpair");
  add_problem_flags(dominant, dom_f.pf);
  add_common_flags(dominant, dom_f.cf, 10000);

  CompareFlags cmp_f;
  CLI::App* compare = app.add_subcommand(
      "compare",
      "Iterations-to-tolerance of the map vs the perturbation series over an "
      "ensemble");
  add_problem_flags(compare, cmp_f.pf);
  add_common_flags(compare, cmp_f.cf, 10000);
  compare->add_option("--lambdas", cmp_f.lambdas_csv,
                      "Comma-separated real coupling values");
  compare->add_option("--seeds", cmp_f.seeds,
                      "Ensemble size; seeds run from --seed upward");
  compare->add_option("--max-order", cmp_f.max_order,
                      "Series order budget per sample");
  compare->add_option("--out", cmp_f.out_path, "Output CSV path");

  ScanFlags scan_f;
  CLI::App* scan = app.add_subcommand(
      "scan", "Classify a grid of complex couplings by orbit fate");
  add_problem_flags(scan, scan_f.pf);
  add_common_flags(scan, scan_f.cf, 2000);
  scan->add_option("--grid", scan_f.grid, "Grid resolution per axis");
  scan->add_option("--window", scan_f.window,
                   "Scan window: re_min re_max im_min im_max")
      ->expected(4);
  scan->add_option("--row", scan_f.row,
                   "1-based chart row for a single-row scan (0 = full map)");
  scan->add_option("--ramp", scan_f.ramp,
                   "Nonautonomous schedule exponent for every cell");
  scan->add_option("--overlay", scan_f.overlay,
                   "Flat re/im pairs to mark in red on the PPM")
      ->expected(-1);
  scan->add_option("--out-ppm", scan_f.out_ppm, "Output PPM path");
  scan->add_option("--out-csv", scan_f.out_csv, "Output CSV path");

  BifurcateFlags bif_f;
  CLI::App* bifurcate = app.add_subcommand(
      "bifurcate", "Orbit diagram of one row-map coordinate over real lambda");
  add_problem_flags(bifurcate, bif_f.pf);
  add_common_flags(bifurcate, bif_f.cf, 10000);
  bifurcate->add_option("--row", bif_f.row, "1-based chart row");
  bifurcate->add_option("--coord", bif_f.coord,
                        "1-based recorded coordinate (default: first other)");
  bifurcate->add_option("--interval", bif_f.interval,
                        "Real lambda interval: lo hi")
      ->expected(2);
  bifurcate->add_option("--samples", bif_f.samples, "Lambda sample count");
  bifurcate->add_option("--transient", bif_f.transient,
                        "Iterations discarded before recording");
  bifurcate->add_option("--keep", bif_f.keep, "Iterations recorded per sample");
  bifurcate->add_option("--out", bif_f.out_path, "Output CSV path");

  BenchFlags bench_f;
  CLI::App* bench = app.add_subcommand(
      "bench",
      "Time matrix multiplication, both solvers, and the internal "
      "power-iteration and RQI baselines");
  add_common_flags(bench, bench_f.cf, 10000);
  bench->add_option("--sizes", bench_f.sizes_csv,
                    "Comma-separated problem sizes");
  bench->add_option("--reps", bench_f.reps, "Repetitions per timing");
  bench->add_option("--coupling", bench_f.coupling,
                    "Lambda as a fraction of the guaranteed contraction radius");
  bench->add_option("--out", bench_f.out_path, "Output CSV path");

  ExportFlags exp_f;
  CLI::App* exp = app.add_subcommand(
      "oscillator-export",
      "Write the oscillator fixture as Matrix Market files");
  add_common_flags(exp, exp_f.cf, 10000);
  exp->add_option("--n", exp_f.n, "Basis size");
  exp->add_option("--out-d", exp_f.out_d, "Diagonal part output path");
  exp->add_option("--out-delta", exp_f.out_delta, "Perturbation output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(solve)) return run_solve(solve, solve_f);
    if (app.got_subcommand(dominant)) return run_dominant(dominant, dom_f);
    if (app.got_subcommand(compare)) return run_compare(compare, cmp_f);
    if (app.got_subcommand(scan)) return run_scan(scan, scan_f);
    if (app.got_subcommand(bifurcate)) return run_bifurcate(bifurcate, bif_f);
    if (app.got_subcommand(bench)) return run_bench(bench, bench_f);
    if (app.got_subcommand(exp)) return run_export(exp, exp_f);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
