// End-to-end tests of the dynspec binary: exit-code contract, output file
// formats, and reproducibility. Each case runs in its own temp directory.

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "dynspec/matrix.hpp"
#include "dynspec/matrix_market.hpp"

namespace {

using dynspec::cdouble;
using dynspec::DenseMatrix;

struct CliResult {
  int exit_code = -1;
  std::string out;  // stdout and stderr interleaved
};

CliResult run_cli(const std::string& dir, const std::string& args) {
  const std::string cmd = "cd " + dir + " && " + DYNSPEC_BIN + " " + args + " 2>&1";
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  CliResult r;
  char buf[4096];
  std::size_t got = 0;
  while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

struct TempDir {
  std::string path;
  TempDir() {
    char tmpl[] = "/tmp/dynspec-cli-XXXXXX";
    REQUIRE(::mkdtemp(tmpl) != nullptr);
    path = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (const char c : text)
    if (c == '\n') ++n;
  return n;
}

void write_diag_2x2(const std::string& path, double a, double b) {
  DenseMatrix d(2, 2);
  d(0, 0) = a;
  d(1, 1) = b;
  dynspec::write_matrix_market(d, path);
}

void write_offdiag_2x2(const std::string& path) {
  DenseMatrix m(2, 2);
  m(0, 1) = 1.0;
  m(1, 0) = 1.0;
  dynspec::write_matrix_market(m, path);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("solve on the symmetric pair reports the closed-form eigenvalues") {
  TempDir td;
  const CliResult r = run_cli(td.path, "solve --two-by-two --lambda 0.1");
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["status"] == "Converged");
  const double lo = (1.0 - std::sqrt(1.04)) / 2.0;
  const double hi = (1.0 + std::sqrt(1.04)) / 2.0;
  CHECK(std::abs(j["eigenvalues"][0][0].get<double>() - lo) < 1e-8);
  CHECK(std::abs(j["eigenvalues"][1][0].get<double>() - hi) < 1e-8);
  CHECK(std::abs(j["eigenvalues"][0][1].get<double>()) < 1e-12);
}

TEST_CASE("solve from matrix files at zero coupling returns the diagonal") {
  TempDir td;
  write_diag_2x2(td.path + "/d.mtx", 7.0, 3.0);
  write_offdiag_2x2(td.path + "/delta.mtx");
  const CliResult r =
      run_cli(td.path, "solve --file-d d.mtx --file-delta delta.mtx --lambda 0");
  CHECK(r.exit_code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["iterations"] == 1);
  CHECK(j["eigenvalues"][0][0].get<double>() == doctest::Approx(7.0));
  CHECK(j["eigenvalues"][1][0].get<double>() == doctest::Approx(3.0));
}

TEST_CASE("solve exits 2 when the orbit settles on a cycle instead") {
  TempDir td;
  const CliResult r = run_cli(td.path, "solve --two-by-two --lambda 1.0");
  CHECK(r.exit_code == 2);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["status"] == "BoundedNonConverged");
}

TEST_CASE("homotopy mode rescues a coupling the direct run cannot reach") {
  TempDir td;
  const CliResult direct = run_cli(td.path, "solve --two-by-two --lambda 1.2");
  CHECK(direct.exit_code == 2);
  const CliResult cont =
      run_cli(td.path, "solve --two-by-two --lambda 1.2 --homotopy 4");
  CHECK(cont.exit_code == 0);
  const auto j = nlohmann::json::parse(cont.out);
  CHECK(std::abs(j["eigenvalues"][0][0].get<double>() - (-0.8)) < 1e-8);
  CHECK(std::abs(j["eigenvalues"][1][0].get<double>() - 1.8) < 1e-8);
}

TEST_CASE("usage errors exit 1") {
  TempDir td;
  CHECK(run_cli(td.path, "solve --two-by-two --oscillator 5").exit_code == 1);
  CHECK(run_cli(td.path, "solve --lambda 0.1").exit_code == 1);
  CHECK(run_cli(td.path, "solve --no-such-flag").exit_code == 1);
  CHECK(run_cli(td.path, "solve --file-d only_d.mtx").exit_code == 1);
  CHECK(run_cli(td.path, "solve --two-by-two --ramp 0.5 --homotopy 2").exit_code == 1);
  CHECK(run_cli(td.path, "").exit_code == 1);
}

TEST_CASE("a non-diagonal D file is rejected as input error") {
  TempDir td;
  write_offdiag_2x2(td.path + "/d.mtx");
  write_offdiag_2x2(td.path + "/delta.mtx");
  const CliResult r =
      run_cli(td.path, "solve --file-d d.mtx --file-delta delta.mtx --lambda 0.1");
  CHECK(r.exit_code == 1);
  CHECK(r.out.find("off-diagonal") != std::string::npos);
}

TEST_CASE("missing input file is an input error") {
  TempDir td;
  const CliResult r = run_cli(
      td.path, "solve --file-d nope.mtx --file-delta nope2.mtx --lambda 0.1");
  CHECK(r.exit_code == 1);
}

TEST_CASE("dominant prints a parseable eigenpair line") {
  TempDir td;
  const CliResult r = run_cli(td.path, "dominant --oscillator 8 --lambda 0");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("status=Converged") != std::string::npos);
  CHECK(r.out.find("iterations=1") != std::string::npos);
  CHECK(r.out.find("eigenvalue_re=14.5") != std::string::npos);
  CHECK(r.out.find("wall_seconds=") != std::string::npos);
}

TEST_CASE("dominant exits 1 when the top of the spectrum is ambiguous") {
  TempDir td;
  write_diag_2x2(td.path + "/d.mtx", 2.0, 2.0);
  write_offdiag_2x2(td.path + "/delta.mtx");
  const CliResult r = run_cli(
      td.path, "dominant --file-d d.mtx --file-delta delta.mtx --lambda 0.1");
  CHECK(r.exit_code == 1);
  CHECK(r.out.find("dominant") != std::string::npos);
}

TEST_CASE("dominant on a sparse perturbed oscillator converges in few steps") {
  TempDir td;
  const CliResult r = run_cli(td.path, "dominant --er 2000 --lambda 0.01");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("status=Converged") != std::string::npos);
}

TEST_CASE("report files from identical runs are byte-identical") {
  TempDir td;
  CHECK(run_cli(td.path, "solve --two-by-two --lambda 0.3 --report a.json "
                         "--eigvec vec.mtx").exit_code == 0);
  CHECK(run_cli(td.path, "solve --two-by-two --lambda 0.3 --report b.json")
            .exit_code == 0);
  CHECK(slurp(td.path + "/a.json") == slurp(td.path + "/b.json"));

  const auto var = dynspec::read_matrix_market(td.path + "/vec.mtx");
  const auto& a = std::get<DenseMatrix>(var);
  REQUIRE(a.rows() == 2);
  CHECK(a(0, 0) == cdouble{1.0, 0.0});
  CHECK(a(1, 1) == cdouble{1.0, 0.0});
  CHECK(std::abs(a(0, 1)) > 0.1);  // settled chart coordinate
}

TEST_CASE("manifest captures the configuration of every run") {
  TempDir td;
  CHECK(run_cli(td.path, "solve --two-by-two --lambda 0.25 --seed 9 "
                         "--manifest m.json").exit_code == 0);
  const auto m = nlohmann::json::parse(slurp(td.path + "/m.json"));
  CHECK(m["subcommand"] == "solve");
  CHECK(m["config"]["problem"]["kind"] == "two-by-two");
  CHECK(m["config"]["problem"]["seed"] == 9);
  CHECK(m["config"]["problem"]["lambda"][0].get<double>() == doctest::Approx(0.25));
  CHECK(m["config"]["options"]["tol"].get<double>() == doctest::Approx(1e-12));
  CHECK(m["library_version"].is_string());
  CHECK(m["wall_seconds"].get<double>() >= 0.0);
}

TEST_CASE("scan writes one CSV row per cell plus headers and a PPM image") {
  TempDir td;
  const CliResult r = run_cli(td.path, "scan --two-by-two --grid 12 --threads 1");
  CHECK(r.exit_code == 0);
  const std::string csv = slurp(td.path + "/scan.csv");
  CHECK(count_lines(csv) == 12 * 12 + 2);
  const std::string ppm = slurp(td.path + "/scan.ppm");
  const std::string header = "P6\n12 12\n255\n";
  CHECK(ppm.rfind(header, 0) == 0);
  CHECK(ppm.size() == header.size() + 3 * 12 * 12);
}

TEST_CASE("single-row scan with a ramp differs from the autonomous scan") {
  TempDir td;
  CHECK(run_cli(td.path, "scan --three-by-three --row 2 --grid 24 --threads 1 "
                         "--out-csv auto.csv --out-ppm auto.ppm").exit_code == 0);
  CHECK(run_cli(td.path, "scan --three-by-three --row 2 --grid 24 --threads 1 "
                         "--ramp 0.9 --out-csv ramp.csv --out-ppm ramp.ppm")
            .exit_code == 0);
  CHECK(slurp(td.path + "/auto.csv") != slurp(td.path + "/ramp.csv"));
}

TEST_CASE("scan row bound and window arity are validated") {
  TempDir td;
  CHECK(run_cli(td.path, "scan --two-by-two --row 3 --grid 4").exit_code == 1);
  CHECK(run_cli(td.path, "scan --two-by-two --window 0 1 --grid 4").exit_code == 1);
}

TEST_CASE("bifurcate records keep values per non-escaping sample") {
  TempDir td;
  const CliResult r = run_cli(
      td.path,
      "bifurcate --two-by-two --interval 0 1.2 --samples 10 --transient 300 "
      "--keep 4");
  CHECK(r.exit_code == 0);
  const std::string csv = slurp(td.path + "/bifurcation.csv");
  CHECK(count_lines(csv) == 10 * 4 + 1);
  CHECK(csv.rfind("lambda,value_re,value_im\n", 0) == 0);
}

TEST_CASE("compare emits the per-seed CSV and a per-lambda summary") {
  TempDir td;
  const CliResult r = run_cli(
      td.path, "compare --random-uniform 8 --lambdas 0.02 --seeds 3");
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("success_d=1.0000") != std::string::npos);
  CHECK(r.out.find("success_rs=1.0000") != std::string::npos);
  const std::string csv = slurp(td.path + "/compare.csv");
  CHECK(count_lines(csv) == 1 + 3);
  CHECK(csv.rfind("seed,lambda,k_d,k_rs,d_converged,rs_converged\n", 0) == 0);
}

TEST_CASE("bench smoke run reports all five methods") {
  TempDir td;
  const CliResult r = run_cli(td.path, "bench --sizes 16 --reps 1");
  CHECK(r.exit_code == 0);
  const std::string csv = slurp(td.path + "/bench.csv");
  CHECK(count_lines(csv) == 1 + 5);
  for (const char* method :
       {"mmt,16,", "dpt_full,16,", "dpt_dominant,16,", "power_iteration,16,",
        "rqi,16,"})
    CHECK(csv.find(method) != std::string::npos);
}

TEST_CASE("oscillator export round-trips through the matrix reader") {
  TempDir td;
  CHECK(run_cli(td.path, "oscillator-export --n 6").exit_code == 0);
  const auto dv = dynspec::read_matrix_market(td.path + "/d.mtx");
  const auto& d = std::get<dynspec::SparseMatrix>(dv);
  REQUIRE(d.rows() == 6);
  for (std::size_t i = 0; i < 6; ++i)
    CHECK(d.at(i, i) == cdouble{2.0 * double(i) + 0.5, 0.0});
  const auto deltav = dynspec::read_matrix_market(td.path + "/delta.mtx");
  const auto& delta = std::get<DenseMatrix>(deltav);
  REQUIRE(delta.rows() == 6);
  CHECK(std::abs(delta(0, 0).real() - 0.5641895835477563) < 1e-12);
  CHECK(delta(1, 2) == delta(2, 1));
}

}  // TEST_SUITE
