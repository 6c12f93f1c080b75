#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "dynspec/matrix.hpp"
#include "dynspec/matrix_market.hpp"
#include "dynspec/rng.hpp"

using namespace dynspec;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const std::string& name) : path("mm_test_" + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_SUITE("matrix_market") {

TEST_CASE("dense complex round trip is bitwise exact") {
  TempFile f("dense.mtx");
  Rng rng = Rng::stream(31, "test-mm-dense");
  DenseMatrix m(3, 4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      m(i, j) = cdouble{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};

  write_matrix_market(m, f.path);
  const auto back = read_matrix_market(f.path);
  REQUIRE(std::holds_alternative<DenseMatrix>(back));
  const auto& d = std::get<DenseMatrix>(back);
  REQUIRE(d.rows() == 3);
  REQUIRE(d.cols() == 4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) CHECK(d(i, j) == m(i, j));
}

TEST_CASE("sparse round trip is bitwise exact and keeps sparsity") {
  TempFile f("sparse.mtx");
  std::vector<SparseMatrix::Triplet> t = {
      {0, 0, {1.25, 0.0}}, {2, 1, {-0.5, 0.0}}, {4, 4, {3.0, 0.0}}};
  const SparseMatrix m = SparseMatrix::from_triplets(5, 5, t);

  write_matrix_market(m, f.path);
  const auto back = read_matrix_market(f.path);
  REQUIRE(std::holds_alternative<SparseMatrix>(back));
  const auto& s = std::get<SparseMatrix>(back);
  CHECK(s.nnz() == 3);
  CHECK(s.at(0, 0) == cdouble{1.25, 0.0});
  CHECK(s.at(2, 1) == cdouble{-0.5, 0.0});
  CHECK(s.at(4, 4) == cdouble{3.0, 0.0});
}

TEST_CASE("real field is chosen when imaginary parts vanish") {
  TempFile f("real.mtx");
  DenseMatrix m(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = -2.0;
  write_matrix_market(m, f.path);

  std::ifstream in(f.path);
  std::string banner;
  std::getline(in, banner);
  CHECK(banner.find(" real ") != std::string::npos);

  DenseMatrix c(2, 2);
  c(0, 1) = cdouble{0.0, 1.0};
  TempFile g("complex.mtx");
  write_matrix_market(c, g.path);
  std::ifstream in2(g.path);
  std::getline(in2, banner);
  CHECK(banner.find(" complex ") != std::string::npos);
}

TEST_CASE("symmetric coordinate input expands to full storage") {
  TempFile f("sym.mtx");
  write_text(f.path,
             "%%MatrixMarket matrix coordinate real symmetric\n"
             "3 3 3\n"
             "1 1 2.0\n"
             "2 1 5.0\n"
             "3 2 -1.0\n");
  const auto back = read_matrix_market(f.path);
  REQUIRE(std::holds_alternative<SparseMatrix>(back));
  const auto& s = std::get<SparseMatrix>(back);
  CHECK(s.nnz() == 5);  // diagonal entry once, off-diagonals mirrored
  CHECK(s.at(0, 0) == cdouble{2.0, 0.0});
  CHECK(s.at(1, 0) == cdouble{5.0, 0.0});
  CHECK(s.at(0, 1) == cdouble{5.0, 0.0});
  CHECK(s.at(2, 1) == cdouble{-1.0, 0.0});
  CHECK(s.at(1, 2) == cdouble{-1.0, 0.0});
}

TEST_CASE("array real input parses column-major") {
  TempFile f("array.mtx");
  write_text(f.path,
             "%%MatrixMarket matrix array real general\n"
             "% comment line\n"
             "2 2\n"
             "1\n2\n3\n4\n");
  const auto back = read_matrix_market(f.path);
  REQUIRE(std::holds_alternative<DenseMatrix>(back));
  const auto& d = std::get<DenseMatrix>(back);
  CHECK(d(0, 0) == cdouble{1.0, 0.0});
  CHECK(d(1, 0) == cdouble{2.0, 0.0});
  CHECK(d(0, 1) == cdouble{3.0, 0.0});
  CHECK(d(1, 1) == cdouble{4.0, 0.0});
}

TEST_CASE("malformed input throws IoError") {
  TempFile f("bad.mtx");

  SUBCASE("missing file") {
    CHECK_THROWS_AS((void)read_matrix_market("definitely_missing.mtx"), IoError);
  }
  SUBCASE("bad banner") {
    write_text(f.path, "%%NotMatrixMarket nonsense\n1 1 1\n1 1 1.0\n");
    CHECK_THROWS_AS((void)read_matrix_market(f.path), IoError);
  }
  SUBCASE("pattern field unsupported") {
    write_text(f.path,
               "%%MatrixMarket matrix coordinate pattern general\n"
               "2 2 1\n1 1\n");
    CHECK_THROWS_AS((void)read_matrix_market(f.path), IoError);
  }
  SUBCASE("index out of bounds") {
    write_text(f.path,
               "%%MatrixMarket matrix coordinate real general\n"
               "2 2 1\n3 1 1.0\n");
    CHECK_THROWS_AS((void)read_matrix_market(f.path), IoError);
  }
  SUBCASE("truncated data") {
    write_text(f.path,
               "%%MatrixMarket matrix coordinate real general\n"
               "2 2 2\n1 1 1.0\n");
    CHECK_THROWS_AS((void)read_matrix_market(f.path), IoError);
  }
}

}  // TEST_SUITE
