#include "dynspec/roots.hpp"

#include <algorithm>
#include <cmath>

namespace dynspec {

std::vector<cdouble> characteristic_polynomial(const DenseMatrix& a) {
  if (!a.is_square()) throw ShapeError("characteristic_polynomial: non-square");
  const std::size_t n = a.rows();
  std::vector<cdouble> c(n + 1, cdouble{});
  c[n] = 1.0;
  DenseMatrix b = DenseMatrix::identity(n);
  for (std::size_t k = 1; k <= n; ++k) {
    b = matmul(a, b);
    cdouble tr{};
    for (std::size_t i = 0; i < n; ++i) tr += b(i, i);
    const cdouble ck = -tr / double(k);
    c[n - k] = ck;
    for (std::size_t i = 0; i < n; ++i) b(i, i) += ck;
  }
  return c;
}

std::vector<cdouble> durand_kerner(std::span<const cdouble> coeffs, double tol,
                                   int max_iter) {
  std::vector<cdouble> c(coeffs.begin(), coeffs.end());
  while (!c.empty() && std::abs(c.back()) == 0.0) c.pop_back();
  if (c.size() < 2) return {};

  // Deflate exact zero roots so multiplicity at the origin cannot stall the
  // simultaneous iteration.
  std::vector<cdouble> roots;
  std::size_t shift = 0;
  while (shift + 1 < c.size() && std::abs(c[shift]) == 0.0) {
    roots.push_back(cdouble{});
    ++shift;
  }
  const std::size_t deg = c.size() - 1 - shift;
  if (deg == 0) return roots;

  std::vector<cdouble> m(deg + 1);
  for (std::size_t i = 0; i <= deg; ++i) m[i] = c[shift + i] / c.back();

  std::vector<cdouble> w(deg);
  const cdouble g{0.4, 0.9};
  cdouble p{1.0, 0.0};
  for (std::size_t i = 0; i < deg; ++i) {
    p *= g;
    w[i] = p;
  }

  const auto eval = [&](cdouble x) {
    cdouble v = m[deg];
    for (std::size_t i = deg; i-- > 0;) v = v * x + m[i];
    return v;
  };

  double last_move = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    double move = 0.0;
    for (std::size_t i = 0; i < deg; ++i) {
      cdouble denom{1.0, 0.0};
      for (std::size_t j = 0; j < deg; ++j)
        if (j != i) denom *= w[i] - w[j];
      if (denom == cdouble{}) {
        // Coincident iterates: nudge deterministically and retry next sweep.
        w[i] += cdouble{1e-8 * (double(i) + 1.0), 1e-8};
        move = 1.0;
        continue;
      }
      const cdouble delta = eval(w[i]) / denom;
      w[i] -= delta;
      move = std::max(move, std::abs(delta));
    }
    last_move = move;
    if (move < tol) {
      roots.insert(roots.end(), w.begin(), w.end());
      return roots;
    }
  }

  // Accept nearly-multiple roots when every residual is tiny relative to the
  // coefficient scale even though iterates still wander at the tol level.
  double scale = 0.0;
  for (const cdouble& mi : m) scale = std::max(scale, std::abs(mi));
  double worst = 0.0;
  for (std::size_t i = 0; i < deg; ++i) worst = std::max(worst, std::abs(eval(w[i])));
  if (worst <= 1e-10 * std::max(scale, 1.0)) {
    roots.insert(roots.end(), w.begin(), w.end());
    return roots;
  }
  throw RootSolveError("durand_kerner: no convergence (last move " +
                       std::to_string(last_move) + ")");
}

std::vector<cdouble> eigenvalues_dense_small(const DenseMatrix& a, double tol) {
  return durand_kerner(characteristic_polynomial(a), tol);
}

}  // namespace dynspec
