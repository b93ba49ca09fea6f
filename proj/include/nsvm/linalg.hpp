#pragma once

// Dense symmetric linear algebra used by the solvers: Cholesky, cyclic Jacobi,
// and the Cholesky-reduced generalized symmetric eigenproblem.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nsvm/error.hpp"
#include "nsvm/matrix.hpp"

namespace nsvm {

/// Square matrix with exactly symmetric storage. Construction replaces M by (M+Mᵀ)/2.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(Matrix m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) throw Error(ErrorKind::DimensionMismatch, "SymMatrix must be square");
    for (std::size_t i = 0; i < m_.rows(); ++i)
      for (std::size_t j = i + 1; j < m_.cols(); ++j) {
        const double v = 0.5 * (m_(i, j) + m_(j, i));
        m_(i, j) = v;
        m_(j, i) = v;
      }
  }

  SymMatrix(std::initializer_list<std::initializer_list<double>> init) : SymMatrix(Matrix(init)) {}

  static SymMatrix identity(std::size_t n) { return SymMatrix(Matrix::identity(n)); }
  static SymMatrix diagonal(std::span<const double> d) { return SymMatrix(Matrix::diagonal(d)); }

  std::size_t dim() const noexcept { return m_.rows(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return m_(i, j); }
  const Matrix& matrix() const noexcept { return m_; }

  double trace() const noexcept {
    double t = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) t += m_(i, i);
    return t;
  }

  /// Returns this + s·I.
  SymMatrix shifted(double s) const {
    SymMatrix out = *this;
    for (std::size_t i = 0; i < dim(); ++i) out.m_(i, i) += s;
    return out;
  }

  /// Returns a·this + b·other.
  SymMatrix combine(double a, const SymMatrix& other, double b) const {
    if (other.dim() != dim()) throw Error(ErrorKind::DimensionMismatch, "SymMatrix::combine");
    SymMatrix out = *this;
    auto dst = out.m_.data();
    const auto src = other.m_.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = a * dst[k] + b * src[k];
    return out;
  }

  double quadratic_form(std::span<const double> x) const {
    if (x.size() != dim()) throw Error(ErrorKind::DimensionMismatch, "quadratic_form");
    double s = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
      const auto r = m_.row(i);
      double ri = 0.0;
      for (std::size_t j = 0; j < dim(); ++j) ri += r[j] * x[j];
      s += x[i] * ri;
    }
    return s;
  }

 private:
  Matrix m_;
};

/// Lower-triangular Cholesky factor: source = lower·lowerᵀ.
struct CholFactor {
  std::size_t dim = 0;
  Matrix lower;
};

/// Factor a symmetric positive definite matrix. A pivot at or below
/// 1e-14·trace(A)/dim is reported as NotPositiveDefinite.
inline CholFactor cholesky_factor(const SymMatrix& a) {
  const std::size_t n = a.dim();
  if (n == 0) throw Error(ErrorKind::DimensionMismatch, "cholesky_factor: empty matrix");
  const double threshold = 1e-14 * std::abs(a.trace()) / static_cast<double>(n);
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > threshold)) {
      throw Error(ErrorKind::NotPositiveDefinite,
                  "pivot " + std::to_string(j) + " = " + std::to_string(d) + " below tolerance");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return {n, std::move(l)};
}

/// Solves lower·y = b in place.
inline void forward_substitute(const CholFactor& f, std::span<double> b) {
  for (std::size_t i = 0; i < f.dim; ++i) {
    double s = b[i];
    const auto r = f.lower.row(i);
    for (std::size_t k = 0; k < i; ++k) s -= r[k] * b[k];
    b[i] = s / r[i];
  }
}

/// Solves lowerᵀ·x = y in place.
inline void back_substitute(const CholFactor& f, std::span<double> y) {
  for (std::size_t ii = f.dim; ii-- > 0;) {
    double s = y[ii];
    for (std::size_t k = ii + 1; k < f.dim; ++k) s -= f.lower(k, ii) * y[k];
    y[ii] = s / f.lower(ii, ii);
  }
}

inline Vector spd_solve(const CholFactor& f, std::span<const double> b) {
  if (b.size() != f.dim) throw Error(ErrorKind::DimensionMismatch, "spd_solve: rhs length");
  Vector x(b.begin(), b.end());
  forward_substitute(f, x);
  back_substitute(f, x);
  return x;
}

struct EigenDecomp {
  Vector values;   ///< ascending
  Matrix vectors;  ///< column k pairs with values[k]
};

namespace detail {

/// Cyclic Jacobi sweeps on `a` in place until the off-diagonal Frobenius mass is at most
/// tol·‖A‖_F. Rotations are accumulated into `v` when it is non-null.
inline void jacobi_diagonalize(Matrix& a, Matrix* v, double tol, int max_sweeps) {
  if (!(tol > 0.0)) throw Error(ErrorKind::BadParams, "jacobi_eigh: tol must be positive");
  const std::size_t n = a.rows();
  const double target = tol * frobenius(a);
  if (!std::isfinite(target)) throw Error(ErrorKind::NumericalFailure, "jacobi_eigh: non-finite matrix entry");

  auto off_mass = [&] {
    double s = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += a(p, q) * a(p, q);
    return std::sqrt(2.0 * s);
  };

  for (int sweep = 0; sweep <= max_sweeps; ++sweep) {
    if (off_mass() <= target) return;
    if (sweep == max_sweeps) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        const double h = t * apq;
        a(p, p) -= h;
        a(q, q) += h;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        auto row_p = a.row(p);
        auto row_q = a.row(q);
        for (std::size_t j = 0; j < n; ++j) {
          if (j == p || j == q) continue;
          const double g = row_p[j];
          const double hh = row_q[j];
          const double np = g - s * (hh + g * tau);
          const double nq = hh + s * (g - hh * tau);
          row_p[j] = np;
          row_q[j] = nq;
          a(j, p) = np;
          a(j, q) = nq;
        }
        if (v) {
          for (std::size_t j = 0; j < n; ++j) {
            const double g = (*v)(j, p);
            const double hh = (*v)(j, q);
            (*v)(j, p) = g - s * (hh + g * tau);
            (*v)(j, q) = hh + s * (g - hh * tau);
          }
        }
      }
    }
  }
  throw Error(ErrorKind::NoConvergence, "jacobi_eigh: no convergence after " + std::to_string(max_sweeps) + " sweeps");
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition. Stops once the off-diagonal Frobenius
/// mass is at most tol·‖A‖_F.
inline EigenDecomp jacobi_eigh(const SymMatrix& sym, double tol = 1e-14, int max_sweeps = 100) {
  const std::size_t n = sym.dim();
  Matrix a = sym.matrix();
  Matrix v = Matrix::identity(n);
  detail::jacobi_diagonalize(a, &v, tol, max_sweeps);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) < a(y, y); });
  EigenDecomp out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    for (std::size_t j = 0; j < n; ++j) out.vectors(j, k) = v(j, order[k]);
  }
  return out;
}

/// Eigenvalues only, ascending; the same rotations as jacobi_eigh without accumulating vectors.
inline Vector jacobi_eigenvalues(const SymMatrix& sym, double tol = 1e-14, int max_sweeps = 100) {
  Matrix a = sym.matrix();
  detail::jacobi_diagonalize(a, nullptr, tol, max_sweeps);
  Vector values(sym.dim());
  for (std::size_t k = 0; k < values.size(); ++k) values[k] = a(k, k);
  std::sort(values.begin(), values.end());
  return values;
}

/// Smallest eigenvalue of diag(blocks), computed block by block.
inline double min_eig_blockdiag(std::span<const SymMatrix> blocks) {
  if (blocks.empty()) throw Error(ErrorKind::EmptyBlockList, "min_eig_blockdiag: no blocks");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& b : blocks) best = std::min(best, jacobi_eigenvalues(b).front());
  return best;
}

struct GeneralizedEigenpair {
  double value = 0.0;
  Vector vector;  ///< unit Euclidean norm
};

/// Smallest λ and unit u with G·u = λ·(H + ridge·I)·u. The denominator is
/// Cholesky-factored and the problem reduced to L⁻¹·G·L⁻ᵀ.
inline GeneralizedEigenpair generalized_smallest(const SymMatrix& g, const SymMatrix& h, double ridge) {
  if (g.dim() != h.dim()) throw Error(ErrorKind::DimensionMismatch, "generalized_smallest: G and H differ in size");
  if (ridge < 0.0) throw Error(ErrorKind::BadParams, "generalized_smallest: negative ridge");
  const std::size_t n = g.dim();
  const CholFactor f = cholesky_factor(h.shifted(ridge));

  // Y = L⁻¹·G, column by column; then C = L⁻¹·Yᵀ = L⁻¹·G·L⁻ᵀ.
  Matrix y(n, n);
  Vector col(n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = g(i, j);
    forward_substitute(f, col);
    for (std::size_t i = 0; i < n; ++i) y(i, j) = col[i];
  }
  Matrix c(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) col[i] = y(j, i);
    forward_substitute(f, col);
    for (std::size_t i = 0; i < n; ++i) c(i, j) = col[i];
  }
  const EigenDecomp e = jacobi_eigh(SymMatrix(std::move(c)));

  Vector u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = e.vectors(i, 0);
  back_substitute(f, u);
  const double nu = norm2(u);
  for (double& x : u) x /= nu;
  return {e.values.front(), std::move(u)};
}

}  // namespace nsvm
