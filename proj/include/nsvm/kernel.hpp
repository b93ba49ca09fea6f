#pragma once

#include <cmath>
#include <span>
#include <string>

#include "nsvm/error.hpp"
#include "nsvm/linalg.hpp"
#include "nsvm/matrix.hpp"

namespace nsvm {

enum class KernelKind { Linear, Rbf };

/// Rbf uses exp(−‖x−z‖²/(2σ²)).
struct KernelSpec {
  KernelKind kind = KernelKind::Rbf;
  double sigma = 1.0;

  static KernelSpec linear() { return {KernelKind::Linear, 1.0}; }
  static KernelSpec rbf(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw Error(ErrorKind::BadParams, "rbf sigma must be positive");
    return {KernelKind::Rbf, sigma};
  }

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;
};

inline std::string to_string(KernelKind k) { return k == KernelKind::Linear ? "linear" : "rbf"; }

inline double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> z) {
  if (x.size() != z.size()) throw Error(ErrorKind::DimensionMismatch, "kernel_eval: vector lengths differ");
  if (spec.kind == KernelKind::Linear) return dot(x, z);
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - z[i];
    d2 += d * d;
  }
  if (d2 == 0.0) return 1.0;
  return std::exp(-d2 / (2.0 * spec.sigma * spec.sigma));
}

/// K(X,X); only the upper triangle is evaluated.
inline SymMatrix gram(const KernelSpec& spec, const Matrix& x) {
  const std::size_t m = x.rows();
  Matrix k(m, m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      const double v = kernel_eval(spec, x.row(i), x.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  return SymMatrix(std::move(k));
}

/// K(X,Z)[i][j] = kernel_eval(x_i, z_j).
inline Matrix cross_gram(const KernelSpec& spec, const Matrix& x, const Matrix& z) {
  if (x.cols() != z.cols()) throw Error(ErrorKind::DimensionMismatch, "cross_gram: feature counts differ");
  Matrix k(x.rows(), z.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < z.rows(); ++j) k(i, j) = kernel_eval(spec, x.row(i), z.row(j));
  return k;
}

}  // namespace nsvm
