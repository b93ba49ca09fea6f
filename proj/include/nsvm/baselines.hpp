#pragma once

// One-vs-rest proximal-plane baselines that need only eigen or linear solves:
// GEPSVM (generalized Rayleigh quotient), LSTSVM (normal equations) and PCC
// (difference-matrix eigenproblem).

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nsvm/dataset.hpp"
#include "nsvm/error.hpp"
#include "nsvm/linalg.hpp"
#include "nsvm/matrix.hpp"
#include "nsvm/mpdcae.hpp"
#include "nsvm/nsvm_linear.hpp"

namespace nsvm {

enum class PlaneAlgorithm { Gepsvm, Lstsvm, Pcc };
enum class DistanceRule { NormalizedByW, Absolute };

inline std::string to_string(PlaneAlgorithm a) {
  switch (a) {
    case PlaneAlgorithm::Gepsvm: return "gepsvm";
    case PlaneAlgorithm::Lstsvm: return "lstsvm";
    case PlaneAlgorithm::Pcc: return "pcc";
  }
  return "?";
}

struct PlaneParams {
  double delta = 1.0;   // GEPSVM, LSTSVM
  double lambda = 1.0;  // LSTSVM
  double nu = 1.0;      // PCC
};

struct PlaneModel {
  PlaneAlgorithm algorithm = PlaneAlgorithm::Gepsvm;
  StackedWeights planes;  ///< one augmented (w_y, b_y) per class
  DistanceRule rule = DistanceRule::NormalizedByW;
  Standardizer standardizer;
  PlaneParams params;

  int K() const noexcept { return planes.K; }
  std::size_t n() const noexcept { return planes.n(); }
};

namespace detail {

/// Augmented own-class rows E and rest rows F for class y.
struct OneVsRest {
  Matrix own;
  Matrix rest;
};

inline OneVsRest split_one_vs_rest(const Dataset& d, int y) {
  std::vector<std::size_t> own;
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < d.size(); ++i) (d.y[i] == y ? own : rest).push_back(i);
  if (own.empty() || rest.empty()) throw Error(ErrorKind::EmptyClass, "class " + std::to_string(y) + " is empty");
  return {augment_with_ones(select_rows(d.X, own)), augment_with_ones(select_rows(d.X, rest))};
}

inline void check_classes(const Dataset& d) {
  for (auto c : d.class_counts())
    if (c == 0) throw Error(ErrorKind::EmptyClass, "every class needs at least one sample");
}

}  // namespace detail

/// u_y minimizes ‖E·u‖² + (δ/2)‖u‖² over ‖F·u‖² + ε‖u‖², ε = 1e-8·trace(FᵀF)/(n+1).
inline PlaneModel train_gepsvm(const Dataset& d, double delta) {
  if (!(delta >= 0.0)) throw Error(ErrorKind::BadParams, "gepsvm: delta must be nonnegative");
  detail::check_classes(d);
  const std::size_t dim = d.features() + 1;
  PlaneModel model{PlaneAlgorithm::Gepsvm, StackedWeights(d.K, dim), DistanceRule::NormalizedByW,
                   Standardizer::identity(d.features()), {}};
  model.params.delta = delta;
  for (int y = 1; y <= d.K; ++y) {
    const auto [e, f] = detail::split_one_vs_rest(d, y);
    const SymMatrix num = SymMatrix(gram_of_rows(e)).shifted(0.5 * delta);
    const SymMatrix den(gram_of_rows(f));
    const double eps = 1e-8 * den.trace() / static_cast<double>(dim);
    const auto pair = generalized_smallest(num, den, eps);
    std::copy(pair.vector.begin(), pair.vector.end(), model.planes.block(y).begin());
  }
  return model;
}

/// u_y solves (λI + EᵀE + δFᵀF)·u = −δ·Fᵀe.
inline PlaneModel train_lstsvm(const Dataset& d, double lambda, double delta) {
  if (!(lambda > 0.0)) throw Error(ErrorKind::BadParams, "lstsvm: lambda must be positive");
  if (!(delta >= 0.0)) throw Error(ErrorKind::BadParams, "lstsvm: delta must be nonnegative");
  detail::check_classes(d);
  const std::size_t dim = d.features() + 1;
  PlaneModel model{PlaneAlgorithm::Lstsvm, StackedWeights(d.K, dim), DistanceRule::Absolute,
                   Standardizer::identity(d.features()), {}};
  model.params.lambda = lambda;
  model.params.delta = delta;
  for (int y = 1; y <= d.K; ++y) {
    const auto [e, f] = detail::split_one_vs_rest(d, y);
    const SymMatrix a = SymMatrix(gram_of_rows(e)).combine(1.0, SymMatrix(gram_of_rows(f)), delta).shifted(lambda);
    Vector rhs(dim, 0.0);
    for (std::size_t i = 0; i < f.rows(); ++i)
      for (std::size_t k = 0; k < dim; ++k) rhs[k] -= delta * f(i, k);
    const Vector u = spd_solve(cholesky_factor(a), rhs);
    std::copy(u.begin(), u.end(), model.planes.block(y).begin());
  }
  return model;
}

/// λ/2‖u‖² + ½‖Eu‖² + (δ/2)‖Fu + e‖², the function LSTSVM minimizes for one class.
inline double lstsvm_objective(std::span<const double> u, const Matrix& own, const Matrix& rest, double lambda,
                               double delta) {
  double own_sq = 0.0;
  for (std::size_t i = 0; i < own.rows(); ++i) {
    const double g = dot(own.row(i), u);
    own_sq += g * g;
  }
  double rest_sq = 0.0;
  for (std::size_t i = 0; i < rest.rows(); ++i) {
    const double g = dot(rest.row(i), u) + 1.0;
    rest_sq += g * g;
  }
  return 0.5 * lambda * squared_norm(u) + 0.5 * own_sq + 0.5 * delta * rest_sq;
}

/// u_y = unit eigenvector of the smallest eigenvalue of EᵀE − ν·FᵀF.
inline PlaneModel train_pcc(const Dataset& d, double nu) {
  if (!(nu >= 0.0)) throw Error(ErrorKind::BadParams, "pcc: nu must be nonnegative");
  detail::check_classes(d);
  const std::size_t dim = d.features() + 1;
  PlaneModel model{PlaneAlgorithm::Pcc, StackedWeights(d.K, dim), DistanceRule::Absolute,
                   Standardizer::identity(d.features()), {}};
  model.params.nu = nu;
  for (int y = 1; y <= d.K; ++y) {
    const auto [e, f] = detail::split_one_vs_rest(d, y);
    const SymMatrix mtx = SymMatrix(gram_of_rows(e)).combine(1.0, SymMatrix(gram_of_rows(f)), -nu);
    const EigenDecomp eig = jacobi_eigh(mtx);
    auto dst = model.planes.block(y);
    for (std::size_t k = 0; k < dim; ++k) dst[k] = eig.vectors(k, 0);
  }
  return model;
}

inline Matrix plane_distances(const PlaneModel& model, const Matrix& x) {
  if (x.cols() != model.n()) throw Error(ErrorKind::DimensionMismatch, "predict_planes: feature count mismatch");
  const Matrix xs = model.standardizer.apply(x);
  Matrix dist(x.rows(), static_cast<std::size_t>(model.K()));
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (int y = 1; y <= model.K(); ++y) {
      const auto block = model.planes.block(y);
      double g = std::abs(plane_response(block, xs.row(i)));
      if (model.rule == DistanceRule::NormalizedByW) {
        const double nn = normal_norm(block);
        if (nn >= 1e-12) g /= nn;
      }
      dist(i, static_cast<std::size_t>(y - 1)) = g;
    }
  return dist;
}

inline std::vector<int> predict_planes(const PlaneModel& model, const Matrix& x) {
  const Matrix dist = plane_distances(model, x);
  std::vector<int> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = argmin_label(dist.row(i));
  return out;
}

}  // namespace nsvm
