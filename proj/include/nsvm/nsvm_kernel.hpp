#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "nsvm/dataset.hpp"
#include "nsvm/error.hpp"
#include "nsvm/kernel.hpp"
#include "nsvm/linalg.hpp"
#include "nsvm/matrix.hpp"
#include "nsvm/mpdcae.hpp"
#include "nsvm/nsvm_linear.hpp"

namespace nsvm {

/// Decision rule for the kernel model.
enum class KernelRule {
  NormConsistent,  ///< |α_yᵀψ(x)| / √(α_yᵀKα_y), the kernel analogue of |g|/‖w‖
  Printed,         ///< |α_yᵀψ(x)| / (α_yᵀ(K + eeᵀ)α_y)
};

/// Rows ψ_i = K(x_i, X)ᵀ + e for the given cross-Gram rows.
inline Matrix psi_rows(Matrix cross) {
  for (double& v : cross.data()) v += 1.0;
  return cross;
}

/// 1e-10 · mean Gram diagonal.
inline double default_gram_ridge(const SymMatrix& k) {
  return 1e-10 * k.trace() / static_cast<double>(k.dim());
}

/// G_y = ½K(X,X) + (C1+C2)·Σ_{y_i=y} ψ_i ψ_iᵀ + ridge·I.
inline std::vector<SymMatrix> assemble_G_kernel(const Dataset& d, const SymMatrix& gram_xx, double c1, double c2,
                                                double ridge) {
  const std::size_t m = d.size();
  if (gram_xx.dim() != m) throw Error(ErrorKind::DimensionMismatch, "assemble_G_kernel: Gram size mismatch");
  const Matrix psi = psi_rows(gram_xx.matrix());
  std::vector<Matrix> g(static_cast<std::size_t>(d.K));
  std::vector<bool> seen(static_cast<std::size_t>(d.K), false);
  for (auto& block : g) {
    block = gram_xx.matrix();
    for (double& v : block.data()) v *= 0.5;
    for (std::size_t k = 0; k < m; ++k) block(k, k) += ridge;
  }
  const double c = c1 + c2;
  for (std::size_t i = 0; i < m; ++i) {
    auto& block = g[static_cast<std::size_t>(d.y[i] - 1)];
    seen[static_cast<std::size_t>(d.y[i] - 1)] = true;
    const auto f = psi.row(i);
    for (std::size_t a = 0; a < m; ++a) {
      const double ca = c * f[a];
      auto row = block.row(a);
      for (std::size_t b = a; b < m; ++b) row[b] += ca * f[b];
    }
  }
  std::vector<SymMatrix> out;
  out.reserve(g.size());
  for (std::size_t y = 0; y < g.size(); ++y) {
    if (!seen[y]) throw Error(ErrorKind::EmptyClass, "class " + std::to_string(y + 1) + " has no samples");
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < a; ++b) g[y](a, b) = g[y](b, a);
    out.emplace_back(std::move(g[y]));
  }
  return out;
}

inline std::vector<SymMatrix> assemble_G_kernel(const Dataset& d, const KernelSpec& kernel, double c1, double c2,
                                                std::optional<double> ridge = std::nullopt) {
  const SymMatrix k = gram(kernel, d.X);
  return assemble_G_kernel(d, k, c1, c2, ridge.value_or(default_gram_ridge(k)));
}

/// ½Σα_yᵀKα_y + C1·Σ(ψ_iᵀα_{y_i})² + C2·Σ max_{j≠y_i} max{(ψ_iᵀα_{y_i})² − (ψ_iᵀα_j)², 0}.
inline double kernel_nsvm_objective(const StackedWeights& alpha, const SymMatrix& gram_xx, std::span<const int> labels,
                                    double c1, double c2) {
  const Matrix psi = psi_rows(gram_xx.matrix());
  double reg = 0.0;
  for (int y = 1; y <= alpha.K; ++y) reg += gram_xx.quadratic_form(alpha.block(y));
  double fit = 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < psi.rows(); ++i) {
    const double own = dot(psi.row(i), alpha.block(labels[i]));
    fit += own * own;
    double worst = 0.0;
    for (int j = 1; j <= alpha.K; ++j) {
      if (j == labels[i]) continue;
      const double other = dot(psi.row(i), alpha.block(j));
      worst = std::max(worst, own * own - other * other);
    }
    loss += worst;
  }
  return 0.5 * reg + c1 * fit + c2 * loss;
}

struct KernelNsvmModel {
  StackedWeights alpha;  ///< K blocks of length m
  Matrix train_X;        ///< standardized training rows, kept for the representer
  KernelSpec kernel;
  double gram_ridge = 0.0;
  Standardizer standardizer;
  std::vector<bool> degenerate;
  KernelRule rule = KernelRule::NormConsistent;
  NsvmConfig config;

  int K() const noexcept { return alpha.K; }
  std::size_t n() const noexcept { return train_X.cols(); }
};

/// Degenerate when ‖v_y‖² = α_yᵀKα_y ≤ 1e-16·α_yᵀ(K + eeᵀ)α_y, mirroring the primal test.
inline std::vector<bool> degenerate_alphas(const StackedWeights& alpha, const SymMatrix& gram_xx) {
  std::vector<bool> flags;
  for (int y = 1; y <= alpha.K; ++y) {
    const auto a = alpha.block(y);
    const double vv = gram_xx.quadratic_form(a);
    double bias = 0.0;
    for (double v : a) bias += v;
    flags.push_back(!(vv > 1e-16 * (vv + bias * bias)));
  }
  return flags;
}

/// Whitened coordinates of the numerical range of Ψ = K + eeᵀ = BΛBᵀ (eigenvalues above
/// 1e-12 of the largest). With α = B·Λ^{-1/2}·c, ‖c‖² = αᵀΨα = ‖v‖² + d², the squared norm of
/// the implicit primal plane (v, d), and ψ_iᵀα = (B·Λ^{1/2})_i·c.
struct RkhsCoordinates {
  Matrix to_alpha;  ///< m × r, α = to_alpha · c
  Matrix features;  ///< m × r, row i = ψ_iᵀ · to_alpha
};

inline RkhsCoordinates rkhs_coordinates(const SymMatrix& psi) {
  const EigenDecomp e = jacobi_eigh(psi);
  const double top = e.values.empty() ? 0.0 : e.values.back();
  std::vector<std::size_t> keep;
  for (std::size_t k = e.values.size(); k-- > 0;)
    if (e.values[k] > 1e-12 * top) keep.push_back(k);
  const std::size_t m = psi.dim();
  RkhsCoordinates c{Matrix(m, keep.size()), Matrix(m, keep.size())};
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const double lam = e.values[keep[j]];
    const double root = std::sqrt(lam);
    for (std::size_t i = 0; i < m; ++i) {
      c.to_alpha(i, j) = e.vectors(i, keep[j]) / root;
      c.features(i, j) = e.vectors(i, keep[j]) * root;
    }
  }
  return c;
}

/// Start whose training responses equal those of the primal start drawn with the same seed:
/// c⁰_y = Λ^{-1/2}Bᵀ(Z·w⁰_y), the least-squares fit in the whitened coordinates.
inline StackedWeights matched_start(const RkhsCoordinates& coords, const Matrix& x, int k, std::uint64_t seed) {
  const StackedWeights w0 = random_weights(k, x.cols() + 1, seed);
  const Matrix z = augment_with_ones(x);
  const std::size_t r = coords.features.cols();
  StackedWeights c(k, r);
  for (int y = 1; y <= k; ++y) {
    const Vector target = matvec(z, w0.block(y));
    auto dst = c.block(y);
    for (std::size_t i = 0; i < target.size(); ++i) {
      const auto a = coords.to_alpha.row(i);
      for (std::size_t j = 0; j < r; ++j) dst[j] += a[j] * target[i];
    }
  }
  return c;
}

/// Tᵀ·G·T.
inline SymMatrix congruence(const SymMatrix& g, const Matrix& t) { return SymMatrix(matmul(t.transpose(), matmul(g.matrix(), t))); }

struct KernelTrainResult {
  KernelNsvmModel model;
  SolverTrace trace;
};

/// Trains on `d` as given (identity standardizer); ridge defaults to 1e-10·mean Gram diagonal.
inline KernelTrainResult train_kernel(const Dataset& d, const KernelSpec& kernel, const NsvmConfig& cfg,
                                      std::optional<double> ridge = std::nullopt) {
  cfg.validate();
  const SymMatrix k = gram(kernel, d.X);
  const double r = ridge.value_or(default_gram_ridge(k));
  const RkhsCoordinates coords = rkhs_coordinates(SymMatrix(psi_rows(k.matrix())));
  DcaProblem p;
  for (const auto& g : assemble_G_kernel(d, k, cfg.C1, cfg.C2, r)) p.blocks.push_back(congruence(g, coords.to_alpha));
  p.features = coords.features;
  p.labels = d.y;
  p.K = d.K;
  p.C2 = cfg.C2;
  auto result = run_mpdcae(p, cfg, matched_start(coords, d.X, d.K, cfg.seed));
  KernelNsvmModel model;
  model.alpha = StackedWeights(d.K, d.size());
  for (int y = 1; y <= d.K; ++y) {
    const Vector a = matvec(coords.to_alpha, result.weights.block(y));
    std::copy(a.begin(), a.end(), model.alpha.block(y).begin());
  }
  model.train_X = d.X;
  model.kernel = kernel;
  model.gram_ridge = r;
  model.standardizer = Standardizer::identity(d.features());
  model.degenerate = degenerate_alphas(model.alpha, k);
  model.config = cfg;
  return {std::move(model), std::move(result.trace)};
}

/// Per-class distances for every row of x (raw feature space); rows of the result are samples.
inline Matrix kernel_distances(const KernelNsvmModel& model, const Matrix& x,
                               std::optional<KernelRule> rule_override = std::nullopt) {
  if (x.cols() != model.n()) throw Error(ErrorKind::DimensionMismatch, "predict_kernel: feature count mismatch");
  const KernelRule rule = rule_override.value_or(model.rule);
  const SymMatrix k = gram(model.kernel, model.train_X);
  Vector denom(static_cast<std::size_t>(model.K()));
  for (int y = 1; y <= model.K(); ++y) {
    const auto a = model.alpha.block(y);
    const double vv = k.quadratic_form(a);
    double bias = 0.0;
    for (double v : a) bias += v;
    denom[static_cast<std::size_t>(y - 1)] = rule == KernelRule::NormConsistent ? std::sqrt(vv) : vv + bias * bias;
  }
  const Matrix psi = psi_rows(cross_gram(model.kernel, model.standardizer.apply(x), model.train_X));
  Matrix dist(x.rows(), static_cast<std::size_t>(model.K()));
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (int y = 1; y <= model.K(); ++y) {
      const double g = std::abs(dot(psi.row(i), model.alpha.block(y)));
      const auto c = static_cast<std::size_t>(y - 1);
      dist(i, c) = model.degenerate[c] ? g : g / denom[c];
    }
  return dist;
}

inline std::vector<int> predict_kernel(const KernelNsvmModel& model, const Matrix& x,
                                       std::optional<KernelRule> rule_override = std::nullopt) {
  const Matrix dist = kernel_distances(model, x, rule_override);
  std::vector<int> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = argmin_label(dist.row(i));
  return out;
}

}  // namespace nsvm
