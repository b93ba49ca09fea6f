#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "nsvm/dataset.hpp"
#include "nsvm/error.hpp"
#include "nsvm/linalg.hpp"
#include "nsvm/matrix.hpp"
#include "nsvm/mpdcae.hpp"

namespace nsvm {

/// g_y(x) = w_yᵀx + b_y.
inline double plane_response(std::span<const double> block, std::span<const double> x) {
  const std::size_t n = block.size() - 1;
  if (x.size() != n) throw Error(ErrorKind::DimensionMismatch, "plane_response: feature count mismatch");
  double s = block[n];
  for (std::size_t k = 0; k < n; ++k) s += block[k] * x[k];
  return s;
}

/// ‖w_y‖ without the bias.
inline double normal_norm(std::span<const double> block) { return norm2(block.first(block.size() - 1)); }

/// max_{j≠y} max{ g_y(x)² − g_j(x)², 0 }.
inline double maxmin_loss(const StackedWeights& w, std::span<const double> x, int y) {
  if (y < 1 || y > w.K) throw Error(ErrorKind::BadLabel, "maxmin_loss: label outside 1..K");
  const double own = plane_response(w.block(y), x);
  double worst = 0.0;
  for (int j = 1; j <= w.K; ++j) {
    if (j == y) continue;
    const double other = plane_response(w.block(j), x);
    worst = std::max(worst, own * own - other * other);
  }
  return worst;
}

/// ½Σ‖w_y‖² + C1·Σ g_{y_i}(x_i)² + C2·Σ maxmin_loss(x_i, y_i).
inline double nsvm_objective(const StackedWeights& w, const Dataset& d, double c1, double c2) {
  if (w.block_dim != d.features() + 1 || w.K != d.K) throw Error(ErrorKind::DimensionMismatch, "nsvm_objective");
  double reg = 0.0;
  for (int y = 1; y <= w.K; ++y) {
    const double nn = normal_norm(w.block(y));
    reg += nn * nn;
  }
  double fit = 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double g = plane_response(w.block(d.y[i]), d.X.row(i));
    fit += g * g;
    loss += maxmin_loss(w, d.X.row(i), d.y[i]);
  }
  return 0.5 * reg + c1 * fit + c2 * loss;
}

/// G_y = ½A + (C1+C2)·Σ_{y_i=y} z_i z_iᵀ with A = diag(I_n, 0).
inline std::vector<SymMatrix> assemble_G(const Dataset& d, double c1, double c2) {
  const std::size_t dim = d.features() + 1;
  std::vector<Matrix> g(static_cast<std::size_t>(d.K), Matrix(dim, dim));
  for (auto& block : g)
    for (std::size_t k = 0; k + 1 < dim; ++k) block(k, k) = 0.5;
  std::vector<bool> seen(static_cast<std::size_t>(d.K), false);
  const double c = c1 + c2;
  Vector z(dim, 1.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto x = d.X.row(i);
    std::copy(x.begin(), x.end(), z.begin());
    auto& block = g[static_cast<std::size_t>(d.y[i] - 1)];
    seen[static_cast<std::size_t>(d.y[i] - 1)] = true;
    for (std::size_t a = 0; a < dim; ++a)
      for (std::size_t b = a; b < dim; ++b) block(a, b) += c * z[a] * z[b];
  }
  std::vector<SymMatrix> out;
  out.reserve(g.size());
  for (std::size_t y = 0; y < g.size(); ++y) {
    if (!seen[y]) throw Error(ErrorKind::EmptyClass, "class " + std::to_string(y + 1) + " has no samples");
    for (std::size_t a = 0; a < dim; ++a)
      for (std::size_t b = 0; b < a; ++b) g[y](a, b) = g[y](b, a);
    out.emplace_back(std::move(g[y]));
  }
  return out;
}

/// j_i = smallest index attaining min_j |g_j(x_i)|.
inline std::vector<int> active_set(const StackedWeights& w, const Dataset& d) {
  if (w.block_dim != d.features() + 1) throw Error(ErrorKind::DimensionMismatch, "active_set");
  return active_from_responses(responses(augment_with_ones(d.X), w));
}

struct LinearNsvmModel {
  StackedWeights weights;
  Standardizer standardizer;
  std::vector<bool> degenerate;
  NsvmConfig config;

  int K() const noexcept { return weights.K; }
  std::size_t n() const noexcept { return weights.n(); }
};

/// A class is degenerate when ‖w_y‖ ≤ 1e-8·‖(w_y, b_y)‖, i.e. its plane has no usable normal.
/// The test is relative because the objective is 2-homogeneous and iterates shrink toward 0.
inline std::vector<bool> degenerate_planes(const StackedWeights& w) {
  std::vector<bool> flags;
  for (int y = 1; y <= w.K; ++y) {
    const double nn = normal_norm(w.block(y));
    flags.push_back(!(nn > 1e-8 * norm2(w.block(y))));
  }
  return flags;
}

struct LinearTrainResult {
  LinearNsvmModel model;
  SolverTrace trace;
};

/// Trains on `d` as given; the returned model carries an identity standardizer.
inline LinearTrainResult train_linear(const Dataset& d, const NsvmConfig& cfg) {
  cfg.validate();
  DcaProblem p;
  p.blocks = assemble_G(d, cfg.C1, cfg.C2);
  p.features = augment_with_ones(d.X);
  p.labels = d.y;
  p.K = d.K;
  p.C2 = cfg.C2;
  const std::size_t dim = d.features() + 1;
  auto result = run_mpdcae(p, cfg, random_weights(d.K, dim, cfg.seed));
  LinearNsvmModel model{std::move(result.weights), Standardizer::identity(d.features()), {}, cfg};
  model.degenerate = degenerate_planes(model.weights);
  return {std::move(model), std::move(result.trace)};
}

/// Distances |g_y(x)|/‖w_y‖ (unnormalized for degenerate classes); x in raw feature space.
inline Vector decision_values(const LinearNsvmModel& model, std::span<const double> x) {
  if (x.size() != model.n()) throw Error(ErrorKind::DimensionMismatch, "decision_values: feature count mismatch");
  Vector xs(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) xs[k] = (x[k] - model.standardizer.mean[k]) / model.standardizer.scale[k];
  Vector dist(static_cast<std::size_t>(model.K()));
  for (int y = 1; y <= model.K(); ++y) {
    const auto block = model.weights.block(y);
    const double g = std::abs(plane_response(block, xs));
    dist[static_cast<std::size_t>(y - 1)] =
        model.degenerate[static_cast<std::size_t>(y - 1)] ? g : g / normal_norm(block);
  }
  return dist;
}

/// Smallest 1-based index of the minimum.
inline int argmin_label(std::span<const double> v) {
  int best = 1;
  for (std::size_t j = 1; j < v.size(); ++j)
    if (v[j] < v[static_cast<std::size_t>(best - 1)]) best = static_cast<int>(j) + 1;
  return best;
}

inline std::vector<int> predict_linear(const LinearNsvmModel& model, const Matrix& x) {
  if (x.cols() != model.n()) throw Error(ErrorKind::DimensionMismatch, "predict_linear: feature count mismatch");
  std::vector<int> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = argmin_label(decision_values(model, x.row(i)));
  return out;
}

}  // namespace nsvm
