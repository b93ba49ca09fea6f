#pragma once

// Modified proximal DCA with extrapolation for the max-min distance NSVM.
//
// The problem is min_w h(w) = Σ_y w_yᵀ G_y w_y − C2 Σ_i (f_iᵀ w_{j_i})², where f_i is
// the i-th feature row (z_i = (x_i; 1) in the primal, ψ_i = K(x_i,X)ᵀ + e in the
// kernel case) and j_i is the block with the smallest |f_iᵀ w_j|. Both the linear
// and kernel trainers drive this engine; only the feature rows and G blocks differ.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "nsvm/error.hpp"
#include "nsvm/linalg.hpp"
#include "nsvm/matrix.hpp"

namespace nsvm {

/// How w̄ᵗ⁺¹ is computed from the subproblem.
enum class UpdateRule {
  Stationarity,  ///< (2G + L·I)·w = L·u + ξ, the exact minimizer of f_t
  Printed,       ///< (G + L/2·I)·w = L·u + ξ, the closed form as usually printed
};

/// Runtime safeguard for the descent quantity D_t.
enum class DescentGuard {
  AdaptiveL,  ///< backtrack L until the next active-set switch is absorbed; violations are fatal
  None,       ///< plain iteration with fixed L; violations are only counted
};

struct NsvmConfig {
  double C1 = 1.0;
  double C2 = 1.0;
  double L = 1.0;
  int max_iter = 50;
  double tol = 1e-6;
  int restart_period = 50;
  std::uint64_t seed = 0;
  UpdateRule update = UpdateRule::Stationarity;
  DescentGuard guard = DescentGuard::AdaptiveL;

  void validate() const {
    auto bad = [](const std::string& what) { throw Error(ErrorKind::BadConfig, what); };
    if (!(C1 > 0.0) || !std::isfinite(C1)) bad("C1 must be positive");
    if (!(C2 > 0.0) || !std::isfinite(C2)) bad("C2 must be positive");
    if (!(L > 0.0) || !std::isfinite(L)) bad("L must be positive");
    if (max_iter < 1) bad("max_iter must be positive");
    if (!(tol > 0.0)) bad("tol must be positive");
    if (restart_period < 1) bad("restart period must be positive");
  }

  bool enforces_descent() const { return guard == DescentGuard::AdaptiveL && update == UpdateRule::Stationarity; }
};

/// K concatenated blocks of equal length: (w_y, b_y) in the primal, α_y in the kernel case.
struct StackedWeights {
  int K = 0;
  std::size_t block_dim = 0;
  Vector values;

  StackedWeights() = default;
  StackedWeights(int k, std::size_t dim) : K(k), block_dim(dim), values(static_cast<std::size_t>(k) * dim, 0.0) {}
  StackedWeights(int k, std::size_t dim, Vector v) : K(k), block_dim(dim), values(std::move(v)) {
    if (values.size() != static_cast<std::size_t>(k) * dim)
      throw Error(ErrorKind::DimensionMismatch, "StackedWeights: length must be K·block_dim");
  }

  /// Feature dimension n of a primal weight vector (block = (w; b)).
  std::size_t n() const noexcept { return block_dim - 1; }

  /// Block of class y (1-based).
  std::span<double> block(int y) noexcept {
    return {values.data() + static_cast<std::size_t>(y - 1) * block_dim, block_dim};
  }
  std::span<const double> block(int y) const noexcept {
    return {values.data() + static_cast<std::size_t>(y - 1) * block_dim, block_dim};
  }

  friend bool operator==(const StackedWeights&, const StackedWeights&) = default;
};

/// Coordinates drawn uniformly from (−0.5, 0.5).
inline StackedWeights random_weights(int k, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  StackedWeights w(k, dim);
  for (double& v : w.values) v = u(rng);
  return w;
}

/// R(i, y−1) = f_iᵀ w_y.
inline Matrix responses(const Matrix& features, const StackedWeights& w) {
  if (features.cols() != w.block_dim) throw Error(ErrorKind::DimensionMismatch, "responses: block size mismatch");
  Matrix r(features.rows(), static_cast<std::size_t>(w.K));
  for (std::size_t i = 0; i < features.rows(); ++i)
    for (int y = 1; y <= w.K; ++y) r(i, static_cast<std::size_t>(y - 1)) = dot(features.row(i), w.block(y));
  return r;
}

/// Per row, the smallest 1-based column index attaining min |R(i, ·)|.
inline std::vector<int> active_from_responses(const Matrix& r) {
  std::vector<int> a(r.rows(), 1);
  for (std::size_t i = 0; i < r.rows(); ++i) {
    double best = std::abs(r(i, 0));
    for (std::size_t j = 1; j < r.cols(); ++j) {
      const double v = std::abs(r(i, j));
      if (v < best) {
        best = v;
        a[i] = static_cast<int>(j) + 1;
      }
    }
  }
  return a;
}

/// C2·Σ_i (f_iᵀ w_{a_i})² = w̄ᵀ H(a) w̄, without forming H.
inline double concave_quadratic(const Matrix& features, std::span<const int> active, const StackedWeights& w,
                                double c2) {
  double s = 0.0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const double g = dot(features.row(i), w.block(active[i]));
    s += g * g;
  }
  return c2 * s;
}

/// w̄ᵀ G w̄ for G = diag(G_y).
inline double blockdiag_quadratic(std::span<const SymMatrix> blocks, const StackedWeights& w) {
  double s = 0.0;
  for (int y = 1; y <= w.K; ++y) s += blocks[static_cast<std::size_t>(y - 1)].quadratic_form(w.block(y));
  return s;
}

/// ξ = 2·H(a)·w̄, accumulated per sample into block a_i in sample order.
inline StackedWeights accumulate_xi(const Matrix& features, std::span<const int> active, const StackedWeights& w,
                                    double c2) {
  StackedWeights xi(w.K, w.block_dim);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto f = features.row(i);
    const double g = 2.0 * c2 * dot(f, w.block(active[i]));
    auto dst = xi.block(active[i]);
    for (std::size_t k = 0; k < f.size(); ++k) dst[k] += g * f[k];
  }
  return xi;
}

struct ThetaState {
  double prev = 1.0;  ///< θ_{t−1}
  double cur = 1.0;   ///< θ_t
};

struct BetaStep {
  double beta = 0.0;
  ThetaState next;
};

/// Extrapolation cap √(2λ/(2λ+L)); zero when λ ≤ 0.
inline double beta_cap(double lambda_min, double L) {
  if (!(lambda_min > 0.0)) return 0.0;
  return std::sqrt(2.0 * lambda_min / (2.0 * lambda_min + L));
}

/// FISTA-style β_t = min{(θ_{t−1}−1)/θ_t, cap} and θ_{t+1} = (1+√(1+4θ_t²))/2.
/// With restart_period T̃ > 0, the state resets to θ_{t−1} = θ_t = 1 whenever (t−1) is a multiple of T̃.
inline BetaStep beta_next(int t, ThetaState state, double lambda_min, double L, int restart_period = 0) {
  if (t <= 1 || (restart_period > 0 && (t - 1) % restart_period == 0)) state = {};
  const double beta = std::min((state.prev - 1.0) / state.cur, beta_cap(lambda_min, L));
  const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * state.cur * state.cur));
  return {std::max(beta, 0.0), {state.cur, next}};
}

/// Cholesky factors of (scale·G_y + L·I) per block.
class BlockSystem {
 public:
  BlockSystem(std::span<const SymMatrix> blocks, double g_scale, double L) : L_(L), g_scale_(g_scale) {
    factors_.reserve(blocks.size());
    for (const auto& g : blocks) {
      try {
        factors_.push_back(cholesky_factor(g.combine(g_scale, SymMatrix::identity(g.dim()), L)));
      } catch (const Error& e) {
        throw Error(ErrorKind::NumericalFailure, std::string("subproblem factorization failed: ") + e.what());
      }
    }
  }

  double L() const noexcept { return L_; }
  double g_scale() const noexcept { return g_scale_; }

  StackedWeights solve(const StackedWeights& rhs) const {
    StackedWeights out(rhs.K, rhs.block_dim);
    for (int y = 1; y <= rhs.K; ++y) {
      const Vector x = spd_solve(factors_[static_cast<std::size_t>(y - 1)], rhs.block(y));
      std::copy(x.begin(), x.end(), out.block(y).begin());
    }
    return out;
  }

 private:
  double L_;
  double g_scale_;
  std::vector<CholFactor> factors_;
};

/// Solves (2G + L·I)·w = L·u + ξ block by block (or (G + L/2·I)·w = L·u + ξ for the printed rule).
inline StackedWeights dca_solve(std::span<const SymMatrix> blocks, const StackedWeights& xi, const StackedWeights& u,
                                double L, UpdateRule rule = UpdateRule::Stationarity) {
  const bool exact = rule == UpdateRule::Stationarity;
  BlockSystem sys(blocks, exact ? 2.0 : 1.0, exact ? L : 0.5 * L);
  StackedWeights rhs = u;
  for (std::size_t k = 0; k < rhs.values.size(); ++k) rhs.values[k] = L * u.values[k] + xi.values[k];
  return sys.solve(rhs);
}

/// ‖(s·G + L'·I)·w − rhs‖ with the blocks applied explicitly.
inline double system_residual(std::span<const SymMatrix> blocks, double g_scale, double shift, const StackedWeights& w,
                              const StackedWeights& rhs) {
  double s = 0.0;
  for (int y = 1; y <= w.K; ++y) {
    const Vector gw = matvec(blocks[static_cast<std::size_t>(y - 1)].matrix(), w.block(y));
    const auto wb = w.block(y);
    const auto rb = rhs.block(y);
    for (std::size_t k = 0; k < wb.size(); ++k) {
      const double r = g_scale * gw[k] + shift * wb[k] - rb[k];
      s += r * r;
    }
  }
  return std::sqrt(s);
}

/// One MpDCAe iteration given the active set of w̄ᵗ: ξᵗ = 2Hᵗw̄ᵗ, then the subproblem solve.
inline StackedWeights dca_step(std::span<const SymMatrix> blocks, const Matrix& features, std::span<const int> active,
                               const StackedWeights& w, const StackedWeights& u, double c2, double L,
                               UpdateRule rule = UpdateRule::Stationarity) {
  return dca_solve(blocks, accumulate_xi(features, active, w, c2), u, L, rule);
}

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;       ///< h(w̄ᵗ⁺¹) with its own active set
  double descent = 0.0;         ///< D_{t+1} = h_t(w̄ᵗ⁺¹) + (L/2)‖w̄ᵗ⁺¹ − w̄ᵗ‖²
  double step_norm = 0.0;       ///< ‖w̄ᵗ⁺¹ − w̄ᵗ‖
  double relative_step = 0.0;   ///< step_norm / max(1, ‖w̄ᵗ‖)
  double beta = 0.0;            ///< β actually used
  double L = 0.0;               ///< proximal weight actually used
  int backtracks = 0;
  double stationarity = 0.0;    ///< ‖(2G+LI)w̄ᵗ⁺¹ − (Luᵗ+ξᵗ)‖
  double stationarity_bound = 0.0;  ///< 1e-8·(1 + ‖Luᵗ+ξᵗ‖)
  double h_next = 0.0;          ///< (w̄ᵗ⁺¹)ᵀHᵗ⁺¹w̄ᵗ⁺¹
  double h_prev = 0.0;          ///< (w̄ᵗ⁺¹)ᵀHᵗw̄ᵗ⁺¹
  int switched = 0;             ///< samples whose active block changed
};

struct SolverTrace {
  double initial_descent = 0.0;  ///< D_1 = h(w̄¹), taking H⁰ as the active set of w̄⁰
  double lambda_min = 0.0;       ///< smallest eigenvalue of G, floored at 0
  std::vector<TraceEntry> entries;
  bool converged = false;
  int descent_violations = 0;
  int total_backtracks = 0;
  double log_scale = 0.0;  ///< ln of the factor relating the returned weights to the true final iterate

  std::size_t iterations() const noexcept { return entries.size(); }
  double final_step() const noexcept { return entries.empty() ? 0.0 : entries.back().step_norm; }
  double final_relative_step() const noexcept { return entries.empty() ? 0.0 : entries.back().relative_step; }
};

/// Relative slack for the descent check, scaled by the magnitude of the convex part.
inline constexpr double kDescentSlack = 1e-10;
inline constexpr double kStationarityTol = 1e-8;
inline constexpr double kHMonotoneSlack = 1e-10;

/// True when D_next ≤ D_prev within relative slack on the scale of the quadratic terms.
inline bool descent_holds(double d_prev, double d_next, double scale) {
  return d_next <= d_prev + kDescentSlack * std::max({std::abs(d_prev), std::abs(d_next), scale});
}

struct DcaProblem {
  Matrix features;             ///< m × d rows f_i
  std::vector<int> labels;     ///< 1..K
  int K = 0;
  std::vector<SymMatrix> blocks;  ///< K blocks G_y, each d × d
  double C2 = 1.0;
};

struct DcaResult {
  StackedWeights weights;
  SolverTrace trace;
};

/// Runs MpDCAe from w̄⁰ = w̄¹ = `start`.
///
/// With DescentGuard::AdaptiveL, each accepted step must leave the next active-set
/// switch absorbable: (w̄ᵗ⁺¹)ᵀ(Hᵗ − Hᵗ⁺¹)w̄ᵗ⁺¹ ≤ (L/2)‖w̄ᵗ⁺¹ − w̄ᵗ‖². Otherwise L grows to
/// max(2L, 2·gap/‖w̄ᵗ⁺¹ − w̄ᵗ‖²) and the step is recomputed; after every accepted step L relaxes halfway back to
/// its configured value. If the extrapolated step raises D, it is retried with β = 0.
/// A step counts toward convergence only when it was taken at the configured L.
///
/// Every iterate is a linear function of the two before it, so the loop stores them
/// rescaled to unit norm and tracks the factor separately. Trace values and the stopping
/// test refer to the unscaled sequence; the returned weights are the final iterate
/// divided by exp(trace.log_scale).
inline DcaResult run_mpdcae(const DcaProblem& p, const NsvmConfig& cfg, StackedWeights start) {
  cfg.validate();
  if (p.blocks.size() != static_cast<std::size_t>(p.K) || start.K != p.K || start.block_dim != p.features.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "run_mpdcae: inconsistent problem dimensions");
  }
  const std::span<const SymMatrix> blocks(p.blocks);
  const bool exact = cfg.update == UpdateRule::Stationarity;
  const bool guarded = cfg.guard == DescentGuard::AdaptiveL;
  const bool enforce = cfg.enforces_descent();
  const double g_scale = exact ? 2.0 : 1.0;
  const double L0 = cfg.L;
  constexpr int kMaxBacktracks = 60;

  SolverTrace trace;
  trace.lambda_min = std::max(0.0, min_eig_blockdiag(blocks));

  std::map<double, BlockSystem> systems;
  auto system_for = [&](double L) -> const BlockSystem& {
    auto it = systems.find(L);
    if (it == systems.end()) {
      if (systems.size() >= 16) systems.clear();
      it = systems.emplace(L, BlockSystem(blocks, g_scale, exact ? L : 0.5 * L)).first;
    }
    return it->second;
  };

  StackedWeights w = std::move(start);
  double log_scale = 0.0;
  auto rescale = [&](double c, StackedWeights& a, StackedWeights& b, double& d) {
    for (double& v : a.values) v *= c;
    for (double& v : b.values) v *= c;
    d *= c * c;
    log_scale -= std::log(c);
  };
  StackedWeights w_prev = w;
  std::vector<int> active = active_from_responses(responses(p.features, w));
  double d_cur = blockdiag_quadratic(blocks, w) - concave_quadratic(p.features, active, w, p.C2);
  trace.initial_descent = d_cur;
  if (const double n0 = norm2(w.values); n0 > 0.0) rescale(1.0 / n0, w, w_prev, d_cur);

  ThetaState theta;
  double L = L0;
  for (int t = 1; t <= cfg.max_iter; ++t) {
    const StackedWeights xi = accumulate_xi(p.features, active, w, p.C2);

    StackedWeights w_new;
    StackedWeights rhs;
    std::vector<int> active_new;
    double beta_used = 0.0;
    double d_new = 0.0;
    double convex_part = 0.0;
    double step2 = 0.0;
    BetaStep scheduled{};
    int backtracks = 0;
    while (true) {
      scheduled = beta_next(t, theta, trace.lambda_min, L, cfg.restart_period);
      const double candidates[2] = {scheduled.beta, 0.0};
      const int n_candidates = (guarded && scheduled.beta > 0.0) ? 2 : 1;
      for (int c = 0; c < n_candidates; ++c) {
        beta_used = candidates[c];
        StackedWeights u = w;
        for (std::size_t k = 0; k < u.values.size(); ++k)
          u.values[k] = w.values[k] + beta_used * (w.values[k] - w_prev.values[k]);
        rhs = u;
        for (std::size_t k = 0; k < rhs.values.size(); ++k) rhs.values[k] = L * u.values[k] + xi.values[k];
        w_new = system_for(L).solve(rhs);
        step2 = 0.0;
        for (std::size_t k = 0; k < w.values.size(); ++k) {
          const double dlt = w_new.values[k] - w.values[k];
          step2 += dlt * dlt;
        }
        convex_part = blockdiag_quadratic(blocks, w_new);
        d_new = convex_part - concave_quadratic(p.features, active, w_new, p.C2) + 0.5 * L * step2;
        if (descent_holds(d_cur, d_new, convex_part)) break;
      }
      active_new = active_from_responses(responses(p.features, w_new));
      if (!guarded) break;
      const double gap = concave_quadratic(p.features, active, w_new, p.C2) -
                         concave_quadratic(p.features, active_new, w_new, p.C2);
      if (gap <= 0.5 * L * step2) break;
      if (backtracks == kMaxBacktracks) {
        throw Error(ErrorKind::NumericalFailure, "descent guard could not absorb the active-set switch after " +
                                                     std::to_string(kMaxBacktracks) + " increases of L at iteration " +
                                                     std::to_string(t));
      }
      L = step2 > 0.0 ? std::max(2.0 * L, 2.0 * gap / step2) : 2.0 * L;
      ++backtracks;
    }

    const double scale = std::exp(log_scale);
    const double scale2 = scale * scale;
    TraceEntry e;
    e.iteration = t;
    e.beta = beta_used;
    e.L = L;
    e.backtracks = backtracks;
    const double stored_step = std::sqrt(step2);
    // True relative step ‖Δ‖/max(1, ‖w̄ᵗ‖) with ‖w̄ᵗ‖ = scale (the stored iterate has unit norm).
    e.step_norm = scale * stored_step;
    e.relative_step = scale * stored_step / std::max(1.0, scale * norm2(w.values));
    e.descent = scale2 * d_new;
    const double h_prev = concave_quadratic(p.features, active, w_new, p.C2);
    const double h_next = concave_quadratic(p.features, active_new, w_new, p.C2);
    e.h_prev = scale2 * h_prev;
    e.h_next = scale2 * h_next;
    e.objective = scale2 * (convex_part - h_next);
    const double stationarity = system_residual(blocks, g_scale, exact ? L : 0.5 * L, w_new, rhs);
    const double stationarity_bound = kStationarityTol * (1.0 + norm2(rhs.values));
    e.stationarity = scale * stationarity;
    e.stationarity_bound = scale * stationarity_bound;
    for (std::size_t i = 0; i < active.size(); ++i) e.switched += active[i] != active_new[i] ? 1 : 0;
    trace.entries.push_back(e);
    trace.total_backtracks += backtracks;

    if (!(stationarity <= stationarity_bound)) {
      throw Error(ErrorKind::NumericalFailure, "subproblem stationarity residual " + std::to_string(stationarity) +
                                                   " exceeds " + std::to_string(stationarity_bound) +
                                                   " at iteration " + std::to_string(t));
    }
    if (!(h_next <= h_prev + kHMonotoneSlack * std::max(1.0, h_prev))) {
      throw Error(ErrorKind::NumericalFailure, "active-set update increased the concave quadratic at iteration " +
                                                   std::to_string(t));
    }
    if (!descent_holds(d_cur, d_new, convex_part)) {
      ++trace.descent_violations;
      if (enforce) {
        throw Error(ErrorKind::NumericalFailure, "descent quantity increased from " + std::to_string(d_cur) + " to " +
                                                     std::to_string(d_new) + " (unit-norm frame) at iteration " +
                                                     std::to_string(t));
      }
    }

    const bool at_base_L = L == L0;
    w_prev = std::move(w);
    w = std::move(w_new);
    active = std::move(active_new);
    d_cur = d_new;
    theta = scheduled.next;
    if (guarded) L = std::max(L0, 0.5 * L);

    if (at_base_L && e.relative_step <= cfg.tol) {
      trace.converged = true;
      break;
    }
    const double nw = norm2(w.values);
    if (nw == 0.0) break;
    rescale(1.0 / nw, w, w_prev, d_cur);
  }
  trace.log_scale = log_scale;
  return {std::move(w), std::move(trace)};
}

}  // namespace nsvm
