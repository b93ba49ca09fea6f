#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nsvm/dataset.hpp"
#include "nsvm/mpdcae.hpp"
#include "nsvm/nsvm_linear.hpp"
#include "test_util.hpp"

namespace nsvm {
namespace {

std::vector<double> beta_sequence(int steps, double lambda, double L, int restart = 0) {
  std::vector<double> out;
  ThetaState s;
  for (int t = 1; t <= steps; ++t) {
    const BetaStep b = beta_next(t, s, lambda, L, restart);
    out.push_back(b.beta);
    s = b.next;
  }
  return out;
}

TEST(BetaSchedule, UncappedSequence) {
  const auto b = beta_sequence(7, 1.0, 2.0);
  const double expected[7] = {0.0, 0.0, 0.28175352512532087, 0.434042782780302, 0.5310638054044795,
                              0.5987785940560388, 0.6489233261224006};
  for (int t = 0; t < 7; ++t) EXPECT_NEAR(b[static_cast<std::size_t>(t)], expected[t], 1e-15) << "t=" << t + 1;
}

TEST(BetaSchedule, CapBindsForSmallLambda) {
  const auto b = beta_sequence(7, 0.01, 2.0);
  EXPECT_EQ(b[1], 0.0);
  for (std::size_t t = 2; t < 7; ++t) EXPECT_NEAR(b[t], 0.09950371902099892, 1e-15);
  EXPECT_DOUBLE_EQ(beta_cap(1.0, 2.0), std::sqrt(0.5));
}

TEST(BetaSchedule, NonPositiveLambdaDisablesExtrapolation) {
  for (double beta : beta_sequence(10, 0.0, 1.0)) EXPECT_EQ(beta, 0.0);
  for (double beta : beta_sequence(10, -1.0, 1.0)) EXPECT_EQ(beta, 0.0);
}

TEST(BetaSchedule, RestartResetsTheta) {
  const auto plain = beta_sequence(4, 1.0, 2.0);
  const auto restarted = beta_sequence(8, 1.0, 2.0, 4);
  // t = 5 satisfies (t−1) mod 4 = 0, so t = 5..8 replays t = 1..4.
  for (std::size_t t = 0; t < 4; ++t) {
    EXPECT_EQ(restarted[t], plain[t]);
    EXPECT_EQ(restarted[t + 4], plain[t]);
  }
}

TEST(BetaSchedule, AlwaysWithinBounds) {
  for (double lambda : {0.01, 0.5, 3.0})
    for (double L : {0.1, 1.0, 10.0})
      for (double beta : beta_sequence(200, lambda, L, 37)) {
        EXPECT_GE(beta, 0.0);
        EXPECT_LE(beta, beta_cap(lambda, L));
        EXPECT_LT(beta, 1.0);
      }
}

TEST(DcaSolve, IdentityExample) {
  const std::vector<SymMatrix> g{SymMatrix::identity(2)};
  const StackedWeights u(1, 2, Vector{1.0, 0.0});
  const StackedWeights xi(1, 2, Vector{0.0, 4.0});
  const auto w = dca_solve(g, xi, u, 2.0);
  EXPECT_NEAR(w.values[0], 0.5, 1e-15);
  EXPECT_NEAR(w.values[1], 1.0, 1e-15);
  const auto printed = dca_solve(g, xi, u, 2.0, UpdateRule::Printed);
  EXPECT_NEAR(printed.values[0], 1.0, 1e-15);
  EXPECT_NEAR(printed.values[1], 2.0, 1e-15);
}

TEST(DcaSolve, ResidualIsSmallOnRandomBlocks) {
  std::mt19937_64 rng(12);
  for (int rep = 0; rep < 30; ++rep) {
    const std::size_t dim = 2 + static_cast<std::size_t>(rep % 5);
    std::vector<SymMatrix> g;
    for (int y = 0; y < 3; ++y) g.push_back(test::random_spd(rng, dim));
    const StackedWeights u(3, dim, test::random_vector(rng, 3 * dim));
    const StackedWeights xi(3, dim, test::random_vector(rng, 3 * dim));
    const double L = 0.5 + rep * 0.1;
    const auto w = dca_solve(g, xi, u, L);
    StackedWeights rhs = u;
    for (std::size_t k = 0; k < rhs.values.size(); ++k) rhs.values[k] = L * u.values[k] + xi.values[k];
    EXPECT_LE(system_residual(g, 2.0, L, w, rhs), 1e-10 * (1.0 + norm2(rhs.values)));
  }
}

TEST(ActiveSet, MatchesBruteForceWithSmallestIndexTies) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> small(-3, 3);
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t k = 2 + static_cast<std::size_t>(rep % 4);
    Matrix r(3, k);
    // Small integers make exact ties (including ±v) frequent.
    for (double& v : r.data()) v = small(rng);
    const auto a = active_from_responses(r);
    for (std::size_t i = 0; i < 3; ++i) {
      int expected = 0;
      for (std::size_t j = 0; j < k && expected == 0; ++j) {
        bool is_min = true;
        for (std::size_t l = 0; l < k; ++l) is_min = is_min && std::abs(r(i, j)) <= std::abs(r(i, l));
        if (is_min) expected = static_cast<int>(j) + 1;
      }
      EXPECT_EQ(a[i], expected);
    }
  }
}

TEST(AccumulateXi, EqualsTwiceHTimesW) {
  std::mt19937_64 rng(21);
  const std::size_t m = 9;
  const std::size_t dim = 3;
  const int K = 3;
  const Matrix f = test::random_matrix(rng, m, dim);
  const StackedWeights w(K, dim, test::random_vector(rng, K * dim));
  const auto active = active_from_responses(responses(f, w));
  const double c2 = 0.7;
  // Explicit H = C2·Σ_i E_{a_i} f_i f_iᵀ E_{a_i}ᵀ on the stacked vector.
  const std::size_t big = K * dim;
  Matrix h(big, big);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t off = static_cast<std::size_t>(active[i] - 1) * dim;
    for (std::size_t a = 0; a < dim; ++a)
      for (std::size_t b = 0; b < dim; ++b) h(off + a, off + b) += c2 * f(i, a) * f(i, b);
  }
  const Vector hw = matvec(h, w.values);
  const auto xi = accumulate_xi(f, active, w, c2);
  for (std::size_t k = 0; k < big; ++k) EXPECT_NEAR(xi.values[k], 2.0 * hw[k], 1e-13);
  EXPECT_NEAR(concave_quadratic(f, active, w, c2), dot(w.values, hw), 1e-13);
}

DcaProblem linear_problem(const Dataset& d, double c1, double c2) {
  DcaProblem p;
  p.blocks = assemble_G(d, c1, c2);
  p.features = augment_with_ones(d.X);
  p.labels = d.y;
  p.K = d.K;
  p.C2 = c2;
  return p;
}

TEST(RunMpdcae, GuardedRunKeepsEveryInvariant) {
  const Dataset d = gen_cross_planes(25, 0.1, 0.0, 2);
  for (double c2 : {0.25, 1.0, 4.0}) {
    const DcaProblem p = linear_problem(d, 1.0, c2);
    NsvmConfig cfg;
    cfg.C2 = c2;
    cfg.max_iter = 80;
    const auto r = run_mpdcae(p, cfg, random_weights(4, 3, 5));
    EXPECT_EQ(r.trace.descent_violations, 0);
    double prev = r.trace.initial_descent;
    for (const auto& e : r.trace.entries) {
      EXPECT_TRUE(descent_holds(prev, e.descent, std::abs(e.descent))) << "iteration " << e.iteration;
      EXPECT_LE(e.stationarity, e.stationarity_bound);
      EXPECT_LE(e.h_next, e.h_prev + kHMonotoneSlack);
      EXPECT_GE(e.L, cfg.L);
      EXPECT_GE(e.beta, 0.0);
      prev = e.descent;
    }
  }
}

TEST(RunMpdcae, ObjectiveMatchesHFormula) {
  const Dataset d = gen_cross_planes(10, 0.1, 0.0, 4);
  const DcaProblem p = linear_problem(d, 1.0, 1.0);
  NsvmConfig cfg;
  cfg.max_iter = 5;
  const auto r = run_mpdcae(p, cfg, random_weights(4, 3, 1));
  const auto active = active_from_responses(responses(p.features, r.weights));
  const double s2 = std::exp(2.0 * r.trace.log_scale);
  const double h = s2 * (blockdiag_quadratic(p.blocks, r.weights) - concave_quadratic(p.features, active, r.weights, 1.0));
  EXPECT_NEAR(r.trace.entries.back().objective, h, 1e-12 * std::abs(h));
  EXPECT_NEAR(norm2(r.weights.values), 1.0, 1e-14);
}

// Plain unnormalized iteration with dense stacked matrices and no guard.
StackedWeights reference_iterates(const DcaProblem& p, StackedWeights w, double L, double lambda, int iters) {
  const std::size_t dim = w.block_dim;
  const std::size_t big = static_cast<std::size_t>(p.K) * dim;
  Matrix g2(big, big);
  for (int y = 0; y < p.K; ++y)
    for (std::size_t a = 0; a < dim; ++a)
      for (std::size_t b = 0; b < dim; ++b) g2(y * dim + a, y * dim + b) = 2.0 * p.blocks[static_cast<std::size_t>(y)](a, b);
  for (std::size_t k = 0; k < big; ++k) g2(k, k) += L;
  const auto factor = cholesky_factor(SymMatrix(g2));
  StackedWeights prev = w;
  ThetaState theta;
  for (int t = 1; t <= iters; ++t) {
    const auto active = active_from_responses(responses(p.features, w));
    Matrix h(big, big);
    for (std::size_t i = 0; i < p.features.rows(); ++i) {
      const std::size_t off = static_cast<std::size_t>(active[i] - 1) * dim;
      for (std::size_t a = 0; a < dim; ++a)
        for (std::size_t b = 0; b < dim; ++b) h(off + a, off + b) += p.C2 * p.features(i, a) * p.features(i, b);
    }
    const Vector hw = matvec(h, w.values);
    const BetaStep bs = beta_next(t, theta, lambda, L, 50);
    theta = bs.next;
    Vector rhs(big);
    for (std::size_t k = 0; k < big; ++k)
      rhs[k] = L * (w.values[k] + bs.beta * (w.values[k] - prev.values[k])) + 2.0 * hw[k];
    prev = w;
    w = StackedWeights(p.K, dim, spd_solve(factor, rhs));
  }
  return w;
}

TEST(RunMpdcae, MatchesPlainIterationUpToTrackedScale) {
  const Dataset d = gen_cross_planes(12, 0.1, 0.1, 8);
  const DcaProblem p = linear_problem(d, 1.0, 0.5);
  NsvmConfig cfg;
  cfg.C2 = 0.5;
  cfg.guard = DescentGuard::None;
  cfg.tol = 1e-300;
  for (int iters : {1, 2, 5, 12}) {
    cfg.max_iter = iters;
    const auto start = random_weights(4, 3, 2);
    const auto r = run_mpdcae(p, cfg, start);
    const auto ref = reference_iterates(p, start, cfg.L, r.trace.lambda_min, iters);
    const double s = std::exp(r.trace.log_scale);
    for (std::size_t k = 0; k < ref.values.size(); ++k)
      EXPECT_NEAR(s * r.weights.values[k], ref.values[k], 1e-9 * norm2(ref.values)) << "iters=" << iters;
  }
}

TEST(RunMpdcae, UnguardedRunOnlyCountsViolations) {
  const Dataset d = gen_cross_planes(25, 0.1, 0.1, 2);
  const DcaProblem p = linear_problem(d, 1.0, 4.0);
  NsvmConfig cfg;
  cfg.C2 = 4.0;
  cfg.max_iter = 60;
  cfg.guard = DescentGuard::None;
  const auto r = run_mpdcae(p, cfg, random_weights(4, 3, 5));
  for (const auto& e : r.trace.entries) EXPECT_EQ(e.L, cfg.L);
  EXPECT_EQ(r.trace.total_backtracks, 0);
  EXPECT_GE(r.trace.descent_violations, 0);
}

TEST(RunMpdcae, MaxIterOneGivesOneEntry) {
  const Dataset d = gen_xor();
  const DcaProblem p = linear_problem(d, 1.0, 1.0);
  NsvmConfig cfg;
  cfg.max_iter = 1;
  const auto r = run_mpdcae(p, cfg, random_weights(2, 3, 0));
  EXPECT_EQ(r.trace.iterations(), 1u);
  EXPECT_EQ(r.trace.entries[0].beta, 0.0);
}

TEST(RunMpdcae, DeterministicForFixedStart) {
  const Dataset d = gen_cross_planes(10, 0.1, 0.0, 4);
  const DcaProblem p = linear_problem(d, 1.0, 1.0);
  NsvmConfig cfg;
  const auto a = run_mpdcae(p, cfg, random_weights(4, 3, 8));
  const auto b = run_mpdcae(p, cfg, random_weights(4, 3, 8));
  EXPECT_EQ(a.weights, b.weights);
}

TEST(RunMpdcae, RejectsInconsistentInputs) {
  const Dataset d = gen_xor();
  const DcaProblem p = linear_problem(d, 1.0, 1.0);
  EXPECT_THROW(run_mpdcae(p, NsvmConfig{}, random_weights(3, 3, 0)), Error);
  EXPECT_THROW(run_mpdcae(p, NsvmConfig{}, random_weights(2, 4, 0)), Error);
}

TEST(NsvmConfig, Validation) {
  auto kind = [](NsvmConfig c) {
    try {
      c.validate();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::IoError;
  };
  NsvmConfig c;
  EXPECT_NO_THROW(c.validate());
  c.C1 = 0.0;
  EXPECT_EQ(kind(c), ErrorKind::BadConfig);
  c = {};
  c.C2 = -1.0;
  EXPECT_EQ(kind(c), ErrorKind::BadConfig);
  c = {};
  c.L = 0.0;
  EXPECT_EQ(kind(c), ErrorKind::BadConfig);
  c = {};
  c.max_iter = 0;
  EXPECT_EQ(kind(c), ErrorKind::BadConfig);
  c = {};
  c.tol = 0.0;
  EXPECT_EQ(kind(c), ErrorKind::BadConfig);
  c = {};
  c.restart_period = 0;
  EXPECT_EQ(kind(c), ErrorKind::BadConfig);
}

TEST(RandomWeights, RangeAndSeed) {
  const auto w = random_weights(3, 4, 17);
  EXPECT_EQ(w.values.size(), 12u);
  for (double v : w.values) {
    EXPECT_GE(v, -0.5);
    EXPECT_LT(v, 0.5);
  }
  EXPECT_EQ(w, random_weights(3, 4, 17));
  EXPECT_NE(w, random_weights(3, 4, 18));
}

}  // namespace
}  // namespace nsvm
