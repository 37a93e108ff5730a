#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "test_util.hpp"
#include "truncest/sgd.hpp"

using namespace truncest;
using testutil::uniform_product;

namespace {

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

double norm(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

std::vector<TruncatedDistribution> fixtures() {
  Rng g(100);
  std::vector<TruncatedDistribution> out;
  out.emplace_back(testutil::random_product(6, g, 0.25, 0.75), sets::l1_leq(6, 3));
  out.emplace_back(testutil::random_product(8, g, 0.25, 0.75), sets::l1_leq(8, 4));
  out.emplace_back(testutil::random_product(10, g, 0.25, 0.75), sets::l1_leq(10, 6));
  out.emplace_back(testutil::random_product(6, g, 0.25, 0.75), sets::random_density(6, 0.6, 17));
  return out;
}

}  // namespace

TEST(SgdConfig, Validation) {
  SgdConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.steps = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.eta = 0.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.repetitions = 0;
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(EmpiricalInit, FullCubeConverges) {
  Rng rng(1);
  TruncatedDistribution td(testutil::random_product(5, rng), sets::full(5));
  const auto init = empirical_init(td, 200000, rng);
  for (int i = 0; i < 5; ++i) {
    EXPECT_NEAR(init.p_hat[i], td.base.mean()[i], 0.005);
    EXPECT_NEAR(init.z_hat[i], logit(init.p_hat[i]), 1e-12);
  }
}

TEST(EmpiricalInit, MatchesTruncatedMean) {
  TruncatedDistribution td(uniform_product(8), sets::l1_leq(8, 4));
  const ExactObjective obj(td);
  Rng rng(2);
  const std::uint64_t n = 20000;
  const auto init = empirical_init(td, n, rng);
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(init.p_hat[i], obj.target_mean()[i], 3 * std::sqrt(0.25 / n));
}

TEST(EmpiricalInit, ClampsDegenerateMeans) {
  TruncatedDistribution td(uniform_product(3), sets::explicit_set(3, {BitVector::parse("100")}));
  Rng rng(3);
  const auto init = empirical_init(td, 4, rng);
  EXPECT_DOUBLE_EQ(init.p_hat[0], 1 - 1.0 / 8);
  EXPECT_DOUBLE_EQ(init.p_hat[1], 1.0 / 8);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(std::isfinite(init.z_hat[i]));
}

TEST(Projection, Examples) {
  Ball ball{{0.0, 0.0}, 1.0};
  std::vector<double> c = {0.0, 0.0};
  EXPECT_FALSE(project_to_ball(c, ball));
  EXPECT_EQ(c, (std::vector<double>{0.0, 0.0}));
  std::vector<double> in = {0.3, -0.4};
  EXPECT_FALSE(project_to_ball(in, ball));
  EXPECT_EQ(in, (std::vector<double>{0.3, -0.4}));
  std::vector<double> out = {3.0, 4.0};
  EXPECT_TRUE(project_to_ball(out, ball));
  EXPECT_NEAR(out[0], 0.6, 1e-15);
  EXPECT_NEAR(out[1], 0.8, 1e-15);
  Ball off{{1.0, 1.0}, 2.0};
  const auto p = project_to_ball(NaturalParams({1.0, 5.0}), off);
  EXPECT_NEAR(p[0], 1.0, 1e-15);
  EXPECT_NEAR(p[1], 3.0, 1e-15);
  EXPECT_TRUE(off.contains(p.values()));
}

TEST(StochasticGradient, EqualSamplesGiveZero) {
  Rng rng(4);
  const auto S = sets::explicit_set(3, {BitVector::parse("101")});
  const auto g = stochastic_gradient(BitVector::parse("101"), std::vector<double>{0.1, 0.2, 0.3}, S, rng, 1000);
  for (double v : g.v) EXPECT_EQ(v, 0.0);
}

TEST(StochasticGradient, VanishesAtTruthOnFullCube) {
  Rng rng(5);
  TruncatedDistribution td(testutil::random_product(5, rng), sets::full(5));
  const int n = 100000;
  std::vector<double> sum(5, 0.0), sq(5, 0.0);
  for (int k = 0; k < n; ++k) {
    const auto x = sample_truncated(td, rng, 10).x;
    const auto g = stochastic_gradient(x, td.base.natural().values(), td.set, rng, 10);
    for (int i = 0; i < 5; ++i) {
      sum[i] += g.v[i];
      sq[i] += g.v[i] * g.v[i];
    }
  }
  for (int i = 0; i < 5; ++i) {
    const double m = sum[i] / n, se = std::sqrt((sq[i] / n - m * m) / n);
    EXPECT_LE(std::abs(m), 3 * se) << i;
  }
}

TEST(StochasticGradient, UnbiasedOnFixtures) {
  Rng rng(6);
  int checked = 0, within = 0;
  for (auto& td : fixtures()) {
    const int d = td.dim();
    const ExactObjective obj(td);
    const auto z = testutil::random_p(d, rng, -0.5, 0.5);
    std::vector<double> zz(d);
    for (int i = 0; i < d; ++i) zz[i] = td.base.natural()[i] + z[i];
    const auto exact = obj.gradient(zz);
    const int n = 200000;
    std::vector<double> sum(d, 0.0), sq(d, 0.0);
    for (int k = 0; k < n; ++k) {
      const auto x = sample_truncated(td, rng, 10000).x;
      const auto g = stochastic_gradient(x, zz, td.set, rng, 10000);
      for (int i = 0; i < d; ++i) {
        sum[i] += g.v[i];
        sq[i] += g.v[i] * g.v[i];
      }
    }
    for (int i = 0; i < d; ++i) {
      const double m = sum[i] / n, se = std::sqrt((sq[i] / n - m * m) / n);
      ++checked;
      within += std::abs(m - exact[i]) <= 3 * se;
    }
  }
  // Three-sigma bands fail about 0.3% of the time per coordinate.
  EXPECT_GE(within, checked - 1);
}

TEST(StochasticGradient, NormBoundedByDimension) {
  Rng rng(7);
  TruncatedDistribution td(uniform_product(7), sets::l1_leq(7, 3));
  for (int k = 0; k < 2000; ++k) {
    const auto g = stochastic_gradient(sample_truncated(td, rng, 1000).x, std::vector<double>(7, 0.4), td.set, rng, 1000);
    double s = 0.0;
    for (double v : g.v) {
      EXPECT_TRUE(v == -1 || v == 0 || v == 1);
      s += v * v;
    }
    EXPECT_LE(s, 7.0);
  }
}

TEST(StochasticGradient, BudgetExhaustion) {
  Rng rng(8);
  const auto S = sets::explicit_set(2, {BitVector::parse("11")});
  EXPECT_THROW(stochastic_gradient(BitVector::parse("11"), std::vector<double>{-40.0, -40.0}, S, rng, 50),
               RejectionBudgetError);
}

TEST(ExactObjective, EntropyAtTruthWithoutTruncation) {
  Rng rng(9);
  TruncatedDistribution td(testutil::random_product(6, rng), sets::full(6));
  double H = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double p = td.base.mean()[i];
    H -= p * std::log(p) + (1 - p) * std::log(1 - p);
  }
  EXPECT_NEAR(exact_population_nll(td.base.natural(), td), H, 1e-12);
}

TEST(ExactObjective, TruthMinimizes) {
  Rng rng(10);
  TruncatedDistribution td(testutil::random_product(6, rng, 0.2, 0.8), sets::l1_leq(6, 3));
  const double at_truth = exact_population_nll(td.base.natural(), td);
  for (int k = 0; k < 100; ++k) {
    auto dz = testutil::random_p(6, rng, -1.0, 1.0);
    const double n = norm(dz, std::vector<double>(6, 0.0));
    std::vector<double> z(6);
    for (int i = 0; i < 6; ++i) z[i] = td.base.natural()[i] + 0.5 * dz[i] / n;
    EXPECT_GE(exact_population_nll(NaturalParams(z), td), at_truth);
  }
}

TEST(ExactObjective, ConvexAlongSegments) {
  Rng rng(11);
  TruncatedDistribution td(testutil::random_product(6, rng, 0.2, 0.8), sets::random_density(6, 0.5, 3));
  const ExactObjective obj(td);
  for (int k = 0; k < 200; ++k) {
    const auto a = testutil::random_p(6, rng, -2, 2), b = testutil::random_p(6, rng, -2, 2);
    std::vector<double> m(6);
    for (int i = 0; i < 6; ++i) m[i] = 0.5 * (a[i] + b[i]);
    EXPECT_LE(obj.nll(m), 0.5 * (obj.nll(a) + obj.nll(b)) + 1e-12);
  }
}

TEST(ExactObjective, GradientVanishesAtTruth) {
  for (auto& td : fixtures()) {
    const auto [g, H] = exact_gradient_hessian(td.base.natural(), td);
    for (double v : g) EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(ExactObjective, GradientAndHessianMatchFiniteDifferences) {
  Rng rng(12);
  for (auto& td : fixtures()) {
    const int d = td.dim();
    const ExactObjective obj(td);
    const auto z = testutil::random_p(d, rng, -1, 1);
    const auto [g, H] = obj.gradient_hessian(z);
    const double h = 1e-4;
    for (int i = 0; i < d; ++i) {
      auto zp = z, zm = z;
      zp[i] += h;
      zm[i] -= h;
      EXPECT_NEAR(g[i], (obj.nll(zp) - obj.nll(zm)) / (2 * h), 1e-6);
      const auto gp = obj.gradient(zp), gm = obj.gradient(zm);
      for (int j = 0; j < d; ++j) EXPECT_NEAR(H(i, j), (gp[j] - gm[j]) / (2 * h), 1e-5);
    }
    EXPECT_LE((H - H.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_GE(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(H).eigenvalues().minCoeff(), -1e-12);
  }
}

TEST(ExactObjective, HessianWithoutTruncationIsDiagonal) {
  Rng rng(13);
  TruncatedDistribution td(testutil::random_product(5, rng), sets::full(5));
  const auto [g, H] = exact_gradient_hessian(td.base.natural(), td);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const double p = td.base.mean()[i];
      EXPECT_NEAR(H(i, j), i == j ? p * (1 - p) : 0.0, 1e-12);
    }
}

TEST(ExactObjective, StrictlyConvexWhenAnticoncentrated) {
  Rng rng(14);
  TruncatedDistribution td(testutil::random_product(5, rng, 0.2, 0.8), sets::l1_leq(5, 2));
  EXPECT_GT(estimate_anticoncentration(td, 32, 5000, rng).lambda_hat, 0.0);
  EXPECT_GT(hessian_min_eigenvalue(td.set, td.base.natural().values()), 0.0);
}

TEST(ExactObjective, CapabilityCeiling) {
  const int d = enumeration_limit() + 1;
  TruncatedDistribution td(uniform_product(d), sets::full(d));
  EXPECT_THROW(ExactObjective{td}, CapabilityError);
}

TEST(RunSgd, SingleStep) {
  Rng rng(15);
  TruncatedDistribution td(testutil::random_product(4, rng), sets::l1_leq(4, 2));
  SgdConfig cfg;
  cfg.steps = 1;
  cfg.seed = 3;
  const auto r = run_sgd(td, cfg);
  ASSERT_EQ(r.trace.size(), 1u);
  EXPECT_TRUE(r.ball.contains(r.estimate.values()));
}

TEST(RunSgd, DeterministicAndInsideBall) {
  Rng rng(16);
  TruncatedDistribution td(testutil::random_product(6, rng, 0.25, 0.75), sets::l1_leq(6, 3));
  SgdConfig cfg;
  cfg.steps = 5000;
  cfg.seed = 11;
  const auto a = run_sgd(td, cfg), b = run_sgd(td, cfg);
  EXPECT_EQ(vec(a.estimate.values()), vec(b.estimate.values()));
  EXPECT_EQ(a.truncated_samples, b.truncated_samples);
  ASSERT_EQ(a.trace.size(), 5000u);
  for (const auto& s : a.trace) EXPECT_LE(s.center_distance, a.ball.radius + 1e-12);
  EXPECT_GE(a.ball.radius, cfg.min_ball_radius);
}

TEST(RunSgd, UntruncatedConsistency) {
  Rng rng(17);
  TruncatedDistribution td(testutil::random_product(5, rng, 0.2, 0.8), sets::full(5));
  SgdConfig cfg;
  cfg.steps = 100000;
  cfg.seed = 5;
  const ProductDistribution est(run_sgd(td, cfg).estimate);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(est.mean()[i], td.base.mean()[i], 0.02);
}

TEST(RunSgd, RecoversTruthOnL1Ball) {
  Rng g(18);
  TruncatedDistribution td(testutil::random_product(10, g, 0.25, 0.75), sets::l1_leq(10, 6));
  int ok = 0;
  for (int r = 0; r < 5; ++r) {
    SgdConfig cfg;
    cfg.seed = 1000 + r;
    ok += norm(run_sgd(td, cfg).estimate.values(), td.base.natural().values()) <= 0.25;
  }
  EXPECT_GE(ok, 4);
}

TEST(RunSgd, NllDecreasesAfterBurnIn) {
  Rng g(19);
  TruncatedDistribution td(testutil::random_product(8, g, 0.25, 0.75), sets::l1_leq(8, 4));
  SgdConfig cfg;
  cfg.steps = 20000;
  cfg.seed = 4;
  cfg.trace_nll_every = 500;
  const auto r = run_sgd(td, cfg);
  std::vector<double> nll;
  for (const auto& s : r.trace)
    if (!std::isnan(s.nll)) nll.push_back(s.nll);
  ASSERT_GE(nll.size(), 30u);
  // Windowed means over the second half of the run.
  const std::size_t w = 5;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = nll.size() / 2; k + w <= nll.size(); k += w) {
    double m = 0.0;
    for (std::size_t j = k; j < k + w; ++j) m += nll[j];
    m /= w;
    EXPECT_LE(m, prev + 1e-3);
    prev = m;
  }
}

TEST(RunSgd, BallContainsTruthOnMildTruncations) {
  Rng g(20);
  for (int rep = 0; rep < 10; ++rep) {
    const bool big = rep % 2 == 0;
    TruncatedDistribution td(testutil::random_product(big ? 10 : 8, g, big ? 0.25 : 0.2, big ? 0.75 : 0.8),
                             big ? sets::l1_leq(10, 6) : sets::l1_leq(8, 5));
    SgdConfig cfg;
    cfg.steps = 1;
    cfg.seed = g();
    const auto r = run_sgd(td, cfg);
    EXPECT_TRUE(r.ball.contains(td.base.natural().values()))
        << td.set.descriptor() << " radius " << r.ball.radius << " distance "
        << norm(r.ball.center, td.base.natural().values());
  }
}

TEST(RunSgd, MassStaysAboveFloorInsideBall) {
  for (auto& td : fixtures()) {
    SgdConfig cfg;
    cfg.steps = 1;
    cfg.seed = 21;
    const auto r = run_sgd(td, cfg);
    Rng rng(22);
    for (int k = 0; k < 50; ++k) {
      const auto z = random_point_in_ball(r.ball, rng);
      EXPECT_TRUE(r.ball.contains(z));
      EXPECT_GE(exact_mass(ProductDistribution(NaturalParams(z)), td.set), 1e-3) << td.set.descriptor();
    }
  }
}

TEST(Amplification, Count) {
  EXPECT_EQ(amplification_count(0.5), 1);
  EXPECT_EQ(amplification_count(0.01), 7);
  EXPECT_EQ(amplification_count(0.9), 1);
}

TEST(Amplification, SingleRunMatchesRunSgd) {
  Rng g(23);
  TruncatedDistribution td(testutil::random_product(5, g), sets::l1_leq(5, 3));
  SgdConfig cfg;
  cfg.steps = 2000;
  cfg.seed = 9;
  EXPECT_EQ(vec(amplified_runs(td, cfg, 1).estimate.values()), vec(run_sgd(td, cfg).estimate.values()));
}

TEST(Amplification, CorruptedRunNeverSelected) {
  std::vector<std::vector<double>> ests(5, {0.3, -0.2, 0.1});
  for (std::size_t bad = 0; bad < 5; ++bad) {
    auto e = ests;
    e[bad] = {40.0, -17.0, 9.0};
    EXPECT_NE(select_consensus(e), bad);
  }
  std::vector<std::vector<double>> spread = {{0.0}, {0.1}, {0.15}, {0.3}, {5.0}};
  const auto pick = select_consensus(spread);
  EXPECT_TRUE(pick == 1u || pick == 2u) << pick;
}

TEST(Amplification, ParallelRunsAreReproducible) {
  Rng g(24);
  TruncatedDistribution td(testutil::random_product(5, g), sets::l1_leq(5, 3));
  SgdConfig cfg;
  cfg.steps = 2000;
  cfg.seed = 10;
  const auto a = amplified_runs(td, cfg, 4), b = amplified_runs(td, cfg, 4);
  ASSERT_EQ(a.runs.size(), 4u);
  EXPECT_EQ(a.selected, b.selected);
  for (int r = 0; r < 4; ++r) EXPECT_EQ(vec(a.runs[r].estimate.values()), vec(b.runs[r].estimate.values()));
  EXPECT_NE(vec(a.runs[0].estimate.values()), vec(a.runs[1].estimate.values()));
}

TEST(Variance, FairCoinsFullCube) {
  TruncatedDistribution td(uniform_product(6), sets::full(6));
  Rng rng(25);
  const auto r = variance_bound_check(td.base.natural(), td, 100000, rng);
  EXPECT_NEAR(r.mean_sq_norm, 3.0, 0.03);
  EXPECT_EQ(r.beta_hat, 1.0);
  EXPECT_TRUE(r.within_bounds());
}

TEST(Variance, PointMassIsZero) {
  TruncatedDistribution td(uniform_product(4), sets::explicit_set(4, {BitVector::parse("0110")}));
  Rng rng(26);
  const auto r = variance_bound_check(NaturalParams({0.3, -0.1, 0.2, 0.0}), td, 1000, rng);
  EXPECT_EQ(r.mean_sq_norm, 0.0);
}

TEST(Variance, TruncatedInstanceWithinBound) {
  Rng rng(27);
  TruncatedDistribution td(testutil::random_product(8, rng, 0.3, 0.7), sets::l1_leq(8, 4));
  const auto z = NaturalParams(testutil::random_p(8, rng, -0.5, 0.5));
  const auto r = variance_bound_check(z, td, 50000, rng);
  EXPECT_GT(r.beta_hat, 0.0);
  EXPECT_LE(r.mean_sq_norm, r.bound_4d_beta);
  EXPECT_TRUE(r.within_bounds());
}
