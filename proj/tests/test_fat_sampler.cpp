#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "truncest/fat_sampler.hpp"

using namespace truncest;
using testutil::uniform_product;

namespace {

TruncationSet three_point() {
  return sets::explicit_set(2, {BitVector::parse("00"), BitVector::parse("01"), BitVector::parse("10")});
}

ProductDistribution constant_product(int d, double p) {
  return ProductDistribution(MeanParams(std::vector<double>(d, p)));
}

std::vector<double> exact_pmf(const ProductDistribution& P) {
  std::vector<double> out(1ull << P.dim());
  for (std::uint64_t w = 0; w < out.size(); ++w) out[w] = P.pmf(BitVector(P.dim(), w));
  return out;
}

double tv_to(const std::vector<std::uint64_t>& counts, std::uint64_t n, const std::vector<double>& pmf) {
  double s = 0.0;
  for (std::size_t w = 0; w < pmf.size(); ++w) s += std::abs(static_cast<double>(counts[w]) / n - pmf[w]);
  return 0.5 * s;
}

}  // namespace

TEST(FatSample, FullCubeUsesOneDraw) {
  Rng rng(1);
  TruncatedDistribution td(testutil::random_product(7, rng), sets::full(7));
  for (int k = 0; k < 200; ++k) {
    Rng a(k), b(k);
    const auto out = fat_sample(td, a);
    EXPECT_EQ(out.state.samples_consumed, 1u);
    EXPECT_TRUE(out.state.complete());
    EXPECT_EQ(out.x, sample_truncated(td, b, 10).x);
  }
}

TEST(FatSample, LiteralModeFullCubeEqualsDraw) {
  Rng rng(2);
  TruncatedDistribution td(testutil::random_product(5, rng), sets::full(5));
  FatSampleOptions opts;
  opts.mode = FatSampleMode::literal;
  Rng a(9), b(9);
  const auto out = fat_sample(td, a, opts);
  EXPECT_EQ(out.state.samples_consumed, 1u);
  EXPECT_EQ(out.x, sample_truncated(td, b, 10).x);
}

TEST(FatSample, MarginalsOnL1Ball) {
  TruncatedDistribution td(constant_product(8, 0.3), sets::l1_leq(8, 5));
  Rng rng(3);
  const int n = 50000;
  std::vector<double> ones(8, 0.0);
  for (int k = 0; k < n; ++k) {
    const auto x = fat_sample(td, rng).x;
    for (int i = 0; i < 8; ++i) ones[i] += x[i];
  }
  for (int i = 0; i < 8; ++i) EXPECT_NEAR(ones[i] / n, 0.3, 0.01) << i;
}

TEST(FatSample, ThreePointSetCostAndLaw) {
  TruncatedDistribution td(uniform_product(2), three_point());
  Rng rng(4);
  const std::uint64_t n = 100000;
  std::vector<std::uint64_t> counts(4, 0);
  double consumed = 0.0;
  for (std::uint64_t k = 0; k < n; ++k) {
    const auto out = fat_sample(td, rng);
    ++counts[out.x.word()];
    consumed += static_cast<double>(out.state.samples_consumed);
  }
  EXPECT_LE(tv_to(counts, n, exact_pmf(td.base)), 0.01);
  // Each coordinate costs a geometric number of draws with mean 1 / (2/3).
  EXPECT_NEAR(consumed / n, 3.0, 0.03);
}

TEST(FatSample, DistributionalExactness) {
  Rng g(5);
  struct Case {
    int d;
    TruncationSet set;
  };
  std::vector<Case> cases;
  cases.push_back({6, sets::l1_leq(6, 3)});
  cases.push_back({8, sets::l1_leq(8, 5)});
  cases.push_back({6, sets::random_density(6, 0.7, 21)});
  cases.push_back({5, sets::slab_complement({1, 1, 1, 1, 1}, 2.5, 0.6)});
  for (auto& c : cases) {
    TruncatedDistribution td(testutil::random_product(c.d, g, 0.2, 0.8), c.set);
    Rng rng(g());
    const std::uint64_t n = 200000;
    std::vector<std::uint64_t> counts(1ull << c.d, 0);
    for (std::uint64_t k = 0; k < n; ++k) ++counts[fat_sample(td, rng).x.word()];
    const double bound = 3 * std::sqrt(std::ldexp(1.0, c.d) / n) + 0.005;
    EXPECT_LE(tv_to(counts, n, exact_pmf(td.base)), bound) << td.set.descriptor();
  }
}

TEST(FatSample, CoordinatesUncorrelated) {
  TruncatedDistribution td(constant_product(6, 0.4), sets::l1_leq(6, 3));
  Rng rng(6);
  const int n = 40000;
  std::vector<std::vector<int>> xs(n, std::vector<int>(6));
  for (int k = 0; k < n; ++k) {
    const auto x = fat_sample(td, rng).x;
    for (int i = 0; i < 6; ++i) xs[k][i] = x[i];
  }
  const double sigma = 0.4 * 0.6 / std::sqrt(static_cast<double>(n));
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) {
      double mi = 0, mj = 0, mij = 0;
      for (const auto& x : xs) {
        mi += x[i];
        mj += x[j];
        mij += x[i] * x[j];
      }
      const double cov = mij / n - (mi / n) * (mj / n);
      EXPECT_LE(std::abs(cov), 3 * sigma) << i << "," << j;
    }
}

TEST(FatSample, LiteralModeIsBiased) {
  TruncatedDistribution td(constant_product(8, 0.3), sets::l1_leq(8, 5));
  FatSampleOptions opts;
  opts.mode = FatSampleMode::literal;
  Rng rng(7);
  const std::uint64_t n = 200000;
  std::vector<std::uint64_t> literal(256, 0), exact(256, 0);
  for (std::uint64_t k = 0; k < n; ++k) ++literal[fat_sample(td, rng, opts).x.word()];
  for (std::uint64_t k = 0; k < n; ++k) ++exact[fat_sample(td, rng).x.word()];
  // Sampling noise alone gives about 0.012 here.
  EXPECT_LT(tv_to(exact, n, exact_pmf(td.base)), 0.02);
  EXPECT_GT(tv_to(literal, n, exact_pmf(td.base)), 0.025);
}

TEST(FatSample, CostScalesWithLogDimensionOverAlpha) {
  Rng g(8);
  std::vector<TruncatedDistribution> cases;
  cases.emplace_back(testutil::random_product(8, g, 0.2, 0.8), sets::l1_leq(8, 5));
  cases.emplace_back(testutil::random_product(10, g, 0.2, 0.8), sets::l1_leq(10, 6));
  cases.emplace_back(testutil::random_product(6, g, 0.2, 0.8), sets::random_density(6, 0.7, 4));
  cases.emplace_back(testutil::random_product(8, g, 0.2, 0.8), sets::full(8));
  for (auto& td : cases) {
    Rng rng(g());
    const auto fat = estimate_fatness(td, 20000, rng);
    double consumed = 0.0;
    const int n = 5000;
    for (int k = 0; k < n; ++k) consumed += static_cast<double>(fat_sample(td, rng).state.samples_consumed);
    EXPECT_LE(consumed / n, 8 * std::log(td.dim()) / fat.min_alpha) << td.set.descriptor();
  }
}

TEST(FatSample, StateIsMonotone) {
  TruncatedDistribution td(constant_product(6, 0.5), sets::l1_leq(6, 2));
  FatSampleOptions opts;
  opts.trace = true;
  Rng rng(9);
  for (auto mode : {FatSampleMode::per_coordinate, FatSampleMode::literal}) {
    opts.mode = mode;
    for (int k = 0; k < 500; ++k) {
      const auto out = fat_sample(td, rng, opts);
      std::vector<int> writes(6, 0);
      std::uint64_t last = 0;
      for (const auto& w : out.state.writes) {
        ++writes[w.coordinate];
        EXPECT_GE(w.sample_index, last);
        EXPECT_LE(w.sample_index, out.state.samples_consumed);
        last = w.sample_index;
        EXPECT_EQ(out.x[w.coordinate], w.value);
      }
      for (int c : writes) EXPECT_EQ(c, 1);
    }
  }
}

TEST(FatSample, FlipFreeCoordinateIsReported) {
  TruncatedDistribution td(uniform_product(5), flip_free_set(5, 3));
  Rng rng(10);
  FatSampleOptions opts;
  opts.budget = 200;
  for (auto mode : {FatSampleMode::per_coordinate, FatSampleMode::literal}) {
    opts.mode = mode;
    try {
      fat_sample(td, rng, opts);
      FAIL() << "expected a fatness deficit";
    } catch (const FatnessDeficitError& e) {
      EXPECT_EQ(e.stuck_coordinates(), std::vector<int>{3});
    }
  }
}

TEST(FatSample, DefaultBudget) {
  EXPECT_EQ(default_fat_budget(8), 1000000u);
  EXPECT_EQ(default_fat_budget(2, 0.5), 100u);
  EXPECT_EQ(default_fat_budget(20, 0.25), 50u * 12);
}

TEST(FatSampleCoordinate, FullCubeReturnsFirstBit) {
  Rng g(11);
  TruncatedDistribution td(testutil::random_product(4, g), sets::full(4));
  for (int k = 0; k < 100; ++k) {
    Rng a(k), b(k);
    const auto c = fat_sample_coordinate(td, 2, a, 10);
    EXPECT_EQ(c.samples_consumed, 1u);
    EXPECT_EQ(c.bit, sample_truncated(td, b, 10).x[2]);
  }
}

TEST(FatSampleCoordinate, ThreePointConditionalLaw) {
  TruncatedDistribution td(uniform_product(2), three_point());
  Rng rng(12);
  const int n = 100000;
  double ones = 0.0;
  for (int k = 0; k < n; ++k) ones += fat_sample_coordinate(td, 1, rng, 1000).bit;
  EXPECT_NEAR(ones / n, 0.5, 0.005);
}

TEST(FatSampleCoordinate, DegenerateMarginal) {
  TruncatedDistribution td(ProductDistribution(MeanParams({0.3, 0.999})),
                           sets::product({CoordinateSupport::zero, CoordinateSupport::both}));
  Rng rng(13);
  const int n = 100000;
  double ones = 0.0;
  for (int k = 0; k < n; ++k) ones += fat_sample_coordinate(td, 1, rng, 10).bit;
  EXPECT_NEAR(ones / n, 0.999, 0.0005);
}

TEST(FatSampleCoordinate, ZeroFatnessErrors) {
  TruncatedDistribution td(uniform_product(3), flip_free_set(3, 0));
  Rng rng(14);
  EXPECT_THROW(fat_sample_coordinate(td, 0, rng, 100), FatnessDeficitError);
  EXPECT_THROW(fat_sample_coordinate(td, 3, rng, 100), DomainError);
}

TEST(EstimateParameter, HoeffdingCount) {
  EXPECT_EQ(hoeffding_samples(0.05, 0.05), 738u);
  EXPECT_THROW(hoeffding_samples(0.0, 0.5), DomainError);
  EXPECT_THROW(hoeffding_samples(0.5, 1.0), DomainError);
}

TEST(EstimateParameter, CoverageOnFullCube) {
  TruncatedDistribution td(uniform_product(3), sets::full(3));
  Rng rng(15);
  int hits = 0;
  for (int r = 0; r < 500; ++r) {
    const auto est = estimate_parameter(td, 1, 0.02, 0.01, rng);
    EXPECT_EQ(est.n, hoeffding_samples(0.02, 0.01));
    hits += std::abs(est.p_hat - 0.5) <= 0.02;
  }
  EXPECT_GE(hits, 495);
}

TEST(EstimateParameter, ZeroFatnessErrors) {
  TruncatedDistribution td(uniform_product(3), flip_free_set(3, 2));
  Rng rng(16);
  EXPECT_THROW(estimate_parameter(td, 2, 0.1, 0.1, rng), FatnessDeficitError);
}

TEST(LearnTv, SampleCount) {
  EXPECT_EQ(learn_tv_samples(8, 0.1, 0.1), static_cast<std::uint64_t>(std::ceil(4 * 8 * std::log(80.0) / 0.01)));
}

TEST(LearnTv, EpsOneIsTrivial) {
  Rng rng(17);
  TruncatedDistribution td(testutil::random_product(4, rng), sets::l1_leq(4, 2));
  const auto r = learn_tv(td, 1.0, 0.5, rng);
  EXPECT_LE(exact_tv(r.estimate, td.base), 1.0);
  EXPECT_EQ(r.outputs, learn_tv_samples(4, 1.0, 0.5));
}

TEST(LearnTv, AccurateOnL1Ball) {
  Rng g(18);
  int ok = 0;
  const int reps = 10;
  for (int r = 0; r < reps; ++r) {
    TruncatedDistribution td(testutil::random_product(8, g, 0.2, 0.8), sets::l1_leq(8, 5));
    Rng rng(g());
    ok += exact_tv(learn_tv(td, 0.1, 0.1, rng).estimate, td.base) <= 0.1;
  }
  EXPECT_GE(ok, 9);
}

TEST(LearnTv, LargeSampleConverges) {
  Rng g(19);
  TruncatedDistribution td(testutil::random_product(4, g, 0.2, 0.8), sets::l1_leq(4, 3));
  Rng rng(20);
  // C chosen so that n is about one million.
  const double C = 1e6 * 0.01 / (4 * std::log(4 / 0.1));
  const auto r = learn_tv(td, 0.1, 0.1, rng, C);
  EXPECT_GE(r.outputs, 999000u);
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(r.estimate.mean()[i], td.base.mean()[i], 0.005);
}

TEST(LearnSparse, ZeroSparsityReturnsConstant) {
  Rng rng(21);
  TruncatedDistribution td(testutil::random_product(5, rng), sets::full(5));
  const auto r = learn_sparse(td, 0, 0.4, 0.1, 0.1, rng);
  for (int i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(r.estimate.mean()[i], 0.4);
  EXPECT_EQ(r.samples_consumed, 0u);
  EXPECT_THROW(learn_sparse(td, 6, 0.5, 0.1, 0.1, rng), DomainError);
}

TEST(LearnSparse, FullSparsityMatchesDenseAccuracy) {
  Rng g(22);
  TruncatedDistribution td(testutil::random_product(5, g, 0.2, 0.8), sets::l1_leq(5, 3));
  Rng rng(23);
  const auto r = learn_sparse(td, 5, 0.5, 0.1, 0.1, rng);
  EXPECT_LE(exact_tv(r.estimate, td.base), 0.1);
}

TEST(LearnSparse, RecoversSupport) {
  std::vector<double> p(10, 0.5);
  p[0] = 0.8;
  p[1] = 0.2;
  TruncatedDistribution td{ProductDistribution(MeanParams(p)), sets::l1_leq(10, 7)};
  Rng g(24);
  int ok = 0;
  for (int r = 0; r < 20; ++r) {
    Rng rng(g());
    const auto rep = learn_sparse(td, 2, 0.5, 0.1, 0.1, rng);
    ok += rep.support == std::vector<int>{0, 1};
  }
  EXPECT_GE(ok, 18);
}
