#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "truncest/fat_sampler.hpp"

namespace truncest {

enum class Verdict { same, far };
const char* to_string(Verdict v);

// A distribution tester fed with untruncated samples. Verdicts depend only on
// the samples handed in.
class Tester {
 public:
  virtual ~Tester() = default;
  virtual std::string name() const = 0;
  virtual std::uint64_t sample_complexity(int d, double eps) const = 0;
  // Samples from an unknown product distribution against a known one.
  virtual Verdict identity(const ProductDistribution& known, std::span<const BitVector> samples,
                           double eps) const = 0;
  virtual Verdict closeness(std::span<const BitVector> a, std::span<const BitVector> b,
                            double eps) const = 0;
};

// Plug-in tester. For d <= exact_limit, fits product distributions to the
// samples and answers FAR iff the exact TV between the fits (or the fit and
// the known law) is at least eps / 2. Above that it compares coordinate means
// against a Bonferroni-corrected Hoeffding band at confidence 1 - delta.
// Uses ceil(16 d / eps^2) samples, which is not sample-optimal.
class BaselineTester final : public Tester {
 public:
  explicit BaselineTester(int exact_limit = 12, double delta = 1.0 / 3.0)
      : exact_limit_(exact_limit), delta_(delta) {}
  std::string name() const override { return "baseline"; }
  std::uint64_t sample_complexity(int d, double eps) const override;
  Verdict identity(const ProductDistribution& known, std::span<const BitVector> samples,
                   double eps) const override;
  Verdict closeness(std::span<const BitVector> a, std::span<const BitVector> b,
                    double eps) const override;

  // Half-width of the per-coordinate band with n samples.
  double band(int d, std::uint64_t n) const;

 private:
  int exact_limit_;
  double delta_;
};

std::unique_ptr<Tester> baseline_tester();

// Empirical product fit with means clamped to [1/(2n), 1 - 1/(2n)].
ProductDistribution fit_product(std::span<const BitVector> samples, int d);

struct ReconstructedBatch {
  std::vector<BitVector> samples;
  std::uint64_t truncated_samples = 0;
  std::uint64_t oracle_queries = 0;
};
ReconstructedBatch reconstruct(const TruncatedDistribution& td, std::uint64_t n, Rng& rng,
                               const FatSampleOptions& opts = {});

struct TestOutcome {
  Verdict verdict;
  std::uint64_t tester_samples;     // per side
  std::uint64_t truncated_samples;  // both sides together
};

TestOutcome identity_test(const ProductDistribution& known, const TruncatedDistribution& td,
                          double eps, const Tester& tester, Rng& rng,
                          const FatSampleOptions& opts = {});
TestOutcome closeness_test(const TruncatedDistribution& td1, const TruncatedDistribution& td2,
                           double eps, const Tester& tester, Rng& rng,
                           const FatSampleOptions& opts = {});

}  // namespace truncest
