#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "truncest/core_dist.hpp"

namespace truncest {

// Black-box answer to "is x in S". Implementations must be deterministic and
// safe to query concurrently.
class MembershipOracle {
 public:
  virtual ~MembershipOracle() = default;
  virtual bool contains(const BitVector& x) const = 0;
};

// A truncation set seen through its membership oracle. Copies share the
// oracle and the query counter.
class TruncationSet {
 public:
  TruncationSet(int dim, std::shared_ptr<const MembershipOracle> oracle, std::string descriptor,
                std::optional<std::vector<BitVector>> elements = std::nullopt);

  static TruncationSet from_predicate(int dim, std::function<bool(const BitVector&)> pred,
                                      std::string descriptor);

  int dim() const { return dim_; }
  const std::string& descriptor() const { return descriptor_; }

  // Counted query.
  bool contains(const BitVector& x) const {
    queries_->fetch_add(1, std::memory_order_relaxed);
    return oracle_->contains(x);
  }
  // Uncounted query, for exact oracles and diagnostics that are not part of
  // an estimator's budget.
  bool contains_uncounted(const BitVector& x) const { return oracle_->contains(x); }

  std::uint64_t queries() const { return queries_->load(std::memory_order_relaxed); }

  // Sorted element list when the family makes it available.
  const std::vector<BitVector>* elements() const { return elements_.get(); }

  // The set {x ^ anchor : x in S}.
  TruncationSet xor_shifted(const BitVector& anchor) const;

 private:
  int dim_;
  std::shared_ptr<const MembershipOracle> oracle_;
  std::shared_ptr<std::atomic<std::uint64_t>> queries_;
  std::shared_ptr<const std::vector<BitVector>> elements_;
  std::string descriptor_;
};

// Allowed values of one coordinate in a product set.
enum class CoordinateSupport : std::uint8_t { zero = 1, one = 2, both = 3 };

namespace sets {
TruncationSet full(int d);
// {x : x_1 + ... + x_d <= k}
TruncationSet l1_leq(int d, int k);
TruncationSet explicit_set(int d, std::vector<BitVector> points);
// {x : w^T x not in (c - lambda, c + lambda)}; the interval is open.
TruncationSet slab_complement(std::vector<double> w, double c, double lambda);
TruncationSet product(std::vector<CoordinateSupport> supports);
// Each point is a member independently with probability rho, decided by a
// keyed hash so the oracle stays deterministic.
TruncationSet random_density(int d, double rho, std::uint64_t seed);
}  // namespace sets

// Parses the set-descriptor mini-language:
//   l1_leq:k | explicit:@file | slab_complement:w=<csv>,c=<real>,lambda=<real>
//   | product:@file | random_density:rho=<real>,seed=<u64>
// Relative @file paths are resolved against base_dir.
TruncationSet parse_set_descriptor(std::string_view descriptor, int d,
                                   const std::filesystem::path& base_dir = {});

// One bit-string of length d per line; lines starting with '#' and blank
// lines are skipped.
std::vector<BitVector> read_bitstring_file(const std::filesystem::path& path, int d);
std::vector<CoordinateSupport> read_product_file(const std::filesystem::path& path, int d);

struct TruncatedDistribution {
  TruncatedDistribution(ProductDistribution base, TruncationSet set);

  int dim() const { return base.dim(); }

  ProductDistribution base;
  TruncationSet set;
};

// Flips coordinates so that `anchor` becomes the zero vector. Returns the
// shifted set and the matching product distribution; D'(x ^ a) = D(x).
std::pair<TruncationSet, ProductDistribution> normalize(const TruncationSet& set,
                                                        const ProductDistribution& dist,
                                                        const BitVector& anchor);

struct TruncatedDraw {
  BitVector x;
  std::uint64_t attempts = 0;
};

// max(1e4, 100 / alpha) with an estimate, else 1e6.
std::uint64_t default_rejection_budget(std::optional<double> alpha_hat = std::nullopt);

// Exact rejection sampler for D_S; each attempt costs one membership query.
TruncatedDraw sample_truncated(const TruncatedDistribution& td, Rng& rng,
                               std::uint64_t max_attempts);

struct PointMass {
  BitVector x;
  double prob;
};
using Pmf = std::vector<PointMass>;

// D_S(x) over the members of S, sorted by x. Requires d <= enumeration_limit().
Pmf exact_truncated_pmf(const TruncatedDistribution& td);

// D(S) by enumeration.
double exact_mass(const ProductDistribution& dist, const TruncationSet& set);

struct MassEstimate {
  double mass;
  double std_error;
  std::uint64_t n;
};
MassEstimate estimate_mass(const ProductDistribution& dist, const TruncationSet& set,
                           std::uint64_t n, Rng& rng);

struct FatnessReport {
  std::vector<double> per_coordinate;
  double min_alpha = 0.0;
  std::uint64_t samples_used = 0;
  // Simultaneous Hoeffding half-width epsilon holding with probability 1 - delta.
  double epsilon = 0.0;
  double delta = 0.05;
};

FatnessReport estimate_fatness(const TruncatedDistribution& td, std::uint64_t n, Rng& rng,
                               std::uint64_t max_attempts = default_rejection_budget());

// P_{x ~ D_S}[flip(x, i) in S] for every i, by enumeration.
std::vector<double> exact_fatness(const TruncatedDistribution& td);

// Largest lambda such that, on the given sample, every open interval of
// half-width lambda along w leaves at least a lambda fraction outside.
double anticoncentration_along(std::span<const BitVector> samples, std::span<const double> w);

struct AntiConcentrationEstimate {
  double lambda_hat;
  std::vector<double> worst_direction;
  std::uint64_t samples_used;
};

// Minimum of anticoncentration_along over `directions` uniformly random unit
// vectors. Random directions cannot find the true infimum, so this is an
// optimistic (upper) estimate of lambda*.
AntiConcentrationEstimate estimate_anticoncentration(
    const TruncatedDistribution& td, int directions, std::uint64_t n, Rng& rng,
    std::uint64_t max_attempts = default_rejection_budget());

}  // namespace truncest
