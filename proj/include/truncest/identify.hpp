#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <unordered_map>
#include <vector>

#include "truncest/truncation.hpp"

namespace truncest {

inline constexpr double kIllConditionedThreshold = 1e12;

// z^T x_j = log(D_S(x_j) / D_S(anchor)) in anchored coordinates, where
// x_j = basis_j ^ anchor.
struct IdentifiabilitySystem {
  int dim = 0;
  BitVector anchor;
  std::vector<BitVector> basis;  // original coordinates
  std::vector<double> rhs;       // log q_j
  double condition_number = 0.0;
};

// Picks d linearly independent support points greedily by decreasing mass.
// The anchor defaults to the zero vector when it has positive mass and to the
// heaviest point otherwise.
IdentifiabilitySystem build_system(const TruncationSet& set, const Pmf& probs,
                                   std::optional<BitVector> anchor = std::nullopt,
                                   double rank_tolerance = 1e-9);

NaturalParams solve_system(const IdentifiabilitySystem& sys,
                           double kappa_threshold = kIllConditionedThreshold);

// Condition number (largest over smallest singular value) of the 0/1 rows.
double condition_number(std::span<const BitVector> rows);

// S = {0} u {rows of T_n} u {e_j : j >= n}, with T_n the n x n upper
// triangular 0/1 Toeplitz matrix with ones on offsets 0, 1 and 3, and n the
// smallest size whose least singular value drops below lambda. Every point
// of S lies within `half_width` < lambda of the hyperplane normal to
// `direction`, and the condition number grows as lambda shrinks.
struct SlabInstance {
  TruncationSet set;
  std::vector<double> direction;
  double half_width;
  int block;
};
SlabInstance ill_conditioned_slab(int d, double lambda);

// The random product set S = S_1 x ... x S_d under which D_S cannot be told
// apart from uniform before the first repeated sample.
TruncationSet uniform_mimic_set(const ProductDistribution& dist, Rng& rng);

// log2 |S| in expectation for uniform_mimic_set.
double mimic_expected_log2_size(const ProductDistribution& dist);

// Survival-rule samplers over D: x ~ D, and coordinate i survives with
// probability min(Be(p_i; 1 - x_i) / Be(p_i; x_i), 1).
class MimicSampler {
 public:
  explicit MimicSampler(ProductDistribution dist);

  // Memoryless stream: resample until every coordinate survives. Exactly
  // uniform on the cube; this is the stream before the first duplicate.
  BitVector draw_fresh(Rng& rng, std::uint64_t* attempts = nullptr);

  // Deferred-decision stream over a lazily realized S: a point seen before
  // is accepted iff it was accepted the first time.
  BitVector draw(Rng& rng, std::uint64_t* attempts = nullptr);

  std::size_t decided() const { return memo_.size(); }

 private:
  bool survives(const BitVector& x, Rng& rng) const;

  ProductDistribution dist_;
  std::vector<double> keep_one_;   // survival probability of x_i = 1
  std::vector<double> keep_zero_;  // survival probability of x_i = 0
  std::unordered_map<std::uint64_t, bool> memo_;
};

struct ChiSquareResult {
  double statistic;
  int dof;
  double p_value;
};
// Pearson goodness of fit of the observed cells against the uniform law.
ChiSquareResult chi_square_uniform(std::span<const std::uint64_t> counts);

// "bitstring,probability" rows with a "# schema=1" header.
Pmf read_probability_csv(const std::filesystem::path& path, int d);
void write_probability_csv(const std::filesystem::path& path, const Pmf& pmf);

}  // namespace truncest
