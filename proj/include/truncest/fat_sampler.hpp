#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "truncest/truncation.hpp"

namespace truncest {

// per_coordinate: each truncated draw is checked against a single target
// coordinate chosen before the draw, cycling over the coordinates still
// unset. Until the first miss, a draw whose whole subcube over a block of up
// to 10 unset coordinates (starting at the target) lies in S writes the
// entire block. Either accept rule depends only on the coordinates outside
// what it writes, so the output law is exactly D.
//
// literal: every unset coordinate whose flip stays in S is written from the
// same draw (first write wins). Coordinates written from one draw are
// correlated through the accept test, so the output is biased.
enum class FatSampleMode { per_coordinate, literal };

enum class CoordState : std::uint8_t { unset, zero, one };

struct CoordinateWrite {
  int coordinate;
  bool value;
  std::uint64_t sample_index;  // 1-based index of the truncated draw
};

struct ReconstructionState {
  std::vector<CoordState> y;
  std::uint64_t samples_consumed = 0;
  std::uint64_t oracle_queries = 0;
  std::vector<CoordinateWrite> writes;  // filled only when tracing

  bool complete() const;
  std::vector<int> unset_coordinates() const;
};

// 50 * ceil(max(ln d, 1) / alpha_hat) truncated draws, or 1e6 without an
// estimate.
std::uint64_t default_fat_budget(int d, std::optional<double> alpha_hat = std::nullopt);

struct FatSampleOptions {
  std::uint64_t budget = 0;  // 0 selects default_fat_budget(d, alpha_hat)
  std::optional<double> alpha_hat;
  FatSampleMode mode = FatSampleMode::per_coordinate;
  std::uint64_t rejection_budget = default_rejection_budget();
  bool trace = false;

  std::uint64_t resolved_budget(int d) const {
    return budget ? budget : default_fat_budget(d, alpha_hat);
  }
};

struct FatSample {
  BitVector x;
  ReconstructionState state;
};

// One draw from the untruncated D using draws from D_S.
FatSample fat_sample(const TruncatedDistribution& td, Rng& rng, const FatSampleOptions& opts = {});

struct CoordinateSample {
  bool bit;
  std::uint64_t samples_consumed;
  std::uint64_t oracle_queries;
};

// One Be(p_i) draw: truncated draws until flip(x, i) is in S, then x_i.
CoordinateSample fat_sample_coordinate(const TruncatedDistribution& td, int i, Rng& rng,
                                       std::uint64_t budget,
                                       std::uint64_t rejection_budget = default_rejection_budget());

// ceil(ln(2 / delta) / (2 eps^2)).
std::uint64_t hoeffding_samples(double eps, double delta);

struct ParameterEstimate {
  double p_hat;
  std::uint64_t n;
  std::uint64_t samples_consumed;
  std::uint64_t oracle_queries;
};

ParameterEstimate estimate_parameter(const TruncatedDistribution& td, int i, double eps,
                                     double delta, Rng& rng, const FatSampleOptions& opts = {});

struct LearnReport {
  ProductDistribution estimate;
  std::uint64_t outputs = 0;  // reconstructed samples used
  std::uint64_t samples_consumed = 0;
  std::uint64_t oracle_queries = 0;
  std::vector<int> support;  // sparse learning only: coordinates not set to c
};

// n = ceil(C d ln(d / delta) / eps^2) reconstructed samples; means clamped to
// [1/(2n), 1 - 1/(2n)].
std::uint64_t learn_tv_samples(int d, double eps, double delta, double C = 4.0);
LearnReport learn_tv(const TruncatedDistribution& td, double eps, double delta, Rng& rng,
                     double C = 4.0, const FatSampleOptions& opts = {});

// (k, c)-sparse learning. Screening: ceil(ln(4d/delta) / (2 t^2)) reconstructed
// samples with t = eps / sqrt(k); coordinates within t of c are set to c.
// Refinement: the at most k survivors are re-estimated coordinate-wise at
// tolerance t and confidence delta / (4k) each.
LearnReport learn_sparse(const TruncatedDistribution& td, int k, double c, double eps,
                         double delta, Rng& rng, const FatSampleOptions& opts = {});

// {x : x_i = 0}. No member can flip coordinate i, so i has fatness zero.
TruncationSet flip_free_set(int d, int i);

}  // namespace truncest
