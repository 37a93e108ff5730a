#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "truncest/errors.hpp"
#include "truncest/rng.hpp"

namespace truncest {

// A ranking of items 0..d-1. position(i) is the rank of item i (0 = first);
// order()[k] is the item ranked k-th. Text form lists the order 1-based.
class Ranking {
 public:
  Ranking() = default;
  static Ranking identity(int d);
  static Ranking from_order(std::vector<int> order);
  static Ranking from_positions(const std::vector<int>& positions);
  // "3 1 2" means item 3 first (1-based items).
  static Ranking parse(std::string_view text);

  int dim() const { return static_cast<int>(order_.size()); }
  int position(int item) const { return pos_[item]; }
  int item_at(int position) const { return order_[position]; }
  const std::vector<int>& order() const { return order_; }
  const std::vector<int>& positions() const { return pos_; }

  // i is ranked ahead of j.
  bool prefers(int i, int j) const { return pos_[i] < pos_[j]; }
  Ranking swapped(int i, int j) const;

  std::string to_string() const;

  friend bool operator==(const Ranking& a, const Ranking& b) { return a.order_ == b.order_; }
  friend auto operator<=>(const Ranking& a, const Ranking& b) { return a.order_ <=> b.order_; }

 private:
  std::vector<int> order_;
  std::vector<int> pos_;
};

// Number of discordant pairs.
int kendall_tau(const Ranking& a, const Ranking& b);

// Every ranking of d items in lexicographic order of order(); d <= 10.
std::vector<Ranking> all_rankings(int d);

class MallowsModel {
 public:
  MallowsModel(Ranking central, double phi);

  int dim() const { return central_.dim(); }
  const Ranking& central() const { return central_; }
  double phi() const { return phi_; }

  // Z(phi) = prod_{i=1..d} (1 - phi^i) / (1 - phi).
  double log_normalizer() const;
  double pmf(const Ranking& pi) const;
  double log_pmf(const Ranking& pi) const;
  // Repeated insertion.
  Ranking sample(Rng& rng) const;

 private:
  Ranking central_;
  double phi_;
};

double mallows_pmf(const MallowsModel& m, const Ranking& pi);
Ranking sample_mallows(const MallowsModel& m, Rng& rng);

// Truncation set over rankings behind a membership oracle with a query
// counter shared by copies.
class RankingSet {
 public:
  RankingSet(int dim, std::function<bool(const Ranking&)> pred, std::string descriptor);

  int dim() const { return dim_; }
  const std::string& descriptor() const { return descriptor_; }
  bool contains(const Ranking& pi) const {
    queries_->fetch_add(1, std::memory_order_relaxed);
    return pred_(pi);
  }
  bool contains_uncounted(const Ranking& pi) const { return pred_(pi); }
  std::uint64_t queries() const { return queries_->load(std::memory_order_relaxed); }
  // Members by enumeration, d <= 8.
  std::vector<Ranking> members() const;

 private:
  int dim_;
  std::function<bool(const Ranking&)> pred_;
  std::shared_ptr<std::atomic<std::uint64_t>> queries_;
  std::string descriptor_;
};

namespace ranking_sets {
RankingSet all(int d);
// {pi : D_tau(pi, pivot) <= radius}
RankingSet kendall_ball(const Ranking& pivot, int radius);
RankingSet explicit_list(int d, std::vector<Ranking> members);
// {pi : item is ranked at `position`}
RankingSet position_constraint(int d, int item, int position);
}  // namespace ranking_sets

// kendall_ball:radius=<int> (around pivot) | all | explicit:@file |
// position:item=<1-based>,pos=<1-based>
RankingSet parse_ranking_set(std::string_view descriptor, const Ranking& pivot,
                             const std::filesystem::path& base_dir = {});
std::vector<Ranking> read_ranking_file(const std::filesystem::path& path, int d);

struct TruncatedMallows {
  TruncatedMallows(MallowsModel model, RankingSet set);
  int dim() const { return model.dim(); }
  MallowsModel model;
  RankingSet set;
};

struct RankingDraw {
  Ranking pi;
  std::uint64_t attempts;
};
RankingDraw sample_truncated(const TruncatedMallows& td, Rng& rng, std::uint64_t max_attempts);

struct RankingMass {
  Ranking pi;
  double prob;
};
// Truncated law by enumeration, d <= 8.
std::vector<RankingMass> exact_truncated_pmf(const TruncatedMallows& td);
double exact_tv(const MallowsModel& a, const MallowsModel& b);

// P[i ahead of j] under the untruncated model, by enumeration.
double exact_precedence(const MallowsModel& m, int i, int j);
// P[i ahead of j | pi ~ D_S, swap(pi, i, j) in S], by enumeration. NaN if the
// pair never qualifies.
double exact_conditional_precedence(const TruncatedMallows& td, int i, int j);

// q(i, j) counts qualifying samples with i ahead of j.
class PairTally {
 public:
  explicit PairTally(int d) : d_(d), q_(static_cast<std::size_t>(d) * d, 0) {}
  int dim() const { return d_; }
  std::uint64_t count(int i, int j) const { return q_[static_cast<std::size_t>(i) * d_ + j]; }
  std::uint64_t total(int i, int j) const { return count(i, j) + count(j, i); }
  std::optional<double> p_hat(int i, int j) const;
  void record(int winner, int loser) { ++q_[static_cast<std::size_t>(winner) * d_ + loser]; }
  void clear() { std::fill(q_.begin(), q_.end(), 0); }

 private:
  int d_;
  std::vector<std::uint64_t> q_;
};

struct PairUpdateStats {
  std::uint64_t attempts = 0;  // rejection draws for the truncated sample
  int pairs_updated = 0;
};
using PairFilter = std::function<bool(int, int)>;
// One truncated sample; every pair (i < j) passing the filter whose swap
// stays in S gets one tally in the direction the sample ranks them.
PairUpdateStats pair_update(const TruncatedMallows& td, PairTally& tally, Rng& rng,
                            std::uint64_t max_attempts, const PairFilter& filter = {});

struct TournamentOptions {
  double gamma = 0.2;
  double C = 8.0;
  int max_restarts = 20;
  std::uint64_t max_samples = 10000000;
  std::uint64_t rejection_budget = 1000000;
};

struct CentralEstimate {
  Ranking central;
  int restarts = 0;
  std::uint64_t samples = 0;
  std::uint64_t threshold = 0;  // n
};
// Tournament on pairs with at least n = ceil(C ln(d / delta) / gamma^2)
// tallies, edges pointing to the majority. A cycle discards all tallies.
CentralEstimate recover_central(const TruncatedMallows& td, double delta, Rng& rng,
                                const TournamentOptions& opts = {});

struct SpreadEstimate {
  double phi_hat;
  double p_hat;
  std::uint64_t tallies;
  std::uint64_t samples;
};
// Neighbor precedence p = 1 / (1 + phi) on the top pair of the given central
// ranking, margin m = 2p - 1, phi = (1 - m) / (1 + m).
SpreadEstimate estimate_spread(const TruncatedMallows& td, const Ranking& central, double eps,
                               double delta, Rng& rng,
                               std::uint64_t max_samples = 10000000,
                               std::uint64_t rejection_budget = 1000000);

struct MallowsFit {
  MallowsModel model;
  CentralEstimate central;
  SpreadEstimate spread;
};
// Central ranking at confidence delta/2, then spread at tolerance eps/sqrt(d)
// and confidence delta/2.
MallowsFit learn_mallows_tv(const TruncatedMallows& td, double eps, double delta, Rng& rng,
                            const TournamentOptions& opts = {});

}  // namespace truncest
