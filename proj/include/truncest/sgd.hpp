#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "truncest/truncation.hpp"

namespace truncest {

struct SgdConfig {
  std::uint64_t steps = 50000;  // M
  std::optional<double> eta;    // step i is 1 / (i eta)
  double default_eta = 0.1;     // used when eta is unset and d is too large for the exact Hessian
  double ball_radius_scale = 3.0;
  double min_ball_radius = 0.5;
  std::uint64_t init_samples = 10000;
  std::uint64_t mass_samples = 10000;
  std::optional<double> alpha_hat;
  std::optional<std::uint64_t> rejection_budget;  // per step; default 100 * ceil(1 / alpha_hat)
  int repetitions = 1;
  std::uint64_t seed = 0;
  std::uint64_t trace_nll_every = 0;  // 0 disables the exact NLL column
  bool record_trace = true;

  void validate() const;
};

struct Ball {
  std::vector<double> center;
  double radius = 0.0;

  bool contains(std::span<const double> z, double slack = 1e-12) const;
};

// Radial projection onto the ball; returns true when z was moved.
bool project_to_ball(std::vector<double>& z, const Ball& ball);
NaturalParams project_to_ball(const NaturalParams& z, const Ball& ball);

struct InitEstimate {
  MeanParams p_hat;
  NaturalParams z_hat;
  std::uint64_t samples = 0;
  std::uint64_t oracle_queries = 0;
};
// Mean of n truncated samples clamped to [1/(2n), 1 - 1/(2n)], with its logits.
InitEstimate empirical_init(const TruncatedDistribution& td, std::uint64_t n, Rng& rng,
                            std::uint64_t rejection_budget = default_rejection_budget());

struct StochasticGradient {
  std::vector<double> v;  // -x + y
  std::uint64_t rejections = 0;  // draws of y that fell outside S
};
// y ~ D_S(z) by rejection; v = -x + y.
StochasticGradient stochastic_gradient(const BitVector& x, std::span<const double> z,
                                       const TruncationSet& set, Rng& rng, std::uint64_t budget);

struct SgdStep {
  std::uint64_t step;
  double nll;  // exact NLL at the running average, NaN when not computed
  double grad_sq;
  bool projected;
  std::uint64_t rejections;
  double center_distance;
};

struct SgdResult {
  NaturalParams estimate;  // averaged iterate
  InitEstimate init;
  Ball ball;
  double eta = 0.0;
  double alpha_hat = 0.0;
  std::uint64_t rejection_budget = 0;
  std::uint64_t truncated_samples = 0;  // samples from D_S(z*), initialization included
  std::uint64_t oracle_queries = 0;
  std::uint64_t rejections = 0;
  std::vector<SgdStep> trace;
};

// td supplies the samples from D_S(z*); nothing else about the truth is used
// unless the config asks for the exact NLL trace.
SgdResult run_sgd(const TruncatedDistribution& td, const SgdConfig& cfg);

// Index of the estimate with the smallest median distance to the others.
std::size_t select_consensus(const std::vector<std::vector<double>>& estimates);

struct AmplifiedResult {
  NaturalParams estimate;
  std::size_t selected = 0;
  std::vector<SgdResult> runs;
};
// N independent runs from scratch (stream r of cfg.seed each), in parallel.
AmplifiedResult amplified_runs(const TruncatedDistribution& td, const SgdConfig& cfg, int N);
// N = ceil(log2(1 / delta)).
int amplification_count(double delta);
AmplifiedResult amplified_estimate(const TruncatedDistribution& td, const SgdConfig& cfg,
                                   double delta);

// Exact population objective over an enumerable S, with E_{D_S(z*)}[x] and
// the members of S cached.
class ExactObjective {
 public:
  explicit ExactObjective(const TruncatedDistribution& truth);

  int dim() const { return dim_; }
  const std::vector<double>& target_mean() const { return target_mean_; }
  const std::vector<BitVector>& members() const { return members_; }

  double nll(std::span<const double> z) const;
  std::vector<double> gradient(std::span<const double> z) const;
  // Hessian is Cov_{y ~ D_S(z)}[y].
  std::pair<std::vector<double>, Eigen::MatrixXd> gradient_hessian(std::span<const double> z) const;
  double truncated_mass(std::span<const double> z) const;

 private:
  int dim_;
  std::vector<BitVector> members_;
  std::vector<double> target_mean_;
};

double exact_population_nll(const NaturalParams& z, const TruncatedDistribution& truth);
std::pair<std::vector<double>, Eigen::MatrixXd> exact_gradient_hessian(
    const NaturalParams& z, const TruncatedDistribution& truth);

// Smallest eigenvalue of Cov_{y ~ D_S(z)}[y].
double hessian_min_eigenvalue(const TruncationSet& set, std::span<const double> z);

struct VarianceReport {
  double mean_sq_norm;
  double beta_hat;
  double bound_4d_beta;
  double bound_structural;  // d
  std::uint64_t n;
  bool within_bounds() const { return mean_sq_norm <= std::min(bound_4d_beta, bound_structural); }
};
// Empirical E||v||^2 at z with x ~ D_S(z*) = td, y ~ D_S(z); beta_hat is the
// smaller estimated mass of S under D(z) and D(z*).
VarianceReport variance_bound_check(const NaturalParams& z, const TruncatedDistribution& td,
                                    std::uint64_t n, Rng& rng, std::uint64_t mass_samples = 10000);

// Uniform point in the ball.
std::vector<double> random_point_in_ball(const Ball& ball, Rng& rng);

}  // namespace truncest
