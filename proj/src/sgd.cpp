#include "truncest/sgd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <omp.h>

#include "truncest/kernels.hpp"

namespace truncest {

void SgdConfig::validate() const {
  if (steps < 1) throw DomainError("sgd: steps (M) must be >= 1");
  if (eta && !(*eta > 0.0)) throw DomainError("sgd: eta must be positive");
  if (!(default_eta > 0.0)) throw DomainError("sgd: default_eta must be positive");
  if (!(ball_radius_scale > 0.0)) throw DomainError("sgd: ball_radius_scale must be positive");
  if (!(min_ball_radius >= 0.0)) throw DomainError("sgd: min_ball_radius must be >= 0");
  if (init_samples < 1) throw DomainError("sgd: init_samples must be >= 1");
  if (mass_samples < 1) throw DomainError("sgd: mass_samples must be >= 1");
  if (alpha_hat && !(*alpha_hat > 0.0 && *alpha_hat <= 1.0))
    throw DomainError("sgd: alpha_hat must be in (0, 1]");
  if (rejection_budget && *rejection_budget < 1) throw DomainError("sgd: rejection_budget must be >= 1");
  if (repetitions < 1) throw DomainError("sgd: repetitions (N) must be >= 1");
}

bool Ball::contains(std::span<const double> z, double slack) const {
  return l2_distance(z, center) <= radius * (1.0 + slack) + slack;
}

bool project_to_ball(std::vector<double>& z, const Ball& ball) {
  require_same_dim(static_cast<int>(ball.center.size()), static_cast<int>(z.size()));
  const double dist = l2_distance(z, ball.center);
  if (dist <= ball.radius) return false;
  const double s = ball.radius / dist;
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = ball.center[i] + s * (z[i] - ball.center[i]);
  return true;
}

NaturalParams project_to_ball(const NaturalParams& z, const Ball& ball) {
  std::vector<double> v(z.values().begin(), z.values().end());
  project_to_ball(v, ball);
  return NaturalParams(std::move(v));
}

InitEstimate empirical_init(const TruncatedDistribution& td, std::uint64_t n, Rng& rng,
                            std::uint64_t rejection_budget) {
  if (n < 1) throw DomainError("empirical_init: n must be >= 1");
  const int d = td.dim();
  std::vector<std::uint64_t> ones(d, 0);
  InitEstimate out;
  for (std::uint64_t k = 0; k < n; ++k) {
    const TruncatedDraw draw = sample_truncated(td, rng, rejection_budget);
    out.oracle_queries += draw.attempts;
    for (int i = 0; i < d; ++i) ones[i] += draw.x[i];
  }
  std::vector<double> p(d);
  for (int i = 0; i < d; ++i) p[i] = static_cast<double>(ones[i]) / static_cast<double>(n);
  out.p_hat = MeanParams::clamped(std::move(p), 0.5 / static_cast<double>(n));
  out.z_hat = to_natural(out.p_hat);
  out.samples = n;
  return out;
}

namespace {

// y ~ D(z) restricted to S by rejection, with mean parameters given directly.
BitVector sample_in_set(std::span<const double> p, const TruncationSet& set, Rng& rng,
                        std::uint64_t budget, std::uint64_t& rejections) {
  const int d = static_cast<int>(p.size());
  for (std::uint64_t a = 0; a < budget; ++a) {
    std::uint64_t w = 0;
    for (int i = 0; i < d; ++i)
      if (bernoulli(rng, p[i])) w |= 1ull << i;
    const BitVector y(d, w);
    if (set.contains(y)) return y;
    ++rejections;
  }
  throw RejectionBudgetError(budget);
}

}  // namespace

StochasticGradient stochastic_gradient(const BitVector& x, std::span<const double> z,
                                       const TruncationSet& set, Rng& rng, std::uint64_t budget) {
  require_same_dim(set.dim(), x.dim());
  require_same_dim(set.dim(), static_cast<int>(z.size()));
  if (budget < 1) throw DomainError("stochastic_gradient: budget must be >= 1");
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) p[i] = inverse_logit(z[i]);
  StochasticGradient g;
  const BitVector y = sample_in_set(p, set, rng, budget, g.rejections);
  g.v.resize(z.size());
  for (int i = 0; i < x.dim(); ++i) g.v[i] = static_cast<double>(y[i]) - static_cast<double>(x[i]);
  return g;
}

double hessian_min_eigenvalue(const TruncationSet& set, std::span<const double> z) {
  const auto pts = kernels::members(set);
  const auto m = kernels::truncated_moments(pts, z, true);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.covariance, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

SgdResult run_sgd(const TruncatedDistribution& td, const SgdConfig& cfg) {
  cfg.validate();
  const int d = td.dim();
  Rng rng(cfg.seed);
  SgdResult res;

  const std::uint64_t q0 = td.set.queries();
  res.init = empirical_init(td, cfg.init_samples, rng);
  res.truncated_samples = res.init.samples;

  if (cfg.alpha_hat) {
    res.alpha_hat = *cfg.alpha_hat;
  } else {
    const auto est = estimate_mass(ProductDistribution(res.init.p_hat), td.set, cfg.mass_samples, rng);
    res.alpha_hat = std::max(est.mass, 0.5 / static_cast<double>(cfg.mass_samples));
  }
  res.rejection_budget = cfg.rejection_budget
                             ? *cfg.rejection_budget
                             : 100 * static_cast<std::uint64_t>(std::ceil(1.0 / res.alpha_hat));

  const auto z_hat = res.init.z_hat.values();
  res.ball.center.assign(z_hat.begin(), z_hat.end());
  res.ball.radius = std::max(cfg.ball_radius_scale * std::sqrt(std::log(1.0 / res.alpha_hat)),
                             cfg.min_ball_radius);

  if (cfg.eta) {
    res.eta = *cfg.eta;
  } else if (d <= enumeration_limit()) {
    res.eta = std::max(hessian_min_eigenvalue(td.set, z_hat), 1e-6);
  } else {
    res.eta = cfg.default_eta;
  }

  std::optional<ExactObjective> exact;
  if (cfg.trace_nll_every > 0) exact.emplace(td);

  std::vector<double> z = res.ball.center;
  std::vector<double> avg(d, 0.0);
  std::vector<double> p(d);
  if (cfg.record_trace) res.trace.reserve(cfg.steps);
  for (std::uint64_t i = 1; i <= cfg.steps; ++i) {
    const TruncatedDraw draw = sample_truncated(td, rng, default_rejection_budget(res.alpha_hat));
    ++res.truncated_samples;
    for (int k = 0; k < d; ++k) p[k] = inverse_logit(z[k]);
    std::uint64_t rej = 0;
    const BitVector y = sample_in_set(p, td.set, rng, res.rejection_budget, rej);
    res.rejections += rej;

    const double step = 1.0 / (static_cast<double>(i) * res.eta);
    double gsq = 0.0;
    for (int k = 0; k < d; ++k) {
      const double v = static_cast<double>(y[k]) - static_cast<double>(draw.x[k]);
      gsq += v * v;
      z[k] -= step * v;
    }
    const bool projected = project_to_ball(z, res.ball);
    for (int k = 0; k < d; ++k) {
      if (!std::isfinite(z[k])) throw NumericError("sgd: non-finite iterate at step " + std::to_string(i));
      avg[k] += (z[k] - avg[k]) / static_cast<double>(i);
    }
    if (cfg.record_trace) {
      double nll = std::numeric_limits<double>::quiet_NaN();
      if (exact && (i % cfg.trace_nll_every == 0 || i == cfg.steps)) nll = exact->nll(avg);
      res.trace.push_back({i, nll, gsq, projected, rej, l2_distance(z, res.ball.center)});
    }
  }
  res.estimate = NaturalParams(std::move(avg));
  res.oracle_queries = td.set.queries() - q0;
  return res;
}

std::size_t select_consensus(const std::vector<std::vector<double>>& estimates) {
  const std::size_t n = estimates.size();
  if (n == 0) throw DomainError("select_consensus: no estimates");
  if (n <= 2) return 0;
  std::size_t best = 0;
  double best_med = std::numeric_limits<double>::infinity();
  std::vector<double> dist;
  for (std::size_t a = 0; a < n; ++a) {
    dist.clear();
    for (std::size_t b = 0; b < n; ++b)
      if (b != a) dist.push_back(l2_distance(estimates[a], estimates[b]));
    const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
    std::nth_element(dist.begin(), mid, dist.end());
    double med = *mid;
    if (dist.size() % 2 == 0) med = 0.5 * (med + *std::max_element(dist.begin(), mid));
    if (med < best_med) {
      best_med = med;
      best = a;
    }
  }
  return best;
}

int amplification_count(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must be in (0, 1)");
  return std::max(1, static_cast<int>(std::ceil(std::log2(1.0 / delta))));
}

AmplifiedResult amplified_runs(const TruncatedDistribution& td, const SgdConfig& cfg, int N) {
  if (N < 1) throw DomainError("amplification: N must be >= 1");
  AmplifiedResult out;
  out.runs.resize(N);
  std::vector<std::exception_ptr> errors(N);
#pragma omp parallel for schedule(dynamic, 1) num_threads(std::min(N, kernels::max_threads()))
  for (int r = 0; r < N; ++r) {
    try {
      SgdConfig c = cfg;
      c.seed = N == 1 ? cfg.seed : derive_seed(cfg.seed, static_cast<std::uint64_t>(r));
      out.runs[r] = run_sgd(td, c);
    } catch (...) {
      errors[r] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<std::vector<double>> est;
  for (const auto& run : out.runs)
    est.emplace_back(run.estimate.values().begin(), run.estimate.values().end());
  out.selected = select_consensus(est);
  out.estimate = out.runs[out.selected].estimate;
  return out;
}

AmplifiedResult amplified_estimate(const TruncatedDistribution& td, const SgdConfig& cfg,
                                   double delta) {
  return amplified_runs(td, cfg, amplification_count(delta));
}

ExactObjective::ExactObjective(const TruncatedDistribution& truth)
    : dim_(truth.dim()), members_(kernels::members(truth.set)) {
  require_enumerable(dim_);
  if (members_.empty()) throw DomainError("exact objective: S is empty");
  target_mean_ = kernels::truncated_moments(members_, truth.base.natural().values(), false).mean;
}

double ExactObjective::nll(std::span<const double> z) const {
  require_same_dim(dim_, static_cast<int>(z.size()));
  const auto m = kernels::truncated_moments(members_, z, false);
  double lin = 0.0;
  for (int i = 0; i < dim_; ++i) lin += target_mean_[i] * z[i];
  return -lin + m.log_partition;
}

std::vector<double> ExactObjective::gradient(std::span<const double> z) const {
  require_same_dim(dim_, static_cast<int>(z.size()));
  auto m = kernels::truncated_moments(members_, z, false);
  for (int i = 0; i < dim_; ++i) m.mean[i] -= target_mean_[i];
  return m.mean;
}

std::pair<std::vector<double>, Eigen::MatrixXd> ExactObjective::gradient_hessian(
    std::span<const double> z) const {
  require_same_dim(dim_, static_cast<int>(z.size()));
  auto m = kernels::truncated_moments(members_, z, true);
  for (int i = 0; i < dim_; ++i) m.mean[i] -= target_mean_[i];
  return {std::move(m.mean), std::move(m.covariance)};
}

double ExactObjective::truncated_mass(std::span<const double> z) const {
  const auto m = kernels::truncated_moments(members_, z, false);
  double log_norm = 0.0;
  for (double v : z) log_norm += std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  return std::exp(m.log_partition - log_norm);
}

double exact_population_nll(const NaturalParams& z, const TruncatedDistribution& truth) {
  return ExactObjective(truth).nll(z.values());
}

std::pair<std::vector<double>, Eigen::MatrixXd> exact_gradient_hessian(
    const NaturalParams& z, const TruncatedDistribution& truth) {
  return ExactObjective(truth).gradient_hessian(z.values());
}

VarianceReport variance_bound_check(const NaturalParams& z, const TruncatedDistribution& td,
                                    std::uint64_t n, Rng& rng, std::uint64_t mass_samples) {
  require_same_dim(td.dim(), z.dim());
  if (n < 1) throw DomainError("variance_bound_check: n must be >= 1");
  const ProductDistribution at_z(z);
  const double m_z = estimate_mass(at_z, td.set, mass_samples, rng).mass;
  const double m_star = estimate_mass(td.base, td.set, mass_samples, rng).mass;
  VarianceReport rep{};
  rep.n = n;
  rep.beta_hat = std::max(std::min(m_z, m_star), 0.5 / static_cast<double>(mass_samples));
  const int d = td.dim();
  rep.bound_4d_beta = 4.0 * d / rep.beta_hat;
  rep.bound_structural = d;

  const TruncatedDistribution at_z_trunc(at_z, td.set);
  const std::uint64_t budget = default_rejection_budget(rep.beta_hat);
  double total = 0.0;
  for (std::uint64_t k = 0; k < n; ++k) {
    const BitVector x = sample_truncated(td, rng, budget).x;
    const BitVector y = sample_truncated(at_z_trunc, rng, budget).x;
    total += (x ^ y).popcount();
  }
  rep.mean_sq_norm = total / static_cast<double>(n);
  return rep;
}

std::vector<double> random_point_in_ball(const Ball& ball, Rng& rng) {
  const std::size_t d = ball.center.size();
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> u(d);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : u) {
      v = gauss(rng);
      norm += v * v;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  const double r = ball.radius * std::pow(uniform01(rng), 1.0 / static_cast<double>(d));
  for (std::size_t i = 0; i < d; ++i) u[i] = ball.center[i] + r * u[i] / norm;
  return u;
}

}  // namespace truncest
