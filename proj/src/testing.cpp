#include "truncest/testing.hpp"

#include <cmath>

namespace truncest {

const char* to_string(Verdict v) { return v == Verdict::same ? "SAME" : "FAR"; }

namespace {

void check_eps(double eps) {
  if (!(eps > 0.0 && eps <= 1.0)) throw DomainError("tester: eps must be in (0, 1]");
}

std::vector<double> coordinate_means(std::span<const BitVector> samples, int d) {
  if (samples.empty()) throw DomainError("tester: no samples");
  std::vector<double> m(d, 0.0);
  for (const auto& x : samples) {
    require_same_dim(d, x.dim());
    for (int i = 0; i < d; ++i) m[i] += x[i];
  }
  for (double& v : m) v /= static_cast<double>(samples.size());
  return m;
}

}  // namespace

std::uint64_t BaselineTester::sample_complexity(int d, double eps) const {
  check_eps(eps);
  return static_cast<std::uint64_t>(std::ceil(16.0 * d / (eps * eps)));
}

double BaselineTester::band(int d, std::uint64_t n) const {
  return std::sqrt(std::log(2.0 * d / delta_) / (2.0 * static_cast<double>(n)));
}

ProductDistribution fit_product(std::span<const BitVector> samples, int d) {
  return ProductDistribution(
      MeanParams::clamped(coordinate_means(samples, d), 0.5 / static_cast<double>(samples.size())));
}

Verdict BaselineTester::identity(const ProductDistribution& known, std::span<const BitVector> samples,
                                 double eps) const {
  check_eps(eps);
  const int d = known.dim();
  if (d <= exact_limit_)
    return exact_tv(known, fit_product(samples, d)) >= eps / 2.0 ? Verdict::far : Verdict::same;
  const auto m = coordinate_means(samples, d);
  const double t = band(d, samples.size());
  for (int i = 0; i < d; ++i)
    if (std::abs(m[i] - known.mean()[i]) > t) return Verdict::far;
  return Verdict::same;
}

Verdict BaselineTester::closeness(std::span<const BitVector> a, std::span<const BitVector> b,
                                  double eps) const {
  check_eps(eps);
  if (a.empty() || b.empty()) throw DomainError("tester: no samples");
  const int d = a.front().dim();
  if (d <= exact_limit_)
    return exact_tv(fit_product(a, d), fit_product(b, d)) >= eps / 2.0 ? Verdict::far
                                                                       : Verdict::same;
  const auto ma = coordinate_means(a, d), mb = coordinate_means(b, d);
  const double t = band(d, a.size()) + band(d, b.size());
  for (int i = 0; i < d; ++i)
    if (std::abs(ma[i] - mb[i]) > t) return Verdict::far;
  return Verdict::same;
}

std::unique_ptr<Tester> baseline_tester() { return std::make_unique<BaselineTester>(); }

ReconstructedBatch reconstruct(const TruncatedDistribution& td, std::uint64_t n, Rng& rng,
                               const FatSampleOptions& opts) {
  ReconstructedBatch batch;
  batch.samples.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    FatSample s = fat_sample(td, rng, opts);
    batch.truncated_samples += s.state.samples_consumed;
    batch.oracle_queries += s.state.oracle_queries;
    batch.samples.push_back(s.x);
  }
  return batch;
}

TestOutcome identity_test(const ProductDistribution& known, const TruncatedDistribution& td,
                          double eps, const Tester& tester, Rng& rng, const FatSampleOptions& opts) {
  require_same_dim(known.dim(), td.dim());
  const std::uint64_t n = tester.sample_complexity(td.dim(), eps);
  const auto batch = reconstruct(td, n, rng, opts);
  return {tester.identity(known, batch.samples, eps), n, batch.truncated_samples};
}

TestOutcome closeness_test(const TruncatedDistribution& td1, const TruncatedDistribution& td2,
                           double eps, const Tester& tester, Rng& rng, const FatSampleOptions& opts) {
  require_same_dim(td1.dim(), td2.dim());
  const std::uint64_t n = tester.sample_complexity(td1.dim(), eps);
  const auto a = reconstruct(td1, n, rng, opts);
  const auto b = reconstruct(td2, n, rng, opts);
  return {tester.closeness(a.samples, b.samples, eps), n, a.truncated_samples + b.truncated_samples};
}

}  // namespace truncest
