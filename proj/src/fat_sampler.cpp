#include "truncest/fat_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace truncest {

namespace {

constexpr int kMaxBlock = 10;

void check_unit_interval(double v, const char* name) {
  if (!(v > 0.0 && v < 1.0)) throw DomainError(std::string(name) + " must be in (0, 1)");
}

// True when every assignment of the coordinates in `block` keeps x in S.
// x itself is a member, so mask 0 is skipped.
bool subcube_in_set(const TruncationSet& set, const BitVector& x, const std::vector<int>& block,
                    std::uint64_t& queries) {
  const std::uint64_t n = 1ull << block.size();
  for (std::uint64_t m = 1; m < n; ++m) {
    std::uint64_t w = 0;
    for (std::size_t j = 0; j < block.size(); ++j)
      if (m >> j & 1) w |= 1ull << block[j];
    ++queries;
    if (!set.contains(x ^ BitVector(x.dim(), w))) return false;
  }
  return true;
}

}  // namespace

bool ReconstructionState::complete() const {
  return std::none_of(y.begin(), y.end(), [](CoordState s) { return s == CoordState::unset; });
}

std::vector<int> ReconstructionState::unset_coordinates() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(y.size()); ++i)
    if (y[i] == CoordState::unset) out.push_back(i);
  return out;
}

std::uint64_t default_fat_budget(int d, std::optional<double> alpha_hat) {
  if (!alpha_hat || !(*alpha_hat > 0.0)) return 1000000;
  const double per = std::max(std::log(static_cast<double>(d)), 1.0) / *alpha_hat;
  return 50 * static_cast<std::uint64_t>(std::ceil(per));
}

FatSample fat_sample(const TruncatedDistribution& td, Rng& rng, const FatSampleOptions& opts) {
  const int d = td.dim();
  const std::uint64_t budget = opts.resolved_budget(d);
  ReconstructionState st;
  st.y.assign(d, CoordState::unset);
  int remaining = d;
  int target = 0;
  bool try_blocks = opts.mode == FatSampleMode::per_coordinate;
  std::vector<int> block;

  auto write = [&](int i, bool v) {
    st.y[i] = v ? CoordState::one : CoordState::zero;
    --remaining;
    if (opts.trace) st.writes.push_back({i, v, st.samples_consumed});
  };

  while (remaining > 0) {
    if (st.samples_consumed >= budget)
      throw FatnessDeficitError(st.unset_coordinates(), st.samples_consumed);
    const TruncatedDraw draw = sample_truncated(td, rng, opts.rejection_budget);
    ++st.samples_consumed;
    st.oracle_queries += draw.attempts;
    const BitVector& x = draw.x;

    if (opts.mode == FatSampleMode::literal) {
      for (int i = 0; i < d; ++i) {
        if (st.y[i] != CoordState::unset) continue;
        ++st.oracle_queries;
        if (td.set.contains(x.flipped(i))) write(i, x[i]);
      }
      continue;
    }

    while (st.y[target] != CoordState::unset) target = (target + 1) % d;
    if (try_blocks && remaining > 1) {
      block.clear();
      for (int k = 0; k < d && static_cast<int>(block.size()) < kMaxBlock; ++k) {
        const int i = (target + k) % d;
        if (st.y[i] == CoordState::unset) block.push_back(i);
      }
      if (subcube_in_set(td.set, x, block, st.oracle_queries)) {
        for (int i : block) write(i, x[i]);
        target = (block.back() + 1) % d;
        continue;
      }
      try_blocks = false;
    }
    ++st.oracle_queries;
    if (td.set.contains(x.flipped(target))) write(target, x[target]);
    target = (target + 1) % d;
  }

  std::uint64_t w = 0;
  for (int i = 0; i < d; ++i)
    if (st.y[i] == CoordState::one) w |= 1ull << i;
  return {BitVector(d, w), std::move(st)};
}

CoordinateSample fat_sample_coordinate(const TruncatedDistribution& td, int i, Rng& rng,
                                       std::uint64_t budget, std::uint64_t rejection_budget) {
  if (i < 0 || i >= td.dim())
    throw DomainError("fat_sample_coordinate: coordinate " + std::to_string(i) + " out of range");
  CoordinateSample out{false, 0, 0};
  while (out.samples_consumed < budget) {
    const TruncatedDraw draw = sample_truncated(td, rng, rejection_budget);
    ++out.samples_consumed;
    out.oracle_queries += draw.attempts + 1;
    if (td.set.contains(draw.x.flipped(i))) {
      out.bit = draw.x[i];
      return out;
    }
  }
  throw FatnessDeficitError({i}, out.samples_consumed);
}

std::uint64_t hoeffding_samples(double eps, double delta) {
  check_unit_interval(eps, "eps");
  check_unit_interval(delta, "delta");
  return static_cast<std::uint64_t>(std::ceil(std::log(2.0 / delta) / (2.0 * eps * eps)));
}

ParameterEstimate estimate_parameter(const TruncatedDistribution& td, int i, double eps,
                                     double delta, Rng& rng, const FatSampleOptions& opts) {
  const std::uint64_t n = hoeffding_samples(eps, delta);
  const std::uint64_t budget = opts.budget ? opts.budget : default_fat_budget(1, opts.alpha_hat);
  ParameterEstimate est{0.0, n, 0, 0};
  std::uint64_t ones = 0;
  for (std::uint64_t k = 0; k < n; ++k) {
    const CoordinateSample s = fat_sample_coordinate(td, i, rng, budget, opts.rejection_budget);
    ones += s.bit;
    est.samples_consumed += s.samples_consumed;
    est.oracle_queries += s.oracle_queries;
  }
  est.p_hat = static_cast<double>(ones) / static_cast<double>(n);
  return est;
}

std::uint64_t learn_tv_samples(int d, double eps, double delta, double C) {
  check_unit_interval(delta, "delta");
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  if (!(C > 0.0)) throw DomainError("learn_tv: C must be positive");
  const double n = C * d * std::log(d / delta) / (eps * eps);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(n)));
}

LearnReport learn_tv(const TruncatedDistribution& td, double eps, double delta, Rng& rng, double C,
                     const FatSampleOptions& opts) {
  const int d = td.dim();
  const std::uint64_t n = learn_tv_samples(d, eps, delta, C);
  std::vector<std::uint64_t> ones(d, 0);
  LearnReport rep;
  for (std::uint64_t k = 0; k < n; ++k) {
    const FatSample s = fat_sample(td, rng, opts);
    for (int i = 0; i < d; ++i) ones[i] += s.x[i];
    rep.samples_consumed += s.state.samples_consumed;
    rep.oracle_queries += s.state.oracle_queries;
  }
  std::vector<double> p(d);
  for (int i = 0; i < d; ++i) p[i] = static_cast<double>(ones[i]) / static_cast<double>(n);
  rep.estimate = ProductDistribution(MeanParams::clamped(std::move(p), 0.5 / static_cast<double>(n)));
  rep.outputs = n;
  rep.support.resize(d);
  std::iota(rep.support.begin(), rep.support.end(), 0);
  return rep;
}

LearnReport learn_sparse(const TruncatedDistribution& td, int k, double c, double eps,
                         double delta, Rng& rng, const FatSampleOptions& opts) {
  const int d = td.dim();
  if (k < 0 || k > d) throw DomainError("learn_sparse: k must be in [0, d]");
  check_unit_interval(c, "c");
  check_unit_interval(eps, "eps");
  check_unit_interval(delta, "delta");
  LearnReport rep;
  std::vector<double> p(d, c);
  if (k == 0) {
    rep.estimate = ProductDistribution(MeanParams(std::move(p)));
    return rep;
  }

  const double t = eps / std::sqrt(static_cast<double>(k));
  const auto n1 = static_cast<std::uint64_t>(
      std::ceil(std::log(4.0 * d / delta) / (2.0 * t * t)));
  std::vector<std::uint64_t> ones(d, 0);
  for (std::uint64_t s = 0; s < n1; ++s) {
    const FatSample fs = fat_sample(td, rng, opts);
    for (int i = 0; i < d; ++i) ones[i] += fs.x[i];
    rep.samples_consumed += fs.state.samples_consumed;
    rep.oracle_queries += fs.state.oracle_queries;
  }
  rep.outputs = n1;

  std::vector<std::pair<double, int>> deviation;
  for (int i = 0; i < d; ++i) {
    const double gap = std::abs(static_cast<double>(ones[i]) / static_cast<double>(n1) - c);
    if (gap > t) deviation.push_back({gap, i});
  }
  std::stable_sort(deviation.begin(), deviation.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  if (static_cast<int>(deviation.size()) > k) deviation.resize(k);

  const double delta2 = delta / (4.0 * k);
  for (const auto& [gap, i] : deviation) {
    const ParameterEstimate est = estimate_parameter(td, i, std::min(t, 0.999), delta2, rng, opts);
    p[i] = est.p_hat;
    rep.samples_consumed += est.samples_consumed;
    rep.oracle_queries += est.oracle_queries;
    rep.support.push_back(i);
  }
  std::sort(rep.support.begin(), rep.support.end());
  const std::uint64_t n2 = hoeffding_samples(std::min(t, 0.999), delta2);
  rep.estimate = ProductDistribution(MeanParams::clamped(std::move(p), 0.5 / static_cast<double>(n2)));
  return rep;
}

TruncationSet flip_free_set(int d, int i) {
  if (i < 0 || i >= d) throw DomainError("flip_free_set: coordinate out of range");
  std::vector<CoordinateSupport> s(d, CoordinateSupport::both);
  s[i] = CoordinateSupport::zero;
  return sets::product(std::move(s));
}

}  // namespace truncest
