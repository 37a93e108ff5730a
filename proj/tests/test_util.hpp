#pragma once

#include <cmath>
#include <vector>

#include "truncest/core_dist.hpp"
#include "truncest/kernels.hpp"

namespace truncest::testutil {

inline std::vector<double> random_p(int d, Rng& rng, double lo = 0.1, double hi = 0.9) {
  std::vector<double> p(d);
  for (double& v : p) v = lo + (hi - lo) * uniform01(rng);
  return p;
}

inline ProductDistribution random_product(int d, Rng& rng, double lo = 0.1, double hi = 0.9) {
  return ProductDistribution(MeanParams(random_p(d, rng, lo, hi)));
}

inline ProductDistribution uniform_product(int d) {
  return ProductDistribution(MeanParams(std::vector<double>(d, 0.5)));
}

// 1/2 sum |empirical(x) - target(x)| over the listed support.
template <typename Pmf>
double empirical_tv(const std::vector<std::uint64_t>& counts, std::uint64_t n, const Pmf& pmf) {
  std::vector<double> target(counts.size(), 0.0);
  for (const auto& pm : pmf) target[pm.x.word()] = pm.prob;
  double s = 0.0;
  for (std::size_t w = 0; w < counts.size(); ++w)
    s += std::abs(static_cast<double>(counts[w]) / static_cast<double>(n) - target[w]);
  return 0.5 * s;
}

}  // namespace truncest::testutil
