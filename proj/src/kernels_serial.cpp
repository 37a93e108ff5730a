#include <cmath>
#include <limits>

#include "truncest/kernels.hpp"

namespace truncest::kernels::serial {

std::vector<BitVector> members(const TruncationSet& set) {
  if (const auto* els = set.elements()) return *els;
  require_enumerable(set.dim());
  std::vector<BitVector> out;
  const std::uint64_t n = 1ull << set.dim();
  for (std::uint64_t w = 0; w < n; ++w) {
    BitVector x(set.dim(), w);
    if (set.contains_uncounted(x)) out.push_back(x);
  }
  return out;
}

Moments truncated_moments(std::span<const BitVector> pts, std::span<const double> z,
                          bool with_covariance) {
  const int d = static_cast<int>(z.size());
  Moments m;
  m.mean.assign(d, 0.0);
  if (pts.empty()) {
    m.log_partition = -std::numeric_limits<double>::infinity();
    return m;
  }
  std::vector<double> v(pts.size());
  double vmax = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    v[k] = pts[k].dot(z);
    vmax = std::max(vmax, v[k]);
  }
  double total = 0.0;
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(with_covariance ? d : 0, with_covariance ? d : 0);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    const double w = std::exp(v[k] - vmax);
    total += w;
    for (int i = 0; i < d; ++i) {
      if (!pts[k][i]) continue;
      m.mean[i] += w;
      if (with_covariance)
        for (int j = 0; j <= i; ++j)
          if (pts[k][j]) second(i, j) += w;
    }
  }
  m.log_partition = vmax + std::log(total);
  for (double& x : m.mean) x /= total;
  if (with_covariance) {
    m.covariance.resize(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j <= i; ++j) {
        const double c = second(i, j) / total - m.mean[i] * m.mean[j];
        m.covariance(i, j) = c;
        m.covariance(j, i) = c;
      }
  }
  return m;
}

double tv_products(const ProductDistribution& P, const ProductDistribution& Q) {
  require_same_dim(P.dim(), Q.dim());
  const std::uint64_t n = 1ull << P.dim();
  double s = 0.0;
  for (std::uint64_t w = 0; w < n; ++w) {
    BitVector x(P.dim(), w);
    s += std::abs(P.pmf(x) - Q.pmf(x));
  }
  return 0.5 * s;
}

double tv_counts(const ProductDistribution& P, std::span<const std::uint64_t> counts,
                 std::uint64_t n) {
  const std::uint64_t cells = 1ull << P.dim();
  if (counts.size() != cells) throw DimensionMismatch(static_cast<int>(cells), static_cast<int>(counts.size()));
  double s = 0.0;
  for (std::uint64_t w = 0; w < cells; ++w)
    s += std::abs(static_cast<double>(counts[w]) / static_cast<double>(n) -
                  P.pmf(BitVector(P.dim(), w)));
  return 0.5 * s;
}

}  // namespace truncest::kernels::serial
