#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include <omp.h>

#include "truncest/kernels.hpp"

namespace truncest::kernels {

void configure_threads(int threads) {
  if (threads <= 0) {
    if (const char* env = std::getenv("TRUNC_ESTIMATE_THREADS")) threads = std::atoi(env);
  }
  if (threads > 0) omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

namespace omp {

namespace {

std::size_t block_count(std::size_t n) { return (n + kBlockSize - 1) / kBlockSize; }

struct Block {
  double vmax = -std::numeric_limits<double>::infinity();
  double total = 0.0;
  std::vector<double> first;
  Eigen::MatrixXd second;
};

}  // namespace

std::vector<BitVector> members(const TruncationSet& set) {
  if (const auto* els = set.elements()) return *els;
  require_enumerable(set.dim());
  const std::int64_t n = static_cast<std::int64_t>(1ull << set.dim());
  std::vector<char> flag(static_cast<std::size_t>(n));
#pragma omp parallel for schedule(static)
  for (std::int64_t w = 0; w < n; ++w)
    flag[w] = set.contains_uncounted(BitVector(set.dim(), static_cast<std::uint64_t>(w)));
  std::vector<BitVector> out;
  for (std::int64_t w = 0; w < n; ++w)
    if (flag[w]) out.emplace_back(set.dim(), static_cast<std::uint64_t>(w));
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
  const std::int64_t nb = static_cast<std::int64_t>(block_count(pts.size()));
  std::vector<Block> blocks(nb);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < nb; ++b) {
    Block& blk = blocks[b];
    const std::size_t lo = static_cast<std::size_t>(b) * kBlockSize;
    const std::size_t hi = std::min(pts.size(), lo + kBlockSize);
    for (std::size_t k = lo; k < hi; ++k) blk.vmax = std::max(blk.vmax, pts[k].dot(z));
    blk.first.assign(d, 0.0);
    if (with_covariance) blk.second = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t k = lo; k < hi; ++k) {
      const double w = std::exp(pts[k].dot(z) - blk.vmax);
      blk.total += w;
      for (int i = 0; i < d; ++i) {
        if (!pts[k][i]) continue;
        blk.first[i] += w;
        if (with_covariance)
          for (int j = 0; j <= i; ++j)
            if (pts[k][j]) blk.second(i, j) += w;
      }
    }
  }
  double vmax = -std::numeric_limits<double>::infinity();
  for (const Block& blk : blocks) vmax = std::max(vmax, blk.vmax);
  double total = 0.0;
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(with_covariance ? d : 0, with_covariance ? d : 0);
  for (const Block& blk : blocks) {
    const double scale = std::exp(blk.vmax - vmax);
    total += scale * blk.total;
    for (int i = 0; i < d; ++i) m.mean[i] += scale * blk.first[i];
    if (with_covariance) second += scale * blk.second;
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

namespace {

template <class Cell>
double blocked_abs_sum(std::uint64_t cells, Cell&& cell) {
  const std::int64_t nb = static_cast<std::int64_t>(block_count(cells));
  std::vector<double> partial(nb, 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < nb; ++b) {
    const std::uint64_t lo = static_cast<std::uint64_t>(b) * kBlockSize;
    const std::uint64_t hi = std::min<std::uint64_t>(cells, lo + kBlockSize);
    double s = 0.0;
    for (std::uint64_t w = lo; w < hi; ++w) s += std::abs(cell(w));
    partial[b] = s;
  }
  double s = 0.0;
  for (double v : partial) s += v;
  return s;
}

}  // namespace

double tv_products(const ProductDistribution& P, const ProductDistribution& Q) {
  require_same_dim(P.dim(), Q.dim());
  const int d = P.dim();
  return 0.5 * blocked_abs_sum(1ull << d, [&](std::uint64_t w) {
           BitVector x(d, w);
           return P.pmf(x) - Q.pmf(x);
         });
}

double tv_counts(const ProductDistribution& P, std::span<const std::uint64_t> counts,
                 std::uint64_t n) {
  const int d = P.dim();
  const std::uint64_t cells = 1ull << d;
  if (counts.size() != cells) throw DimensionMismatch(static_cast<int>(cells), static_cast<int>(counts.size()));
  const double inv_n = 1.0 / static_cast<double>(n);
  return 0.5 * blocked_abs_sum(cells, [&](std::uint64_t w) {
           return static_cast<double>(counts[w]) * inv_n - P.pmf(BitVector(d, w));
         });
}

}  // namespace omp
}  // namespace truncest::kernels
