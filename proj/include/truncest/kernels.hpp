#pragma once

// Enumeration kernels over the hypercube. Each kernel has a straightforward
// serial reference and an OpenMP version. The OpenMP versions reduce over
// fixed-size blocks and combine the block results in block order, so their
// output does not depend on the thread count.

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "truncest/core_dist.hpp"
#include "truncest/truncation.hpp"

namespace truncest::kernels {

inline constexpr std::size_t kBlockSize = 4096;

struct Moments {
  double log_partition = 0.0;  // log sum_{x in pts} exp(x^T z)
  std::vector<double> mean;    // E[x] under the tilted law
  Eigen::MatrixXd covariance;  // empty unless requested
};

namespace serial {
std::vector<BitVector> members(const TruncationSet& set);
Moments truncated_moments(std::span<const BitVector> pts, std::span<const double> z,
                          bool with_covariance);
double tv_products(const ProductDistribution& P, const ProductDistribution& Q);
// counts is indexed by BitVector::word(), length 2^d.
double tv_counts(const ProductDistribution& P, std::span<const std::uint64_t> counts,
                 std::uint64_t n);
}  // namespace serial

namespace omp {
std::vector<BitVector> members(const TruncationSet& set);
Moments truncated_moments(std::span<const BitVector> pts, std::span<const double> z,
                          bool with_covariance);
double tv_products(const ProductDistribution& P, const ProductDistribution& Q);
double tv_counts(const ProductDistribution& P, std::span<const std::uint64_t> counts,
                 std::uint64_t n);
}  // namespace omp

// Default entry points (OpenMP).
inline std::vector<BitVector> members(const TruncationSet& set) { return omp::members(set); }
inline Moments truncated_moments(std::span<const BitVector> pts, std::span<const double> z,
                                 bool with_covariance) {
  return omp::truncated_moments(pts, z, with_covariance);
}
inline double tv_products(const ProductDistribution& P, const ProductDistribution& Q) {
  return omp::tv_products(P, Q);
}
inline double tv_counts(const ProductDistribution& P, std::span<const std::uint64_t> counts,
                        std::uint64_t n) {
  return omp::tv_counts(P, counts, n);
}

// Bounds the OpenMP team size; reads TRUNC_ESTIMATE_THREADS when called with 0.
void configure_threads(int threads = 0);
int max_threads();

}  // namespace truncest::kernels
