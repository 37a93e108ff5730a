#pragma once

#include <span>
#include <vector>

#include "truncest/bitvec.hpp"
#include "truncest/rng.hpp"

namespace truncest {

// Logarithms are natural throughout.
double logit(double p);
double inverse_logit(double z);

// Largest dimension for which exact (2^d) enumeration is attempted. Defaults
// to 20.
int enumeration_limit();
void set_enumeration_limit(int d);
void require_enumerable(int d);

// Mean parameters p with every p_i strictly inside (0, 1).
class MeanParams {
 public:
  MeanParams() = default;
  explicit MeanParams(std::vector<double> p);
  // Clamps into [lo, 1 - lo] first; used for finite-sample means.
  static MeanParams clamped(std::vector<double> p, double lo);

  int dim() const { return static_cast<int>(p_.size()); }
  double operator[](int i) const { return p_[i]; }
  std::span<const double> values() const { return p_; }

 private:
  std::vector<double> p_;
};

// Natural parameters (logits) z.
class NaturalParams {
 public:
  NaturalParams() = default;
  explicit NaturalParams(std::vector<double> z);
  static NaturalParams zeros(int d) { return NaturalParams(std::vector<double>(d, 0.0)); }

  int dim() const { return static_cast<int>(z_.size()); }
  double operator[](int i) const { return z_[i]; }
  std::span<const double> values() const { return z_; }

 private:
  std::vector<double> z_;
};

NaturalParams to_natural(const MeanParams& p);
MeanParams to_mean(const NaturalParams& z);

double l2_distance(std::span<const double> a, std::span<const double> b);
double linf_distance(std::span<const double> a, std::span<const double> b);

// D(p) = Be(p_1) x ... x Be(p_d). Immutable; both parameterizations are kept.
class ProductDistribution {
 public:
  ProductDistribution() = default;
  explicit ProductDistribution(MeanParams p);
  explicit ProductDistribution(const NaturalParams& z);

  int dim() const { return mean_.dim(); }
  const MeanParams& mean() const { return mean_; }
  const NaturalParams& natural() const { return natural_; }

  // log of prod_i (1 + exp(z_i)).
  double log_normalizer() const { return log_normalizer_; }

  double log_pmf(const BitVector& x) const;
  double pmf(const BitVector& x) const;
  // exp(x^T z) / prod(1 + exp(z_i)); agrees with pmf to rounding.
  double pmf_exponential_form(const BitVector& x) const;

  BitVector sample(Rng& rng) const;

  // The law of x ^ mask: p_i becomes 1 - p_i wherever mask has a one.
  ProductDistribution flipped(const BitVector& mask) const;

 private:
  MeanParams mean_;
  NaturalParams natural_;
  std::vector<double> log_p_;
  std::vector<double> log_q_;
  double log_normalizer_ = 0.0;
};

double kl_product(const ProductDistribution& P, const ProductDistribution& Q);

struct DistanceBounds {
  double kl_bound;      // ||z(p) - z(q)||_2^2
  double tv_bound_z;    // (sqrt 2 / 2) ||z(p) - z(q)||_2
  double tv_bound_chi;  // sqrt(sum (p_i - q_i)^2 / (p_i + q_i))
};
DistanceBounds distance_bounds(const ProductDistribution& P, const ProductDistribution& Q);

// 1/2 sum over the cube of |P(x) - Q(x)|. Requires d <= enumeration_limit().
double exact_tv(const ProductDistribution& P, const ProductDistribution& Q);

}  // namespace truncest
