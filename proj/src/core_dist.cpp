#include "truncest/core_dist.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

#include "truncest/kernels.hpp"

namespace truncest {

namespace {

std::atomic<int> g_enumeration_limit{20};

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

double logit(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DomainError("logit: p = " + std::to_string(p) + " is outside (0, 1)");
  return std::log(p) - std::log1p(-p);
}

double inverse_logit(double z) {
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  if (z >= 0) return std::min(1.0 / (1.0 + std::exp(-z)), hi);
  const double e = std::exp(z);
  return std::max(e / (1.0 + e), lo);
}

int enumeration_limit() { return g_enumeration_limit.load(); }

void set_enumeration_limit(int d) {
  if (d < 1 || d > kMaxDimension) throw DomainError("enumeration limit out of range");
  g_enumeration_limit.store(d);
}

void require_enumerable(int d) {
  if (d > enumeration_limit())
    throw CapabilityError("exact enumeration needs d <= " + std::to_string(enumeration_limit()) +
                          ", got d = " + std::to_string(d));
}

MeanParams::MeanParams(std::vector<double> p) : p_(std::move(p)) {
  if (p_.empty()) throw DomainError("mean parameters must be non-empty");
  for (std::size_t i = 0; i < p_.size(); ++i) {
    if (!(p_[i] > 0.0 && p_[i] < 1.0))
      throw DomainError("p[" + std::to_string(i) + "] = " + std::to_string(p_[i]) +
                        " is outside (0, 1)");
  }
}

MeanParams MeanParams::clamped(std::vector<double> p, double lo) {
  for (double& v : p) v = std::clamp(v, lo, 1.0 - lo);
  return MeanParams(std::move(p));
}

NaturalParams::NaturalParams(std::vector<double> z) : z_(std::move(z)) {
  if (z_.empty()) throw DomainError("natural parameters must be non-empty");
  for (std::size_t i = 0; i < z_.size(); ++i) {
    if (!std::isfinite(z_[i]))
      throw NumericError("z[" + std::to_string(i) + "] is not finite");
  }
}

NaturalParams to_natural(const MeanParams& p) {
  std::vector<double> z(p.dim());
  for (int i = 0; i < p.dim(); ++i) z[i] = logit(p[i]);
  return NaturalParams(std::move(z));
}

MeanParams to_mean(const NaturalParams& z) {
  std::vector<double> p(z.dim());
  // |z| beyond ~37 rounds to exactly 0 or 1 in double precision.
  for (int i = 0; i < z.dim(); ++i)
    p[i] = std::clamp(inverse_logit(z[i]), std::numeric_limits<double>::min(),
                      std::nextafter(1.0, 0.0));
  return MeanParams(std::move(p));
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  require_same_dim(static_cast<int>(a.size()), static_cast<int>(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

double linf_distance(std::span<const double> a, std::span<const double> b) {
  require_same_dim(static_cast<int>(a.size()), static_cast<int>(b.size()));
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ProductDistribution::ProductDistribution(MeanParams p) : mean_(std::move(p)) {
  BitVector::check_dim(mean_.dim());
  natural_ = to_natural(mean_);
  log_p_.resize(dim());
  log_q_.resize(dim());
  log_normalizer_ = 0.0;
  for (int i = 0; i < dim(); ++i) {
    log_p_[i] = std::log(mean_[i]);
    log_q_[i] = std::log1p(-mean_[i]);
    log_normalizer_ += softplus(natural_[i]);
  }
}

ProductDistribution::ProductDistribution(const NaturalParams& z)
    : ProductDistribution(to_mean(z)) {
  // Keep the caller's logits rather than the round-tripped ones.
  natural_ = z;
  log_normalizer_ = 0.0;
  for (int i = 0; i < dim(); ++i) {
    log_p_[i] = -softplus(-z[i]);
    log_q_[i] = -softplus(z[i]);
    log_normalizer_ += softplus(z[i]);
  }
}

double ProductDistribution::log_pmf(const BitVector& x) const {
  require_same_dim(dim(), x.dim());
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += x[i] ? log_p_[i] : log_q_[i];
  return s;
}

double ProductDistribution::pmf(const BitVector& x) const { return std::exp(log_pmf(x)); }

double ProductDistribution::pmf_exponential_form(const BitVector& x) const {
  require_same_dim(dim(), x.dim());
  return std::exp(x.dot(natural_.values()) - log_normalizer_);
}

BitVector ProductDistribution::sample(Rng& rng) const {
  std::uint64_t w = 0;
  for (int i = 0; i < dim(); ++i)
    if (bernoulli(rng, mean_[i])) w |= 1ull << i;
  return BitVector(dim(), w);
}

ProductDistribution ProductDistribution::flipped(const BitVector& mask) const {
  require_same_dim(dim(), mask.dim());
  std::vector<double> z(natural_.values().begin(), natural_.values().end());
  for (int i = 0; i < dim(); ++i)
    if (mask[i]) z[i] = -z[i];
  return ProductDistribution(NaturalParams(std::move(z)));
}

double kl_product(const ProductDistribution& P, const ProductDistribution& Q) {
  require_same_dim(P.dim(), Q.dim());
  double kl = 0.0;
  for (int i = 0; i < P.dim(); ++i) {
    const double p = P.mean()[i], q = Q.mean()[i];
    kl += p * (std::log(p) - std::log(q)) + (1 - p) * (std::log1p(-p) - std::log1p(-q));
  }
  return std::max(kl, 0.0);
}

DistanceBounds distance_bounds(const ProductDistribution& P, const ProductDistribution& Q) {
  require_same_dim(P.dim(), Q.dim());
  double dz2 = 0.0, chi = 0.0;
  for (int i = 0; i < P.dim(); ++i) {
    const double dz = P.natural()[i] - Q.natural()[i];
    dz2 += dz * dz;
    const double p = P.mean()[i], q = Q.mean()[i];
    chi += (p - q) * (p - q) / (p + q) + (p - q) * (p - q) / (2.0 - p - q);
  }
  return {dz2, std::sqrt(2.0) / 2.0 * std::sqrt(dz2), std::sqrt(chi)};
}

double exact_tv(const ProductDistribution& P, const ProductDistribution& Q) {
  require_same_dim(P.dim(), Q.dim());
  require_enumerable(P.dim());
  return kernels::tv_products(P, Q);
}

}  // namespace truncest
