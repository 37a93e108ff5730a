#include "truncest/truncation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>

#include "truncest/kernels.hpp"

namespace truncest {

namespace {

class PredicateOracle final : public MembershipOracle {
 public:
  explicit PredicateOracle(std::function<bool(const BitVector&)> pred) : pred_(std::move(pred)) {}
  bool contains(const BitVector& x) const override { return pred_(x); }

 private:
  std::function<bool(const BitVector&)> pred_;
};

class XorOracle final : public MembershipOracle {
 public:
  XorOracle(std::shared_ptr<const MembershipOracle> inner, BitVector mask)
      : inner_(std::move(inner)), mask_(mask) {}
  bool contains(const BitVector& x) const override { return inner_->contains(x ^ mask_); }

 private:
  std::shared_ptr<const MembershipOracle> inner_;
  BitVector mask_;
};

class L1Oracle final : public MembershipOracle {
 public:
  explicit L1Oracle(int k) : k_(k) {}
  bool contains(const BitVector& x) const override { return x.popcount() <= k_; }

 private:
  int k_;
};

class ListOracle final : public MembershipOracle {
 public:
  explicit ListOracle(std::shared_ptr<const std::vector<BitVector>> sorted)
      : sorted_(std::move(sorted)) {}
  bool contains(const BitVector& x) const override {
    return std::binary_search(sorted_->begin(), sorted_->end(), x);
  }

 private:
  std::shared_ptr<const std::vector<BitVector>> sorted_;
};

class SlabComplementOracle final : public MembershipOracle {
 public:
  SlabComplementOracle(std::vector<double> w, double c, double lambda)
      : w_(std::move(w)), c_(c), lambda_(lambda) {}
  bool contains(const BitVector& x) const override {
    const double t = x.dot(w_);
    return !(t > c_ - lambda_ && t < c_ + lambda_);
  }

 private:
  std::vector<double> w_;
  double c_;
  double lambda_;
};

class ProductOracle final : public MembershipOracle {
 public:
  explicit ProductOracle(std::vector<CoordinateSupport> s) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == CoordinateSupport::zero) must_be_zero_ |= 1ull << i;
      if (s[i] == CoordinateSupport::one) must_be_one_ |= 1ull << i;
    }
  }
  bool contains(const BitVector& x) const override {
    return (x.word() & must_be_zero_) == 0 && (x.word() & must_be_one_) == must_be_one_;
  }

 private:
  std::uint64_t must_be_zero_ = 0;
  std::uint64_t must_be_one_ = 0;
};

class RandomDensityOracle final : public MembershipOracle {
 public:
  RandomDensityOracle(double rho, std::uint64_t seed) : rho_(rho), seed_(seed) {}
  bool contains(const BitVector& x) const override {
    const std::uint64_t h = splitmix64(splitmix64(seed_) ^ x.word());
    return static_cast<double>(h >> 11) * 0x1.0p-53 < rho_;
  }

 private:
  double rho_;
  std::uint64_t seed_;
};

std::optional<std::vector<BitVector>> enumerate_if_small(int d,
                                                        const MembershipOracle& oracle) {
  if (d > enumeration_limit()) return std::nullopt;
  std::vector<BitVector> out;
  const std::uint64_t n = 1ull << d;
  for (std::uint64_t w = 0; w < n; ++w) {
    BitVector x(d, w);
    if (oracle.contains(x)) out.push_back(x);
  }
  return out;
}

void require_nonempty(const std::optional<std::vector<BitVector>>& els, const std::string& what) {
  if (els && els->empty()) throw DomainError("truncation set " + what + " is empty");
}

}  // namespace

TruncationSet::TruncationSet(int dim, std::shared_ptr<const MembershipOracle> oracle,
                             std::string descriptor,
                             std::optional<std::vector<BitVector>> elements)
    : dim_(dim),
      oracle_(std::move(oracle)),
      queries_(std::make_shared<std::atomic<std::uint64_t>>(0)),
      descriptor_(std::move(descriptor)) {
  BitVector::check_dim(dim);
  if (elements) {
    std::sort(elements->begin(), elements->end());
    elements->erase(std::unique(elements->begin(), elements->end()), elements->end());
    elements_ = std::make_shared<const std::vector<BitVector>>(std::move(*elements));
  }
}

TruncationSet TruncationSet::from_predicate(int dim, std::function<bool(const BitVector&)> pred,
                                            std::string descriptor) {
  return TruncationSet(dim, std::make_shared<PredicateOracle>(std::move(pred)),
                       std::move(descriptor));
}

TruncationSet TruncationSet::xor_shifted(const BitVector& anchor) const {
  require_same_dim(dim_, anchor.dim());
  TruncationSet out = *this;
  out.oracle_ = std::make_shared<XorOracle>(oracle_, anchor);
  out.descriptor_ = descriptor_ + " ^ " + anchor.to_string();
  if (elements_) {
    std::vector<BitVector> shifted;
    shifted.reserve(elements_->size());
    for (const auto& x : *elements_) shifted.push_back(x ^ anchor);
    std::sort(shifted.begin(), shifted.end());
    out.elements_ = std::make_shared<const std::vector<BitVector>>(std::move(shifted));
  }
  return out;
}

namespace sets {

TruncationSet full(int d) { return l1_leq(d, d); }

TruncationSet l1_leq(int d, int k) {
  BitVector::check_dim(d);
  if (k < 0) throw DomainError("l1_leq: k must be >= 0 (set would be empty)");
  auto oracle = std::make_shared<L1Oracle>(k);
  return TruncationSet(d, oracle, "l1_leq:" + std::to_string(k), enumerate_if_small(d, *oracle));
}

TruncationSet explicit_set(int d, std::vector<BitVector> points) {
  BitVector::check_dim(d);
  if (points.empty()) throw DomainError("explicit truncation set is empty");
  for (const auto& x : points) require_same_dim(d, x.dim());
  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  auto sorted = std::make_shared<const std::vector<BitVector>>(points);
  return TruncationSet(d, std::make_shared<ListOracle>(sorted),
                       "explicit:" + std::to_string(points.size()) + " points", std::move(points));
}

TruncationSet slab_complement(std::vector<double> w, double c, double lambda) {
  const int d = static_cast<int>(w.size());
  BitVector::check_dim(d);
  if (!(lambda >= 0.0)) throw DomainError("slab_complement: lambda must be >= 0");
  double norm = 0.0;
  for (double v : w) norm += v * v;
  if (!(norm > 0.0)) throw DomainError("slab_complement: w must be non-zero");
  auto oracle = std::make_shared<SlabComplementOracle>(w, c, lambda);
  auto els = enumerate_if_small(d, *oracle);
  require_nonempty(els, "slab_complement");
  std::string desc = "slab_complement:w=";
  for (int i = 0; i < d; ++i) desc += (i ? "," : "") + std::to_string(w[i]);
  desc += ",c=" + std::to_string(c) + ",lambda=" + std::to_string(lambda);
  // Elements are not attached: the element list is only kept for families
  // where it is cheap and exact to list.
  return TruncationSet(d, oracle, desc);
}

TruncationSet product(std::vector<CoordinateSupport> supports) {
  const int d = static_cast<int>(supports.size());
  BitVector::check_dim(d);
  std::string desc = "product:";
  for (auto s : supports) {
    const auto v = static_cast<std::uint8_t>(s);
    if (v == 0 || v > 3) throw DomainError("product set: a coordinate has no allowed value");
    desc += s == CoordinateSupport::zero ? "0" : s == CoordinateSupport::one ? "1" : "*";
  }
  auto oracle = std::make_shared<ProductOracle>(supports);
  return TruncationSet(d, oracle, desc, enumerate_if_small(d, *oracle));
}

TruncationSet random_density(int d, double rho, std::uint64_t seed) {
  BitVector::check_dim(d);
  if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("random_density: rho must be in (0, 1]");
  auto oracle = std::make_shared<RandomDensityOracle>(rho, seed);
  auto els = enumerate_if_small(d, *oracle);
  require_nonempty(els, "random_density");
  return TruncationSet(d, oracle,
                       "random_density:rho=" + std::to_string(rho) + ",seed=" + std::to_string(seed),
                       std::move(els));
}

}  // namespace sets

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double parse_real(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("set descriptor: '" + s + "' is not a number (" + what + ")");
  }
}

std::uint64_t parse_u64(const std::string& s, const std::string& what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ConfigError("set descriptor: '" + s + "' is not an unsigned integer (" + what + ")");
  return v;
}

// "w=1,2,3,c=0.5,lambda=0.1" -> {w: [1,2,3], c: [0.5], lambda: [0.1]}. Tokens
// without '=' continue the previous key's list.
std::map<std::string, std::vector<std::string>> parse_keyed_csv(std::string_view body) {
  std::map<std::string, std::vector<std::string>> out;
  std::string current;
  std::size_t start = 0;
  while (start <= body.size()) {
    auto end = body.find(',', start);
    if (end == std::string_view::npos) end = body.size();
    std::string tok = trim(body.substr(start, end - start));
    start = end + 1;
    if (tok.empty()) continue;
    if (auto eq = tok.find('='); eq != std::string::npos) {
      current = trim(tok.substr(0, eq));
      if (out.count(current)) throw ConfigError("set descriptor: duplicate key '" + current + "'");
      out[current].push_back(trim(tok.substr(eq + 1)));
    } else {
      if (current.empty()) throw ConfigError("set descriptor: value '" + tok + "' has no key");
      out[current].push_back(tok);
    }
  }
  return out;
}

const std::vector<std::string>& need_key(const std::map<std::string, std::vector<std::string>>& kv,
                                         const std::string& key, const std::string& family) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ConfigError("set descriptor " + family + ": missing '" + key + "'");
  return it->second;
}

void reject_unknown(const std::map<std::string, std::vector<std::string>>& kv,
                    std::initializer_list<std::string> allowed, const std::string& family) {
  for (const auto& [k, v] : kv)
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError("set descriptor " + family + ": unknown key '" + k + "'");
}

std::filesystem::path file_arg(std::string_view body, const std::filesystem::path& base,
                               const std::string& family) {
  std::string b = trim(body);
  if (b.empty() || b[0] != '@')
    throw ConfigError("set descriptor " + family + ": expected @file, got '" + b + "'");
  std::filesystem::path p = b.substr(1);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

}  // namespace

TruncationSet parse_set_descriptor(std::string_view descriptor, int d,
                                   const std::filesystem::path& base_dir) {
  const auto colon = descriptor.find(':');
  if (colon == std::string_view::npos)
    throw ConfigError("set descriptor '" + std::string(descriptor) + "' has no ':'");
  const std::string family = trim(descriptor.substr(0, colon));
  const std::string_view body = descriptor.substr(colon + 1);

  if (family == "l1_leq") {
    const auto k = parse_u64(trim(body), "k");
    return sets::l1_leq(d, static_cast<int>(std::min<std::uint64_t>(k, 64)));
  }
  if (family == "explicit") return sets::explicit_set(d, read_bitstring_file(file_arg(body, base_dir, family), d));
  if (family == "product") return sets::product(read_product_file(file_arg(body, base_dir, family), d));
  if (family == "slab_complement") {
    auto kv = parse_keyed_csv(body);
    reject_unknown(kv, {"w", "c", "lambda"}, family);
    std::vector<double> w;
    for (const auto& s : need_key(kv, "w", family)) w.push_back(parse_real(s, "w"));
    if (static_cast<int>(w.size()) != d)
      throw ConfigError("slab_complement: w has " + std::to_string(w.size()) +
                        " entries, expected d = " + std::to_string(d));
    const auto& c = need_key(kv, "c", family);
    const auto& l = need_key(kv, "lambda", family);
    if (c.size() != 1 || l.size() != 1) throw ConfigError("slab_complement: c and lambda are scalars");
    return sets::slab_complement(std::move(w), parse_real(c[0], "c"), parse_real(l[0], "lambda"));
  }
  if (family == "random_density") {
    auto kv = parse_keyed_csv(body);
    reject_unknown(kv, {"rho", "seed"}, family);
    const auto& rho = need_key(kv, "rho", family);
    const auto& seed = need_key(kv, "seed", family);
    if (rho.size() != 1 || seed.size() != 1) throw ConfigError("random_density: rho and seed are scalars");
    return sets::random_density(d, parse_real(rho[0], "rho"), parse_u64(seed[0], "seed"));
  }
  throw ConfigError("unknown set family '" + family + "'");
}

std::vector<BitVector> read_bitstring_file(const std::filesystem::path& path, int d) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open set file " + path.string());
  std::vector<BitVector> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (static_cast<int>(t.size()) != d)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                        std::to_string(d) + " characters, got " + std::to_string(t.size()));
    try {
      out.push_back(BitVector::parse(t));
    } catch (const DomainError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<CoordinateSupport> read_product_file(const std::filesystem::path& path, int d) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open product-set file " + path.string());
  std::vector<CoordinateSupport> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t == "0")
      out.push_back(CoordinateSupport::zero);
    else if (t == "1")
      out.push_back(CoordinateSupport::one);
    else if (t == "01" || t == "10" || t == "*")
      out.push_back(CoordinateSupport::both);
    else
      throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                        ": expected one of 0, 1, 01 for a coordinate support");
  }
  if (static_cast<int>(out.size()) != d)
    throw ConfigError(path.string() + ": " + std::to_string(out.size()) +
                      " coordinate lines, expected d = " + std::to_string(d));
  return out;
}

TruncatedDistribution::TruncatedDistribution(ProductDistribution b, TruncationSet s)
    : base(std::move(b)), set(std::move(s)) {
  require_same_dim(base.dim(), set.dim());
}

std::pair<TruncationSet, ProductDistribution> normalize(const TruncationSet& set,
                                                        const ProductDistribution& dist,
                                                        const BitVector& anchor) {
  require_same_dim(set.dim(), dist.dim());
  require_same_dim(set.dim(), anchor.dim());
  if (!set.contains(anchor))
    throw DomainError("normalize: anchor " + anchor.to_string() + " is not in S");
  return {set.xor_shifted(anchor), dist.flipped(anchor)};
}

std::uint64_t default_rejection_budget(std::optional<double> alpha_hat) {
  if (alpha_hat && *alpha_hat > 0.0)
    return std::max<std::uint64_t>(10000, static_cast<std::uint64_t>(std::ceil(100.0 / *alpha_hat)));
  return 1000000;
}

TruncatedDraw sample_truncated(const TruncatedDistribution& td, Rng& rng,
                               std::uint64_t max_attempts) {
  if (max_attempts < 1) throw DomainError("sample_truncated: max_attempts must be >= 1");
  for (std::uint64_t a = 1; a <= max_attempts; ++a) {
    BitVector x = td.base.sample(rng);
    if (td.set.contains(x)) return {x, a};
  }
  throw RejectionBudgetError(max_attempts);
}

Pmf exact_truncated_pmf(const TruncatedDistribution& td) {
  require_enumerable(td.dim());
  const auto pts = kernels::members(td.set);
  if (pts.empty()) throw DomainError("exact_truncated_pmf: S is empty");
  std::vector<double> logp(pts.size());
  double vmax = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pts.size(); ++k) {
    logp[k] = td.base.log_pmf(pts[k]);
    vmax = std::max(vmax, logp[k]);
  }
  double total = 0.0;
  for (double v : logp) total += std::exp(v - vmax);
  const double log_mass = vmax + std::log(total);
  Pmf out;
  out.reserve(pts.size());
  for (std::size_t k = 0; k < pts.size(); ++k) out.push_back({pts[k], std::exp(logp[k] - log_mass)});
  return out;
}

double exact_mass(const ProductDistribution& dist, const TruncationSet& set) {
  require_same_dim(dist.dim(), set.dim());
  require_enumerable(dist.dim());
  const auto pts = kernels::members(set);
  if (pts.empty()) return 0.0;
  const auto m = kernels::truncated_moments(pts, dist.natural().values(), false);
  return std::exp(m.log_partition - dist.log_normalizer());
}

MassEstimate estimate_mass(const ProductDistribution& dist, const TruncationSet& set,
                           std::uint64_t n, Rng& rng) {
  require_same_dim(dist.dim(), set.dim());
  if (n < 1) throw DomainError("estimate_mass: n must be >= 1");
  std::uint64_t hits = 0;
  for (std::uint64_t k = 0; k < n; ++k)
    if (set.contains(dist.sample(rng))) ++hits;
  const double m = static_cast<double>(hits) / static_cast<double>(n);
  return {m, std::sqrt(m * (1 - m) / static_cast<double>(n)), n};
}

FatnessReport estimate_fatness(const TruncatedDistribution& td, std::uint64_t n, Rng& rng,
                               std::uint64_t max_attempts) {
  if (n < 1) throw DomainError("estimate_fatness: n must be >= 1");
  const int d = td.dim();
  std::vector<std::uint64_t> hits(d, 0);
  for (std::uint64_t k = 0; k < n; ++k) {
    const BitVector x = sample_truncated(td, rng, max_attempts).x;
    for (int i = 0; i < d; ++i)
      if (td.set.contains(x.flipped(i))) ++hits[i];
  }
  FatnessReport r;
  r.per_coordinate.resize(d);
  for (int i = 0; i < d; ++i)
    r.per_coordinate[i] = static_cast<double>(hits[i]) / static_cast<double>(n);
  r.min_alpha = *std::min_element(r.per_coordinate.begin(), r.per_coordinate.end());
  r.samples_used = n;
  r.delta = 0.05;
  r.epsilon = std::sqrt(std::log(2.0 * d / r.delta) / (2.0 * static_cast<double>(n)));
  return r;
}

std::vector<double> exact_fatness(const TruncatedDistribution& td) {
  const Pmf pmf = exact_truncated_pmf(td);
  std::vector<double> alpha(td.dim(), 0.0);
  for (const auto& [x, p] : pmf)
    for (int i = 0; i < td.dim(); ++i)
      if (td.set.contains_uncounted(x.flipped(i))) alpha[i] += p;
  return alpha;
}

double anticoncentration_along(std::span<const BitVector> samples, std::span<const double> w) {
  const std::size_t n = samples.size();
  if (n == 0) throw DomainError("anticoncentration_along: no samples");
  std::vector<double> t(n);
  for (std::size_t k = 0; k < n; ++k) t[k] = samples[k].dot(w);
  std::sort(t.begin(), t.end());

  // Most points an open interval of half-width lam can hold: the widest run
  // t[j..k] with t[k] - t[j] < 2 lam.
  auto max_inside = [&](double lam) {
    std::size_t best = 0, j = 0;
    for (std::size_t k = 0; k < n; ++k) {
      while (t[k] - t[j] >= 2.0 * lam) ++j;
      best = std::max(best, k - j + 1);
    }
    return best;
  };
  auto feasible = [&](double lam) {
    if (lam <= 0.0) return true;
    return 1.0 - static_cast<double>(max_inside(lam)) / static_cast<double>(n) >= lam;
  };
  // The outside fraction is non-increasing in lam, so bisect for the largest
  // feasible lam in [0, 1].
  double lo = 0.0, hi = 1.0;
  if (feasible(hi)) return hi;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (feasible(mid) ? lo : hi) = mid;
  }
  return lo;
}

AntiConcentrationEstimate estimate_anticoncentration(const TruncatedDistribution& td,
                                                     int directions, std::uint64_t n, Rng& rng,
                                                     std::uint64_t max_attempts) {
  if (directions < 1) throw DomainError("estimate_anticoncentration: directions must be >= 1");
  if (n < 1) throw DomainError("estimate_anticoncentration: n must be >= 1");
  const int d = td.dim();
  std::vector<BitVector> xs;
  xs.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) xs.push_back(sample_truncated(td, rng, max_attempts).x);

  std::normal_distribution<double> gauss(0.0, 1.0);
  AntiConcentrationEstimate est{std::numeric_limits<double>::infinity(), {}, n};
  std::vector<double> w(d);
  for (int k = 0; k < directions; ++k) {
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : w) {
        v = gauss(rng);
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : w) v /= norm;
    const double lam = anticoncentration_along(xs, w);
    if (lam < est.lambda_hat) {
      est.lambda_hat = lam;
      est.worst_direction = w;
    }
  }
  return est;
}

}  // namespace truncest
