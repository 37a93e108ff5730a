#include "truncest/identify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

namespace truncest {

namespace {

Eigen::MatrixXd to_matrix(std::span<const BitVector> rows, int d) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), d);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (int c = 0; c < d; ++c) m(static_cast<Eigen::Index>(r), c) = rows[r][c];
  return m;
}

}  // namespace

IdentifiabilitySystem build_system(const TruncationSet& set, const Pmf& probs,
                                   std::optional<BitVector> anchor, double rank_tolerance) {
  const int d = set.dim();
  std::vector<PointMass> pts;
  for (const auto& pm : probs) {
    require_same_dim(d, pm.x.dim());
    if (!(pm.prob >= 0.0) || !std::isfinite(pm.prob))
      throw DomainError("build_system: probability of " + pm.x.to_string() + " is invalid");
    if (pm.prob == 0.0) continue;
    if (!set.contains_uncounted(pm.x))
      throw DomainError("build_system: " + pm.x.to_string() + " has mass but is not in S");
    pts.push_back(pm);
  }
  if (pts.empty()) throw IdentifiabilityError("build_system: no support points", 0, d);
  std::sort(pts.begin(), pts.end(), [](const PointMass& a, const PointMass& b) {
    return a.prob != b.prob ? a.prob > b.prob : a.x < b.x;
  });

  auto mass_of = [&](const BitVector& x) -> double {
    for (const auto& pm : pts)
      if (pm.x == x) return pm.prob;
    return 0.0;
  };

  IdentifiabilitySystem sys;
  sys.dim = d;
  if (anchor) {
    require_same_dim(d, anchor->dim());
    if (mass_of(*anchor) <= 0.0)
      throw NormalizationError("anchor " + anchor->to_string() + " has zero truncated mass");
    sys.anchor = *anchor;
  } else {
    const BitVector zero = BitVector::zeros(d);
    sys.anchor = mass_of(zero) > 0.0 ? zero : pts.front().x;
  }
  const double log_anchor = std::log(mass_of(sys.anchor));

  // Incremental elimination: each accepted row is stored reduced, with its
  // pivot column; a candidate is independent if its reduction leaves an
  // entry above tolerance.
  std::vector<Eigen::VectorXd> reduced;
  std::vector<int> pivots;
  for (const auto& pm : pts) {
    if (static_cast<int>(sys.basis.size()) == d) break;
    const BitVector y = pm.x ^ sys.anchor;
    if (y.popcount() == 0) continue;
    Eigen::VectorXd v(d);
    for (int c = 0; c < d; ++c) v(c) = y[c];
    for (std::size_t k = 0; k < reduced.size(); ++k) {
      const double f = v(pivots[k]) / reduced[k](pivots[k]);
      if (f != 0.0) v -= f * reduced[k];
    }
    Eigen::Index piv = 0;
    if (v.cwiseAbs().maxCoeff(&piv) <= rank_tolerance) continue;
    reduced.push_back(v);
    pivots.push_back(static_cast<int>(piv));
    sys.basis.push_back(pm.x);
    sys.rhs.push_back(std::log(pm.prob) - log_anchor);
  }
  const int rank = static_cast<int>(sys.basis.size());
  if (rank < d)
    throw IdentifiabilityError("support spans only rank " + std::to_string(rank) + " of " +
                                   std::to_string(d) + " after anchoring; need d independent points",
                               rank, d);

  std::vector<BitVector> anchored;
  for (const auto& b : sys.basis) anchored.push_back(b ^ sys.anchor);
  sys.condition_number = condition_number(anchored);
  return sys;
}

NaturalParams solve_system(const IdentifiabilitySystem& sys, double kappa_threshold) {
  const int d = sys.dim;
  if (static_cast<int>(sys.basis.size()) != d || static_cast<int>(sys.rhs.size()) != d)
    throw IdentifiabilityError("solve_system: system is not square", static_cast<int>(sys.basis.size()), d);
  if (!(sys.condition_number <= kappa_threshold)) throw IllConditionedError(sys.condition_number);

  std::vector<BitVector> anchored;
  for (const auto& b : sys.basis) anchored.push_back(b ^ sys.anchor);
  const Eigen::MatrixXd X = to_matrix(anchored, d);
  const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(sys.rhs.data(), d);
  const Eigen::VectorXd zp = X.fullPivLu().solve(r);
  const double resid = (X * zp - r).norm();
  if (!(resid <= 1e-9 * std::max(r.norm(), 1.0)))
    throw NumericError("solve_system: residual " + std::to_string(resid) + " too large");

  std::vector<double> z(d);
  for (int i = 0; i < d; ++i) z[i] = sys.anchor[i] ? -zp(i) : zp(i);
  return NaturalParams(std::move(z));
}

double condition_number(std::span<const BitVector> rows) {
  if (rows.empty()) return std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd X = to_matrix(rows, rows.front().dim());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X);
  const auto& s = svd.singularValues();
  const double smin = s(s.size() - 1);
  return smin > 0.0 ? s(0) / smin : std::numeric_limits<double>::infinity();
}

SlabInstance ill_conditioned_slab(int d, double lambda) {
  BitVector::check_dim(d);
  if (!(lambda > 0.0)) throw DomainError("ill_conditioned_slab: lambda must be positive");
  auto toeplitz_rows = [d](int n) {
    std::vector<BitVector> rows;
    for (int i = 0; i < n; ++i) {
      std::uint64_t w = 0;
      for (int o : {0, 1, 3})
        if (i + o < n) w |= 1ull << (i + o);
      rows.emplace_back(d, w);
    }
    return rows;
  };

  for (int n = 1; n <= d; ++n) {
    auto rows = toeplitz_rows(n);
    Eigen::MatrixXd T = to_matrix(rows, d).leftCols(n);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(T, Eigen::ComputeFullV);
    const double smin = svd.singularValues()(n - 1);
    if (smin >= lambda && n < d) continue;
    if (smin >= lambda)
      throw CapabilityError("ill_conditioned_slab: d = " + std::to_string(d) +
                            " is too small to reach lambda = " + std::to_string(lambda));
    std::vector<double> direction(d, 0.0);
    for (int i = 0; i < n; ++i) direction[i] = svd.matrixV()(i, n - 1);
    std::vector<BitVector> pts = rows;
    pts.push_back(BitVector::zeros(d));
    for (int j = n; j < d; ++j) pts.push_back(BitVector::zeros(d).with(j, true));
    TruncationSet set = sets::explicit_set(d, std::move(pts));
    return {std::move(set), std::move(direction), smin, n};
  }
  throw CapabilityError("ill_conditioned_slab: unreachable");
}

TruncationSet uniform_mimic_set(const ProductDistribution& dist, Rng& rng) {
  const int d = dist.dim();
  std::vector<CoordinateSupport> s(d);
  for (int i = 0; i < d; ++i) {
    const double p = dist.mean()[i];
    const bool heavy_one = p >= 0.5;
    const double keep_both = heavy_one ? (1 - p) / p : p / (1 - p);
    if (bernoulli(rng, keep_both))
      s[i] = CoordinateSupport::both;
    else
      s[i] = heavy_one ? CoordinateSupport::zero : CoordinateSupport::one;
  }
  return sets::product(std::move(s));
}

double mimic_expected_log2_size(const ProductDistribution& dist) {
  double e = 0.0;
  for (double p : dist.mean().values()) e += std::min(p, 1 - p) / std::max(p, 1 - p);
  return e;
}

MimicSampler::MimicSampler(ProductDistribution dist) : dist_(std::move(dist)) {
  for (double p : dist_.mean().values()) {
    keep_one_.push_back(std::min((1 - p) / p, 1.0));
    keep_zero_.push_back(std::min(p / (1 - p), 1.0));
  }
}

bool MimicSampler::survives(const BitVector& x, Rng& rng) const {
  bool ok = true;
  for (int i = 0; i < x.dim(); ++i) ok &= bernoulli(rng, x[i] ? keep_one_[i] : keep_zero_[i]);
  return ok;
}

BitVector MimicSampler::draw_fresh(Rng& rng, std::uint64_t* attempts) {
  for (std::uint64_t a = 1;; ++a) {
    const BitVector x = dist_.sample(rng);
    if (survives(x, rng)) {
      if (attempts) *attempts = a;
      return x;
    }
  }
}

BitVector MimicSampler::draw(Rng& rng, std::uint64_t* attempts) {
  for (std::uint64_t a = 1;; ++a) {
    const BitVector x = dist_.sample(rng);
    auto [it, fresh] = memo_.try_emplace(x.word(), false);
    if (fresh) it->second = survives(x, rng);
    if (it->second) {
      if (attempts) *attempts = a;
      return x;
    }
  }
}

ChiSquareResult chi_square_uniform(std::span<const std::uint64_t> counts) {
  if (counts.size() < 2) throw DomainError("chi_square_uniform: need at least two cells");
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}));
  if (n <= 0.0) throw DomainError("chi_square_uniform: no observations");
  const double expected = n / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    const double diff = static_cast<double>(c) - expected;
    stat += diff * diff / expected;
  }
  const int dof = static_cast<int>(counts.size()) - 1;
  boost::math::chi_squared dist(dof);
  return {stat, dof, boost::math::cdf(boost::math::complement(dist, stat))};
}

Pmf read_probability_csv(const std::filesystem::path& path, int d) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open probability file " + path.string());
  Pmf out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto where = path.string() + ":" + std::to_string(lineno) + ": ";
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError(where + "expected bitstring,probability");
    const std::string bits = line.substr(0, comma);
    if (bits == "bitstring") continue;
    if (static_cast<int>(bits.size()) != d)
      throw ConfigError(where + "bit-string length " + std::to_string(bits.size()) +
                        " differs from d = " + std::to_string(d));
    double prob = 0.0;
    try {
      std::size_t pos = 0;
      prob = std::stod(line.substr(comma + 1), &pos);
    } catch (const std::exception&) {
      throw ConfigError(where + "probability is not a number");
    }
    try {
      out.push_back({BitVector::parse(bits), prob});
    } catch (const DomainError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return out;
}

void write_probability_csv(const std::filesystem::path& path, const Pmf& pmf) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << "# schema=1\nbitstring,probability\n";
  char buf[64];
  for (const auto& [x, p] : pmf) {
    std::snprintf(buf, sizeof buf, "%.17g", p);
    out << x.to_string() << ',' << buf << '\n';
  }
}

}  // namespace truncest
