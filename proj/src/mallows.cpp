#include "truncest/mallows.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace truncest {

namespace {

constexpr int kMaxRankingEnumeration = 10;

void check_items(int d) {
  if (d < 1) throw DomainError("ranking must have at least one item");
}

}  // namespace

Ranking Ranking::identity(int d) {
  check_items(d);
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  return from_order(std::move(order));
}

Ranking Ranking::from_order(std::vector<int> order) {
  const int d = static_cast<int>(order.size());
  check_items(d);
  Ranking r;
  r.pos_.assign(d, -1);
  for (int k = 0; k < d; ++k) {
    const int item = order[k];
    if (item < 0 || item >= d || r.pos_[item] != -1)
      throw DomainError("ranking order is not a permutation of 0..d-1");
    r.pos_[item] = k;
  }
  r.order_ = std::move(order);
  return r;
}

Ranking Ranking::from_positions(const std::vector<int>& positions) {
  const int d = static_cast<int>(positions.size());
  check_items(d);
  std::vector<int> order(d, -1);
  for (int i = 0; i < d; ++i) {
    const int p = positions[i];
    if (p < 0 || p >= d || order[p] != -1)
      throw DomainError("ranking positions are not a permutation of 0..d-1");
    order[p] = i;
  }
  return from_order(std::move(order));
}

Ranking Ranking::parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<int> order;
  std::string tok;
  while (in >> tok) {
    int v = 0;
    try {
      std::size_t pos = 0;
      v = std::stoi(tok, &pos);
      if (pos != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw DomainError("ranking token '" + tok + "' is not an integer");
    }
    order.push_back(v - 1);
  }
  return from_order(std::move(order));
}

Ranking Ranking::swapped(int i, int j) const {
  Ranking r = *this;
  std::swap(r.order_[r.pos_[i]], r.order_[r.pos_[j]]);
  std::swap(r.pos_[i], r.pos_[j]);
  return r;
}

std::string Ranking::to_string() const {
  std::string s;
  for (int k = 0; k < dim(); ++k) {
    if (k) s += ' ';
    s += std::to_string(order_[k] + 1);
  }
  return s;
}

int kendall_tau(const Ranking& a, const Ranking& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
  const int d = a.dim();
  int disc = 0;
  // Walk a's order; an inversion is a pair placed later in a but earlier in b.
  for (int x = 0; x < d; ++x)
    for (int y = x + 1; y < d; ++y)
      if (b.position(a.item_at(x)) > b.position(a.item_at(y))) ++disc;
  return disc;
}

std::vector<Ranking> all_rankings(int d) {
  check_items(d);
  if (d > kMaxRankingEnumeration)
    throw CapabilityError("ranking enumeration limited to d <= " + std::to_string(kMaxRankingEnumeration));
  std::vector<int> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Ranking> out;
  do {
    out.push_back(Ranking::from_order(order));
  } while (std::next_permutation(order.begin(), order.end()));
  return out;
}

MallowsModel::MallowsModel(Ranking central, double phi) : central_(std::move(central)), phi_(phi) {
  check_items(central_.dim());
  if (!(phi >= 0.0 && phi < 1.0)) throw DomainError("Mallows spread phi must be in [0, 1)");
}

double MallowsModel::log_normalizer() const {
  double s = 0.0;
  for (int i = 1; i <= dim(); ++i) s += std::log1p(-std::pow(phi_, i)) - std::log1p(-phi_);
  return s;
}

double MallowsModel::log_pmf(const Ranking& pi) const {
  const int k = kendall_tau(central_, pi);
  if (k == 0) return -log_normalizer();
  if (phi_ == 0.0) return -std::numeric_limits<double>::infinity();
  return k * std::log(phi_) - log_normalizer();
}

double MallowsModel::pmf(const Ranking& pi) const { return std::exp(log_pmf(pi)); }

Ranking MallowsModel::sample(Rng& rng) const {
  // Insert the central order's items one by one; placing the k-th item j
  // slots before the end creates j inversions, with weight phi^j.
  std::vector<int> order;
  order.reserve(dim());
  std::vector<double> w;
  for (int k = 0; k < dim(); ++k) {
    w.assign(k + 1, 0.0);
    double pw = 1.0, total = 0.0;
    for (int j = 0; j <= k; ++j) {
      w[j] = pw;
      total += pw;
      pw *= phi_;
    }
    double u = uniform01(rng) * total;
    int j = 0;
    while (j < k && u >= w[j]) u -= w[j++];
    order.insert(order.end() - j, central_.item_at(k));
  }
  return Ranking::from_order(std::move(order));
}

double mallows_pmf(const MallowsModel& m, const Ranking& pi) { return m.pmf(pi); }
Ranking sample_mallows(const MallowsModel& m, Rng& rng) { return m.sample(rng); }

RankingSet::RankingSet(int dim, std::function<bool(const Ranking&)> pred, std::string descriptor)
    : dim_(dim),
      pred_(std::move(pred)),
      queries_(std::make_shared<std::atomic<std::uint64_t>>(0)),
      descriptor_(std::move(descriptor)) {
  check_items(dim);
}

std::vector<Ranking> RankingSet::members() const {
  std::vector<Ranking> out;
  for (auto& r : all_rankings(dim_))
    if (pred_(r)) out.push_back(std::move(r));
  return out;
}

namespace ranking_sets {

RankingSet all(int d) {
  return RankingSet(d, [](const Ranking&) { return true; }, "all");
}

RankingSet kendall_ball(const Ranking& pivot, int radius) {
  if (radius < 0) throw DomainError("kendall_ball: radius must be >= 0");
  return RankingSet(
      pivot.dim(), [pivot, radius](const Ranking& r) { return kendall_tau(pivot, r) <= radius; },
      "kendall_ball:radius=" + std::to_string(radius) + ",pivot=" + pivot.to_string());
}

RankingSet explicit_list(int d, std::vector<Ranking> members) {
  if (members.empty()) throw DomainError("explicit ranking set is empty");
  for (const auto& r : members)
    if (r.dim() != d) throw DimensionMismatch(d, r.dim());
  std::sort(members.begin(), members.end());
  members.erase(std::unique(members.begin(), members.end()), members.end());
  const std::size_t n = members.size();
  auto sorted = std::make_shared<const std::vector<Ranking>>(std::move(members));
  return RankingSet(
      d, [sorted](const Ranking& r) { return std::binary_search(sorted->begin(), sorted->end(), r); },
      "explicit:" + std::to_string(n) + " rankings");
}

RankingSet position_constraint(int d, int item, int position) {
  if (item < 0 || item >= d || position < 0 || position >= d)
    throw DomainError("position_constraint: item or position out of range");
  return RankingSet(
      d, [item, position](const Ranking& r) { return r.position(item) == position; },
      "position:item=" + std::to_string(item + 1) + ",pos=" + std::to_string(position + 1));
}

}  // namespace ranking_sets

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

int parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("ranking set descriptor: '" + s + "' is not an integer (" + what + ")");
  }
}

}  // namespace

RankingSet parse_ranking_set(std::string_view descriptor, const Ranking& pivot,
                             const std::filesystem::path& base_dir) {
  const std::string desc = trim(descriptor);
  if (desc == "all" || desc == "all:") return ranking_sets::all(pivot.dim());
  const auto colon = desc.find(':');
  if (colon == std::string::npos) throw ConfigError("ranking set descriptor '" + desc + "' has no ':'");
  const std::string family = trim(desc.substr(0, colon));
  const std::string body = trim(desc.substr(colon + 1));

  std::vector<std::pair<std::string, std::string>> kv;
  if (family != "explicit") {
    std::istringstream in(body);
    std::string tok;
    while (std::getline(in, tok, ',')) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw ConfigError("ranking set descriptor: expected key=value in '" + tok + "'");
      kv.emplace_back(trim(tok.substr(0, eq)), trim(tok.substr(eq + 1)));
    }
  }
  auto get = [&](const std::string& key) -> std::string {
    for (const auto& [k, v] : kv)
      if (k == key) return v;
    throw ConfigError("ranking set " + family + ": missing '" + key + "'");
  };
  auto reject_unknown = [&](std::initializer_list<std::string> allowed) {
    for (const auto& [k, v] : kv)
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
        throw ConfigError("ranking set " + family + ": unknown key '" + k + "'");
  };

  if (family == "kendall_ball") {
    reject_unknown({"radius"});
    return ranking_sets::kendall_ball(pivot, parse_int(get("radius"), "radius"));
  }
  if (family == "position") {
    reject_unknown({"item", "pos"});
    return ranking_sets::position_constraint(pivot.dim(), parse_int(get("item"), "item") - 1,
                                             parse_int(get("pos"), "pos") - 1);
  }
  if (family == "explicit") {
    if (body.empty() || body[0] != '@') throw ConfigError("ranking set explicit: expected @file");
    std::filesystem::path p = body.substr(1);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    return ranking_sets::explicit_list(pivot.dim(), read_ranking_file(p, pivot.dim()));
  }
  throw ConfigError("unknown ranking set family '" + family + "'");
}

std::vector<Ranking> read_ranking_file(const std::filesystem::path& path, int d) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ranking file " + path.string());
  std::vector<Ranking> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    try {
      Ranking r = Ranking::parse(t);
      if (r.dim() != d) throw DomainError("expected " + std::to_string(d) + " items");
      out.push_back(std::move(r));
    } catch (const DomainError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

TruncatedMallows::TruncatedMallows(MallowsModel m, RankingSet s)
    : model(std::move(m)), set(std::move(s)) {
  if (model.dim() != set.dim()) throw DimensionMismatch(model.dim(), set.dim());
}

RankingDraw sample_truncated(const TruncatedMallows& td, Rng& rng, std::uint64_t max_attempts) {
  if (max_attempts < 1) throw DomainError("sample_truncated: max_attempts must be >= 1");
  for (std::uint64_t a = 1; a <= max_attempts; ++a) {
    Ranking pi = td.model.sample(rng);
    if (td.set.contains(pi)) return {std::move(pi), a};
  }
  throw RejectionBudgetError(max_attempts);
}

std::vector<RankingMass> exact_truncated_pmf(const TruncatedMallows& td) {
  std::vector<RankingMass> out;
  double total = 0.0;
  for (auto& r : td.set.members()) {
    const double p = td.model.pmf(r);
    total += p;
    out.push_back({std::move(r), p});
  }
  if (out.empty() || !(total > 0.0)) throw DomainError("exact_truncated_pmf: S has no mass");
  for (auto& rm : out) rm.prob /= total;
  return out;
}

double exact_tv(const MallowsModel& a, const MallowsModel& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch(a.dim(), b.dim());
  double s = 0.0;
  for (const auto& r : all_rankings(a.dim())) s += std::abs(a.pmf(r) - b.pmf(r));
  return 0.5 * s;
}

double exact_precedence(const MallowsModel& m, int i, int j) {
  double s = 0.0;
  for (const auto& r : all_rankings(m.dim()))
    if (r.prefers(i, j)) s += m.pmf(r);
  return s;
}

double exact_conditional_precedence(const TruncatedMallows& td, int i, int j) {
  double ahead = 0.0, total = 0.0;
  for (const auto& [r, p] : exact_truncated_pmf(td)) {
    if (!td.set.contains_uncounted(r.swapped(i, j))) continue;
    total += p;
    if (r.prefers(i, j)) ahead += p;
  }
  return total > 0.0 ? ahead / total : std::numeric_limits<double>::quiet_NaN();
}

std::optional<double> PairTally::p_hat(int i, int j) const {
  const auto t = total(i, j);
  if (t == 0) return std::nullopt;
  return static_cast<double>(count(i, j)) / static_cast<double>(t);
}

PairUpdateStats pair_update(const TruncatedMallows& td, PairTally& tally, Rng& rng,
                            std::uint64_t max_attempts, const PairFilter& filter) {
  if (tally.dim() != td.dim()) throw DimensionMismatch(td.dim(), tally.dim());
  const RankingDraw draw = sample_truncated(td, rng, max_attempts);
  PairUpdateStats st{draw.attempts, 0};
  const int d = td.dim();
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      if (filter && !filter(i, j)) continue;
      if (!td.set.contains(draw.pi.swapped(i, j))) continue;
      if (draw.pi.prefers(i, j))
        tally.record(i, j);
      else
        tally.record(j, i);
      ++st.pairs_updated;
    }
  return st;
}

namespace {

enum class TournamentState { incomplete, cycle, total_order };

// Kahn's algorithm on the decided edges. A unique source at every step means
// the order is total, i.e. the decided edges contain a Hamiltonian path.
TournamentState inspect(const PairTally& t, std::uint64_t n, std::vector<int>& order) {
  const int d = t.dim();
  std::vector<std::vector<int>> out(d);
  std::vector<int> indeg(d, 0);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      if (t.total(i, j) < n || t.count(i, j) == t.count(j, i)) continue;
      const bool i_first = t.count(i, j) > t.count(j, i);
      const int a = i_first ? i : j, b = i_first ? j : i;
      out[a].push_back(b);
      ++indeg[b];
    }
  order.clear();
  std::vector<int> ready;
  for (int i = 0; i < d; ++i)
    if (indeg[i] == 0) ready.push_back(i);
  bool unique = true;
  while (!ready.empty()) {
    if (ready.size() > 1) unique = false;
    std::sort(ready.begin(), ready.end());
    const int v = ready.front();
    ready.erase(ready.begin());
    order.push_back(v);
    for (int w : out[v])
      if (--indeg[w] == 0) ready.push_back(w);
  }
  if (static_cast<int>(order.size()) < d) return TournamentState::cycle;
  return unique ? TournamentState::total_order : TournamentState::incomplete;
}

}  // namespace

CentralEstimate recover_central(const TruncatedMallows& td, double delta, Rng& rng,
                                const TournamentOptions& opts) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("recover_central: delta must be in (0, 1)");
  if (!(opts.gamma > 0.0 && opts.gamma <= 1.0)) throw DomainError("recover_central: gamma must be in (0, 1]");
  const int d = td.dim();
  CentralEstimate est;
  est.threshold = static_cast<std::uint64_t>(
      std::ceil(opts.C * std::log(std::max(d, 2) / delta) / (opts.gamma * opts.gamma)));
  if (d == 1) {
    est.central = Ranking::identity(1);
    return est;
  }
  PairTally tally(d);
  std::vector<int> order;
  while (est.samples < opts.max_samples) {
    pair_update(td, tally, rng, opts.rejection_budget);
    ++est.samples;
    const auto state = inspect(tally, est.threshold, order);
    if (state == TournamentState::total_order) {
      est.central = Ranking::from_order(order);
      return est;
    }
    if (state == TournamentState::cycle) {
      if (++est.restarts > opts.max_restarts)
        throw SampleBudgetError("recover_central: tournament formed a cycle " +
                                std::to_string(est.restarts) + " times");
      tally.clear();
    }
  }
  throw SampleBudgetError("recover_central: no total order after " + std::to_string(est.samples) +
                          " samples (margin too small or neighboring pairs not fat)");
}

SpreadEstimate estimate_spread(const TruncatedMallows& td, const Ranking& central, double eps,
                               double delta, Rng& rng, std::uint64_t max_samples,
                               std::uint64_t rejection_budget) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("estimate_spread: eps must be in (0, 1)");
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("estimate_spread: delta must be in (0, 1)");
  if (central.dim() != td.dim()) throw DimensionMismatch(td.dim(), central.dim());
  if (td.dim() < 2) throw DomainError("estimate_spread: need at least two items");
  const int a = central.item_at(0), b = central.item_at(1);
  const int lo = std::min(a, b), hi = std::max(a, b);
  const auto n = static_cast<std::uint64_t>(std::ceil(std::log(2.0 / delta) / (2.0 * eps * eps)));
  PairTally tally(td.dim());
  const PairFilter only = [lo, hi](int i, int j) { return i == lo && j == hi; };
  SpreadEstimate est{0.0, 0.0, 0, 0};
  while (tally.total(a, b) < n) {
    if (est.samples >= max_samples)
      throw SampleBudgetError("estimate_spread: top neighboring pair of the central ranking "
                              "qualified only " + std::to_string(tally.total(a, b)) + " times in " +
                              std::to_string(est.samples) + " samples");
    pair_update(td, tally, rng, rejection_budget, only);
    ++est.samples;
  }
  est.tallies = tally.total(a, b);
  est.p_hat = *tally.p_hat(a, b);
  const double m = 2.0 * est.p_hat - 1.0;
  const double phi = m <= -1.0 ? std::numeric_limits<double>::infinity() : (1.0 - m) / (1.0 + m);
  est.phi_hat = std::clamp(phi, 0.0, 1.0 - 1e-12);
  return est;
}

MallowsFit learn_mallows_tv(const TruncatedMallows& td, double eps, double delta, Rng& rng,
                            const TournamentOptions& opts) {
  if (!(eps > 0.0)) throw DomainError("learn_mallows_tv: eps must be positive");
  const CentralEstimate c = recover_central(td, delta / 2.0, rng, opts);
  const double tol = std::min(eps / std::sqrt(static_cast<double>(td.dim())), 0.999);
  const SpreadEstimate s =
      estimate_spread(td, c.central, tol, delta / 2.0, rng, opts.max_samples, opts.rejection_budget);
  return {MallowsModel(c.central, s.phi_hat), c, s};
}

}  // namespace truncest
