#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>

#include "config.hpp"
#include "truncest/fat_sampler.hpp"
#include "truncest/identify.hpp"
#include "truncest/kernels.hpp"
#include "truncest/mallows.hpp"
#include "truncest/sgd.hpp"
#include "truncest/testing.hpp"

namespace truncest::cli {

namespace {

constexpr int kExactTvLimit = 12;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json vec(std::span<const double> v) { return json(std::vector<double>(v.begin(), v.end())); }

// Writes a CSV with the schema header line.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& header) : out_(path) {
    if (!out_) throw ConfigError("cannot write " + path.string());
    out_ << "# schema=1\n" << header << '\n';
  }
  template <typename... T>
  void row(const T&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << '\n';
  }

 private:
  static std::string cell(double v) { return fmt(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string cell(I v) { return std::to_string(v); }
  std::ofstream out_;
};

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Common experiment context shared by the Boolean-cube commands.
struct Context {
  const RunOptions& opts;
  ConfigDoc doc;
  Section root;
  std::uint64_t seed = 0;
  std::filesystem::path base_dir;
  json echo = json::object();
  std::vector<std::string> files;

  explicit Context(const RunOptions& o)
      : opts(o), doc(o.config ? load_config(*o.config) : ConfigDoc{}), root(&doc.root, "", &doc.source) {
    if (doc.source.file.empty()) doc.source.file = "<command line>";
    if (o.config) base_dir = o.config->parent_path();
    if (auto cmd = root.string("command"); cmd && *cmd != o.command)
      root.fail("command", "config is for '" + *cmd + "' but the subcommand is '" + o.command + "'");
    const auto cfg_seed = root.count("seed");
    seed = o.seed ? *o.seed : cfg_seed.value_or(0);
    echo["command"] = o.command;
    echo["seed"] = seed;
  }

  std::filesystem::path out(const std::string& name) {
    files.push_back(name);
    return opts.out_dir / name;
  }

  int dimension() {
    const auto cfg_d = root.integer("d");
    if (opts.d && cfg_d && *opts.d != *cfg_d)
      root.fail("d", "config has d = " + std::to_string(*cfg_d) + " but --d is " + std::to_string(*opts.d));
    const auto d = opts.d ? std::optional<std::int64_t>(*opts.d) : cfg_d;
    if (!d) root.fail("", "missing dimension: set d in the config or pass --d");
    if (*d < 1 || *d > kMaxDimension) root.fail("d", "must be in [1, " + std::to_string(kMaxDimension) + "]");
    echo["d"] = *d;
    return static_cast<int>(*d);
  }

  // [truth] p = [...] or kind = "random" with low, high and seed.
  ProductDistribution truth(int d, const std::string& key = "truth") {
    auto t = root.table(key);
    if (!t) root.fail("", "missing [" + key + "] table with the true parameters");
    return read_product(*t, d, echo[key]);
  }

  ProductDistribution read_product(Section& t, int d, json& echo_out) {
    const std::string kind = t.string_or("kind", t.has("p") ? "explicit" : "random");
    std::vector<double> p;
    if (kind == "explicit") {
      auto v = t.numbers("p");
      if (!v) t.fail("p", "missing");
      p = *v;
    } else if (kind == "random") {
      const double lo = t.number_or("low", 0.25), hi = t.number_or("high", 0.75);
      if (!(0.0 < lo && lo <= hi && hi < 1.0)) t.fail("low", "need 0 < low <= high < 1");
      const std::uint64_t s = t.count_or("seed", derive_seed(seed, 0x7275746800ull));
      Rng rng(s);
      p.resize(d);
      for (double& v : p) v = lo + (hi - lo) * uniform01(rng);
      echo_out["low"] = lo;
      echo_out["high"] = hi;
      echo_out["seed"] = s;
    } else {
      t.fail("kind", "expected \"explicit\" or \"random\"");
    }
    if (static_cast<int>(p.size()) != d)
      t.fail("p", "has " + std::to_string(p.size()) + " entries, expected d = " + std::to_string(d));
    for (double v : p)
      if (!(v > 0.0 && v < 1.0)) t.fail("p", "entries must be strictly inside (0, 1)");
    t.finish();
    echo_out["kind"] = kind;
    echo_out["p"] = p;
    return ProductDistribution(MeanParams(std::move(p)));
  }

  TruncationSet set(int d, const std::string& key = "set") {
    std::string desc;
    if (key == "set" && opts.set) {
      desc = *opts.set;
      (void)root.table(key);
    } else {
      auto s = root.table(key);
      if (!s) root.fail("", "missing truncation set: add a [" + key + "] table with descriptor = \"...\"" +
                                 (key == "set" ? " or pass --set" : ""));
      auto v = s->string("descriptor");
      if (!v) s->fail("descriptor", "missing");
      desc = *v;
      s->finish();
    }
    echo[key]["descriptor"] = desc;
    try {
      return parse_set_descriptor(desc, d, base_dir);
    } catch (const DomainError& e) {
      throw ConfigError(doc.source.where(key + ".descriptor") + ": " + e.what());
    }
  }

  void finish_root(std::initializer_list<const char*> extra = {}) {
    for (const char* k : extra) (void)root.table(k);
    (void)root.integer("repetitions");
    root.finish();
  }
};

json truth_metrics(const ProductDistribution& est, const ProductDistribution& truth) {
  json m;
  m["l2_z"] = l2_distance(est.natural().values(), truth.natural().values());
  m["l2_p"] = l2_distance(est.mean().values(), truth.mean().values());
  m["linf_p"] = linf_distance(est.mean().values(), truth.mean().values());
  if (truth.dim() <= kExactTvLimit) m["exact_tv"] = exact_tv(est, truth);
  return m;
}

FatSampleOptions fat_options(Section& s, json& echo, int d) {
  FatSampleOptions o;
  const std::string mode = s.string_or("sampler_mode", "per_coordinate");
  if (mode == "literal")
    o.mode = FatSampleMode::literal;
  else if (mode != "per_coordinate")
    s.fail("sampler_mode", "expected \"per_coordinate\" or \"literal\"");
  o.alpha_hat = s.number("alpha_hat");
  o.budget = s.count_or("budget", 0);
  o.rejection_budget = s.count_or("rejection_budget", default_rejection_budget());
  echo["sampler_mode"] = mode;
  echo["budget"] = o.resolved_budget(d);
  echo["rejection_budget"] = o.rejection_budget;
  if (o.alpha_hat) echo["alpha_hat"] = *o.alpha_hat;
  return o;
}

std::optional<Section> sub(Context& ctx, const char* name) { return ctx.root.table(name); }

Section empty_section(Context& ctx, const char* name) {
  static const json empty = json::object();
  return Section(&empty, name, &ctx.doc.source);
}

json cmd_fat_sample(Context& ctx) {
  const int d = ctx.dimension();
  const auto truth = ctx.truth(d);
  auto set = ctx.set(d);
  TruncatedDistribution td(truth, set);
  auto sec = sub(ctx, "fat_sample").value_or(empty_section(ctx, "fat_sample"));
  json& echo = ctx.echo["fat_sample"];
  const std::string task = sec.string_or("task", "sample");
  echo["task"] = task;
  FatSampleOptions fo = fat_options(sec, echo, d);
  Rng rng(ctx.seed);
  json report;

  if (task == "sample") {
    const std::uint64_t n = sec.count_or("n", 10000);
    echo["n"] = n;
    sec.finish();
    ctx.finish_root({"fat_sample"});
    CsvWriter csv(ctx.out("fat_sample_samples.csv"), "index,bitstring,samples_consumed,oracle_queries");
    std::vector<std::uint64_t> ones(d, 0);
    std::vector<std::uint64_t> counts;
    if (d <= kExactTvLimit) counts.assign(1ull << d, 0);
    std::uint64_t consumed = 0, queries = 0;
    for (std::uint64_t k = 0; k < n; ++k) {
      const FatSample s = fat_sample(td, rng, fo);
      consumed += s.state.samples_consumed;
      queries += s.state.oracle_queries;
      for (int i = 0; i < d; ++i) ones[i] += s.x[i];
      if (!counts.empty()) ++counts[s.x.word()];
      csv.row(k, s.x.to_string(), s.state.samples_consumed, s.state.oracle_queries);
    }
    std::vector<double> marg(d);
    for (int i = 0; i < d; ++i) marg[i] = static_cast<double>(ones[i]) / static_cast<double>(n);
    report["estimate"]["marginals"] = marg;
    report["metrics"]["linf_marginals"] = linf_distance(marg, truth.mean().values());
    report["metrics"]["mean_samples_per_output"] = static_cast<double>(consumed) / static_cast<double>(n);
    if (!counts.empty()) report["metrics"]["exact_tv_empirical"] = kernels::tv_counts(truth, counts, n);
    report["samples_consumed"] = consumed;
    report["oracle_queries"] = queries;
  } else if (task == "estimate_parameter") {
    const auto coord = sec.integer("coordinate");
    if (!coord || *coord < 1 || *coord > d) sec.fail("coordinate", "need a 1-based coordinate in [1, d]");
    const double eps = sec.number_or("eps", 0.05), delta = sec.number_or("delta", 0.05);
    echo["coordinate"] = *coord;
    echo["eps"] = eps;
    echo["delta"] = delta;
    sec.finish();
    ctx.finish_root({"fat_sample"});
    const auto est = estimate_parameter(td, static_cast<int>(*coord - 1), eps, delta, rng, fo);
    report["estimate"]["p_hat"] = est.p_hat;
    report["metrics"]["abs_error"] = std::abs(est.p_hat - truth.mean()[static_cast<int>(*coord - 1)]);
    report["coordinate_samples"] = est.n;
    report["samples_consumed"] = est.samples_consumed;
    report["oracle_queries"] = est.oracle_queries;
  } else if (task == "learn_tv" || task == "learn_sparse") {
    const double eps = sec.number_or("eps", 0.1), delta = sec.number_or("delta", 0.1);
    echo["eps"] = eps;
    echo["delta"] = delta;
    LearnReport rep;
    if (task == "learn_tv") {
      const double C = sec.number_or("C", 4.0);
      echo["C"] = C;
      sec.finish();
      ctx.finish_root({"fat_sample"});
      rep = learn_tv(td, eps, delta, rng, C, fo);
    } else {
      const auto k = sec.integer("k");
      if (!k) sec.fail("k", "missing sparsity k");
      const double c = sec.number_or("c", 0.5);
      echo["k"] = *k;
      echo["c"] = c;
      sec.finish();
      ctx.finish_root({"fat_sample"});
      rep = learn_sparse(td, static_cast<int>(*k), c, eps, delta, rng, fo);
      std::vector<int> one_based;
      for (int i : rep.support) one_based.push_back(i + 1);
      report["estimate"]["support"] = one_based;
    }
    CsvWriter csv(ctx.out("fat_sample_estimate.csv"), "coordinate,p_hat,p_true");
    for (int i = 0; i < d; ++i) csv.row(i + 1, rep.estimate.mean()[i], truth.mean()[i]);
    report["estimate"]["p"] = vec(rep.estimate.mean().values());
    report["metrics"] = truth_metrics(rep.estimate, truth);
    report["reconstructed_samples"] = rep.outputs;
    report["samples_consumed"] = rep.samples_consumed;
    report["oracle_queries"] = rep.oracle_queries;
  } else {
    sec.fail("task", "expected sample, estimate_parameter, learn_tv or learn_sparse");
  }
  return report;
}

json cmd_sgd(Context& ctx) {
  const int d = ctx.dimension();
  const auto truth = ctx.truth(d);
  auto set = ctx.set(d);
  TruncatedDistribution td(truth, set);
  auto sec = sub(ctx, "sgd").value_or(empty_section(ctx, "sgd"));
  json& echo = ctx.echo["sgd"];
  SgdConfig cfg;
  cfg.steps = sec.count_or("steps", cfg.steps);
  cfg.eta = sec.number("eta");
  cfg.default_eta = sec.number_or("default_eta", cfg.default_eta);
  cfg.ball_radius_scale = sec.number_or("ball_radius_scale", cfg.ball_radius_scale);
  cfg.min_ball_radius = sec.number_or("min_ball_radius", cfg.min_ball_radius);
  cfg.init_samples = sec.count_or("init_samples", cfg.init_samples);
  cfg.mass_samples = sec.count_or("mass_samples", cfg.mass_samples);
  cfg.alpha_hat = sec.number("alpha_hat");
  if (auto rb = sec.count("rejection_budget")) cfg.rejection_budget = *rb;
  cfg.trace_nll_every = sec.count_or("trace_nll_every", d <= kExactTvLimit ? 1000 : 0);
  const auto delta = sec.number("delta");
  sec.finish();
  const auto reps = ctx.root.integer("repetitions");
  ctx.finish_root({"sgd"});
  if (reps && delta) ctx.root.fail("repetitions", "give either repetitions or sgd.delta, not both");
  int N = 1;
  if (reps) {
    if (*reps < 1) ctx.root.fail("repetitions", "must be >= 1");
    N = static_cast<int>(*reps);
  } else if (delta) {
    N = amplification_count(*delta);
  }
  cfg.repetitions = N;
  cfg.seed = ctx.seed;
  try {
    cfg.validate();
  } catch (const DomainError& e) {
    throw ConfigError(ctx.doc.source.where("sgd") + ": " + e.what());
  }
  echo["steps"] = cfg.steps;
  if (cfg.eta) echo["eta"] = *cfg.eta; else echo["eta"] = "min Hessian eigenvalue at init";
  echo["default_eta"] = cfg.default_eta;
  echo["ball_radius_scale"] = cfg.ball_radius_scale;
  echo["min_ball_radius"] = cfg.min_ball_radius;
  echo["init_samples"] = cfg.init_samples;
  echo["mass_samples"] = cfg.mass_samples;
  if (cfg.alpha_hat) echo["alpha_hat"] = *cfg.alpha_hat;
  if (cfg.rejection_budget) echo["rejection_budget"] = *cfg.rejection_budget;
  echo["trace_nll_every"] = cfg.trace_nll_every;
  echo["repetitions"] = N;
  if (delta) echo["delta"] = *delta;

  const AmplifiedResult amp = amplified_runs(td, cfg, N);
  const SgdResult& best = amp.runs[amp.selected];
  const ProductDistribution est(amp.estimate);

  {
    CsvWriter csv(ctx.out("sgd_trace.csv"), "step,nll_exact_if_available,grad_sq,projected,rejections");
    for (const auto& s : best.trace)
      csv.row(s.step, std::isnan(s.nll) ? std::string() : fmt(s.nll), s.grad_sq, s.projected ? 1 : 0,
              s.rejections);
  }
  {
    CsvWriter csv(ctx.out("sgd_estimate.csv"), "coordinate,z_bar,p_bar,z_true,p_true");
    for (int i = 0; i < d; ++i)
      csv.row(i + 1, est.natural()[i], est.mean()[i], truth.natural()[i], truth.mean()[i]);
  }

  json report;
  report["estimate"]["z"] = vec(est.natural().values());
  report["estimate"]["p"] = vec(est.mean().values());
  report["metrics"] = truth_metrics(est, truth);
  report["selected_run"] = amp.selected;
  json runs = json::array();
  std::uint64_t samples = 0, queries = 0, rejections = 0;
  for (const auto& r : amp.runs) {
    json j;
    j["z_bar"] = vec(r.estimate.values());
    j["l2_z"] = l2_distance(r.estimate.values(), truth.natural().values());
    j["eta"] = r.eta;
    j["alpha_hat"] = r.alpha_hat;
    j["ball_center"] = r.ball.center;
    j["ball_radius"] = r.ball.radius;
    j["truth_in_ball"] = r.ball.contains(truth.natural().values());
    j["rejection_budget"] = r.rejection_budget;
    j["truncated_samples"] = r.truncated_samples;
    j["oracle_queries"] = r.oracle_queries;
    j["rejections"] = r.rejections;
    samples += r.truncated_samples;
    queries += r.oracle_queries;
    rejections += r.rejections;
    runs.push_back(std::move(j));
  }
  report["runs"] = std::move(runs);
  report["samples_consumed"] = samples;
  report["oracle_queries"] = queries;
  report["rejections"] = rejections;
  return report;
}

json cmd_identify(Context& ctx) {
  const int d = ctx.dimension();
  auto set = ctx.set(d);
  auto sec = sub(ctx, "identify").value_or(empty_section(ctx, "identify"));
  json& echo = ctx.echo["identify"];
  const auto file = sec.string("probabilities");
  const auto anchor_s = sec.string("anchor");
  const double kappa = sec.number_or("kappa_threshold", kIllConditionedThreshold);
  sec.finish();
  std::optional<ProductDistribution> truth;
  if (ctx.root.has("truth")) truth = ctx.truth(d);
  ctx.finish_root({"identify"});
  echo["kappa_threshold"] = kappa;

  Pmf probs;
  if (file) {
    std::filesystem::path p = *file;
    if (p.is_relative() && !ctx.base_dir.empty()) p = ctx.base_dir / p;
    probs = read_probability_csv(p, d);
    echo["probabilities"] = *file;
  } else {
    if (!truth) ctx.root.fail("", "identify needs [truth] for the exact pmf or identify.probabilities = \"file.csv\"");
    probs = exact_truncated_pmf(TruncatedDistribution(*truth, set));
    echo["probabilities"] = "exact";
  }
  std::optional<BitVector> anchor;
  if (anchor_s) {
    try {
      anchor = BitVector::parse(*anchor_s);
      require_same_dim(d, anchor->dim());
    } catch (const Error& e) {
      sec.fail("anchor", e.what());
    }
    echo["anchor"] = *anchor_s;
  }

  const auto sys = build_system(set, probs, anchor);
  json report;
  report["system"]["anchor"] = sys.anchor.to_string();
  json basis = json::array();
  for (const auto& b : sys.basis) basis.push_back(b.to_string());
  report["system"]["basis"] = basis;
  report["system"]["rhs"] = sys.rhs;
  report["system"]["condition_number"] = sys.condition_number;
  const auto z = solve_system(sys, kappa);
  const ProductDistribution est(z);
  CsvWriter csv(ctx.out("identify_solution.csv"), "coordinate,z,p");
  for (int i = 0; i < d; ++i) csv.row(i + 1, est.natural()[i], est.mean()[i]);
  report["estimate"]["z"] = vec(est.natural().values());
  report["estimate"]["p"] = vec(est.mean().values());
  if (truth) report["metrics"] = truth_metrics(est, *truth);
  return report;
}

json cmd_oracle_dump(Context& ctx) {
  const int d = ctx.dimension();
  const auto truth = ctx.truth(d);
  auto set = ctx.set(d);
  ctx.finish_root();
  TruncatedDistribution td(truth, set);
  const Pmf pmf = exact_truncated_pmf(td);
  write_probability_csv(ctx.out("oracle_dump.csv"), pmf);
  double total = 0.0;
  for (const auto& pm : pmf) total += pm.prob;
  json report;
  report["support_size"] = pmf.size();
  report["mass"] = exact_mass(truth, set);
  report["pmf_sum"] = total;
  report["exact_fatness"] = exact_fatness(td);
  report["truncated_mean"] =
      kernels::truncated_moments(kernels::members(set), truth.natural().values(), false).mean;
  return report;
}

json cmd_test(Context& ctx) {
  const int d = ctx.dimension();
  const auto truth = ctx.truth(d);
  auto set = ctx.set(d);
  auto sec = sub(ctx, "test").value_or(empty_section(ctx, "test"));
  json& echo = ctx.echo["test"];
  std::string mode = ctx.opts.mode ? *ctx.opts.mode : sec.string_or("mode", "identity");
  (void)sec.string("mode");
  if (mode != "identity" && mode != "closeness") sec.fail("mode", "expected identity or closeness");
  const double eps = sec.number_or("eps", 0.1);
  FatSampleOptions fo = fat_options(sec, echo, d);
  std::optional<ProductDistribution> other;
  if (auto t = sec.table("other")) other = ctx.read_product(*t, d, echo["other"]);
  std::optional<TruncationSet> other_set;
  if (auto s = sec.string("other_set")) {
    other_set = parse_set_descriptor(*s, d, ctx.base_dir);
    echo["other_set"] = *s;
  }
  sec.finish();
  const auto reps = ctx.root.integer("repetitions").value_or(1);
  ctx.finish_root({"test"});
  if (reps < 1) ctx.root.fail("repetitions", "must be >= 1");
  echo["mode"] = mode;
  echo["eps"] = eps;
  echo["repetitions"] = reps;

  const ProductDistribution second = other.value_or(truth);
  TruncatedDistribution td1(truth, set);
  TruncatedDistribution td2(second, other_set.value_or(set));
  const BaselineTester tester;
  CsvWriter csv(ctx.out("test_runs.csv"), "repetition,verdict,tester_samples,truncated_samples");
  std::uint64_t far = 0, truncated = 0;
  for (std::int64_t r = 0; r < reps; ++r) {
    Rng rng = make_stream(ctx.seed, static_cast<std::uint64_t>(r));
    const TestOutcome o = mode == "identity" ? identity_test(second, td1, eps, tester, rng, fo)
                                             : closeness_test(td1, td2, eps, tester, rng, fo);
    far += o.verdict == Verdict::far;
    truncated += o.truncated_samples;
    csv.row(r, to_string(o.verdict), o.tester_samples, o.truncated_samples);
  }
  json report;
  report["tester"] = tester.name();
  report["tester_samples_per_side"] = tester.sample_complexity(d, eps);
  report["verdicts"]["FAR"] = far;
  report["verdicts"]["SAME"] = static_cast<std::uint64_t>(reps) - far;
  report["verdict"] = far * 2 > static_cast<std::uint64_t>(reps) ? "FAR" : "SAME";
  if (d <= kExactTvLimit) report["metrics"]["exact_tv_between_sources"] = exact_tv(truth, second);
  report["samples_consumed"] = truncated;
  return report;
}

json cmd_mallows(Context& ctx) {
  auto sec = sub(ctx, "mallows");
  if (!sec) ctx.root.fail("", "missing [mallows] table");
  json& echo = ctx.echo["mallows"];
  const auto central_v = sec->integers("central");
  if (!central_v) sec->fail("central", "missing central ranking (1-based item order)");
  std::string central_s;
  for (auto v : *central_v) central_s += (central_s.empty() ? "" : " ") + std::to_string(v);
  Ranking central;
  try {
    central = Ranking::parse(central_s);
  } catch (const DomainError& e) {
    sec->fail("central", e.what());
  }
  const int d = central.dim();
  if (ctx.opts.d && *ctx.opts.d != d)
    sec->fail("central", "has " + std::to_string(d) + " items but --d is " + std::to_string(*ctx.opts.d));
  if (auto cd = ctx.root.integer("d"); cd && *cd != d)
    ctx.root.fail("d", "does not match the number of items in mallows.central");
  if (d > 8) sec->fail("central", "exact Mallows diagnostics support at most 8 items");
  const auto phi = sec->number("phi");
  if (!phi || !(*phi >= 0.0 && *phi < 1.0)) sec->fail("phi", "need a spread in [0, 1)");
  const std::string set_desc = sec->string_or("set", "all");
  const std::string task = sec->string_or("task", "learn_tv");
  TournamentOptions to;
  to.gamma = sec->number_or("gamma", std::max(1.0 - *phi, 0.05));
  to.C = sec->number_or("C", to.C);
  to.max_restarts = static_cast<int>(sec->count_or("max_restarts", to.max_restarts));
  to.max_samples = sec->count_or("max_samples", to.max_samples);
  to.rejection_budget = sec->count_or("rejection_budget", to.rejection_budget);
  const double eps = sec->number_or("eps", 0.15), delta = sec->number_or("delta", 0.05);
  sec->finish();
  const auto reps = ctx.root.integer("repetitions").value_or(1);
  ctx.finish_root({"mallows"});
  if (reps < 1) ctx.root.fail("repetitions", "must be >= 1");
  if (task != "learn_tv" && task != "central" && task != "spread")
    ctx.root.fail("mallows", "task must be learn_tv, central or spread");

  RankingSet rset = [&] {
    try {
      return parse_ranking_set(set_desc, central, ctx.base_dir);
    } catch (const DomainError& e) {
      throw ConfigError(ctx.doc.source.where("mallows.set") + ": " + e.what());
    }
  }();
  echo["central"] = central.to_string();
  echo["phi"] = *phi;
  echo["set"] = set_desc;
  echo["task"] = task;
  echo["gamma"] = to.gamma;
  echo["C"] = to.C;
  echo["max_restarts"] = to.max_restarts;
  echo["max_samples"] = to.max_samples;
  echo["rejection_budget"] = to.rejection_budget;
  echo["eps"] = eps;
  echo["delta"] = delta;
  echo["repetitions"] = reps;
  ctx.echo["d"] = d;

  TruncatedMallows td(MallowsModel(central, *phi), rset);
  CsvWriter csv(ctx.out("mallows_runs.csv"),
                "repetition,central_hat,central_correct,phi_hat,restarts,samples,exact_tv");
  std::uint64_t correct = 0, samples = 0;
  json runs = json::array();
  for (std::int64_t r = 0; r < reps; ++r) {
    Rng rng = make_stream(ctx.seed, static_cast<std::uint64_t>(r));
    Ranking c_hat = central;
    double phi_hat = std::nan("");
    int restarts = 0;
    std::uint64_t used = 0;
    if (task == "central") {
      const auto c = recover_central(td, delta, rng, to);
      c_hat = c.central;
      restarts = c.restarts;
      used = c.samples;
    } else if (task == "spread") {
      const auto s = estimate_spread(td, central, eps, delta, rng, to.max_samples, to.rejection_budget);
      phi_hat = s.phi_hat;
      used = s.samples;
    } else {
      const auto f = learn_mallows_tv(td, eps, delta, rng, to);
      c_hat = f.model.central();
      phi_hat = f.model.phi();
      restarts = f.central.restarts;
      used = f.central.samples + f.spread.samples;
    }
    const double tv = std::isnan(phi_hat) ? std::nan("") : exact_tv(td.model, MallowsModel(c_hat, phi_hat));
    correct += c_hat == central;
    samples += used;
    csv.row(r, c_hat.to_string(), c_hat == central ? 1 : 0, std::isnan(phi_hat) ? std::string() : fmt(phi_hat),
            restarts, used, std::isnan(tv) ? std::string() : fmt(tv));
    json j;
    j["central_hat"] = c_hat.to_string();
    if (!std::isnan(phi_hat)) j["phi_hat"] = phi_hat;
    if (!std::isnan(tv)) j["exact_tv"] = tv;
    j["restarts"] = restarts;
    j["samples"] = used;
    runs.push_back(std::move(j));
  }
  json report;
  report["runs"] = std::move(runs);
  report["metrics"]["central_correct"] = correct;
  report["samples_consumed"] = samples;
  report["oracle_queries"] = td.set.queries();
  return report;
}

json cmd_bench(Context& ctx, json& timing) {
  auto sec = sub(ctx, "bench").value_or(empty_section(ctx, "bench"));
  const auto root_d = ctx.root.integer("d");
  const int d = ctx.opts.d ? *ctx.opts.d : static_cast<int>(root_d.value_or(16));
  const auto repeats = std::max<std::uint64_t>(sec.count_or("repeats", 5), 1);
  sec.finish();
  ctx.finish_root({"bench"});
  ctx.echo["d"] = d;
  ctx.echo["bench"]["repeats"] = repeats;
  require_enumerable(d);
  Rng rng(ctx.seed);
  std::vector<double> p(d), q(d);
  for (int i = 0; i < d; ++i) {
    p[i] = 0.2 + 0.6 * uniform01(rng);
    q[i] = 0.2 + 0.6 * uniform01(rng);
  }
  const ProductDistribution P{MeanParams(p)}, Q{MeanParams(q)};
  const auto set = sets::l1_leq(d, d / 2);
  const auto pts = kernels::serial::members(set);

  auto time_it = [&](auto&& fn) {
    double best = 1e300;
    for (std::uint64_t k = 0; k < repeats; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      fn();
      best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    return best;
  };
  double tv_s = 0, tv_o = 0, lp_s = 0, lp_o = 0;
  timing["tv_products"]["serial_s"] = time_it([&] { tv_s = kernels::serial::tv_products(P, Q); });
  timing["tv_products"]["omp_s"] = time_it([&] { tv_o = kernels::omp::tv_products(P, Q); });
  timing["truncated_moments"]["serial_s"] =
      time_it([&] { lp_s = kernels::serial::truncated_moments(pts, P.natural().values(), true).log_partition; });
  timing["truncated_moments"]["omp_s"] =
      time_it([&] { lp_o = kernels::omp::truncated_moments(pts, P.natural().values(), true).log_partition; });
  timing["threads"] = kernels::max_threads();
  json report;
  report["tv_products"] = {{"serial", tv_s}, {"omp", tv_o}, {"abs_diff", std::abs(tv_s - tv_o)}};
  report["log_partition"] = {{"serial", lp_s}, {"omp", lp_o}, {"abs_diff", std::abs(lp_s - lp_o)}};
  return report;
}

int classify(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kConfigError;
  if (dynamic_cast<const FatnessDeficitError*>(&e)) return kFatnessDeficit;
  if (dynamic_cast<const RejectionBudgetError*>(&e)) return kRejectionBudget;
  if (dynamic_cast<const IdentifiabilityError*>(&e) || dynamic_cast<const NormalizationError*>(&e))
    return kIdentifiability;
  if (dynamic_cast<const IllConditionedError*>(&e)) return kIllConditioned;
  if (dynamic_cast<const SampleBudgetError*>(&e) || dynamic_cast<const NumericError*>(&e))
    return kSampleBudget;
  return kOtherError;
}

const char* family(int code) {
  switch (code) {
    case kConfigError: return "config";
    case kFatnessDeficit: return "fatness-deficit";
    case kRejectionBudget: return "rejection-budget";
    case kIdentifiability: return "identifiability-failure";
    case kIllConditioned: return "ill-conditioned";
    case kSampleBudget: return "sample-budget";
    default: return "error";
  }
}

}  // namespace

int run(const RunOptions& opts, std::ostream& out, std::ostream& err) {
  static const std::map<std::string, int> known = {
      {"fat-sample", 0}, {"sgd", 0}, {"identify", 0}, {"mallows", 0},
      {"test", 0},       {"oracle-dump", 0}, {"bench", 0}};
  try {
    if (!known.count(opts.command)) throw ConfigError("unknown command '" + opts.command + "'");
    std::filesystem::create_directories(opts.out_dir);
    Context ctx(opts);
    const auto t0 = std::chrono::steady_clock::now();
    json timing = json::object();
    json body;
    if (opts.command == "fat-sample") body = cmd_fat_sample(ctx);
    else if (opts.command == "sgd") body = cmd_sgd(ctx);
    else if (opts.command == "identify") body = cmd_identify(ctx);
    else if (opts.command == "mallows") body = cmd_mallows(ctx);
    else if (opts.command == "test") body = cmd_test(ctx);
    else if (opts.command == "oracle-dump") body = cmd_oracle_dump(ctx);
    else body = cmd_bench(ctx, timing);
    timing["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const std::string stem = opts.command == "oracle-dump" ? "oracle_dump" :
                             opts.command == "fat-sample" ? "fat_sample" : opts.command;
    json report;
    report["schema"] = 1;
    report["command"] = opts.command;
    report["seed"] = ctx.seed;
    report["config"] = ctx.echo;
    for (auto& [k, v] : body.items()) report[k] = v;
    report["outputs"] = ctx.files;
    write_json(opts.out_dir / (stem + "_report.json"), report);
    write_json(opts.out_dir / (stem + "_timing.json"), timing);
    out << (opts.out_dir / (stem + "_report.json")).string() << '\n';
    return kOk;
  } catch (const std::exception& e) {
    const int code = classify(e);
    err << "trunc-estimate: " << family(code) << " error: " << e.what() << '\n';
    return code;
  }
}

}  // namespace truncest::cli
