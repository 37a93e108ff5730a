#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "truncest/errors.hpp"

using namespace truncest;
using namespace truncest::cli;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = FIXTURE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("truncest_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path write(const fs::path& dir, const std::string& name, const std::string& text) {
  std::ofstream(dir / name) << text;
  return dir / name;
}

struct Result {
  int code;
  std::string out, err;
};

Result invoke(RunOptions opts) {
  std::ostringstream out, err;
  const int code = run(opts, out, err);
  return {code, out.str(), err.str()};
}

RunOptions options(const std::string& command, const fs::path& config, const fs::path& out) {
  RunOptions o;
  o.command = command;
  o.config = config;
  o.out_dir = out;
  return o;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "# schema=1");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST(Toml, ParsesSupportedSubset) {
  const auto doc = parse_toml(R"(# comment
command = "sgd"
d = 10
ratio = 2.5e-1
flag = true
neg = -3
list = [1, 2,
  3]
inline = { a = 1, b = "x" }
a.b = "dotted"

[truth]
p = [0.5, 0.25]  # trailing comment
name = "quote \" and \\ slash"

[nested.table]
k = 'literal'
)", "x.toml");
  const auto& r = doc.root;
  EXPECT_EQ(r["command"], "sgd");
  EXPECT_EQ(r["d"], 10);
  EXPECT_DOUBLE_EQ(r["ratio"].get<double>(), 0.25);
  EXPECT_EQ(r["flag"], true);
  EXPECT_EQ(r["neg"], -3);
  EXPECT_EQ(r["list"].size(), 3u);
  EXPECT_EQ(r["inline"]["b"], "x");
  EXPECT_EQ(r["a"]["b"], "dotted");
  EXPECT_EQ(r["truth"]["name"], "quote \" and \\ slash");
  EXPECT_EQ(r["nested"]["table"]["k"], "literal");
  EXPECT_EQ(doc.source.where("truth.p"), "x.toml:13");
}

TEST(Toml, RejectsMalformedInput) {
  EXPECT_THROW(parse_toml("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(parse_toml("[[runs]]\n"), ConfigError);
  EXPECT_THROW(parse_toml("a = \n"), ConfigError);
  EXPECT_THROW(parse_toml("a = [1, 2\n"), ConfigError);
  EXPECT_THROW(parse_toml("a = \"open\n"), ConfigError);
  EXPECT_THROW(parse_toml("[t]\nx = 1\n[t]\n"), ConfigError);
  try {
    parse_toml("ok = 1\nbad = @\n", "f.toml");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("f.toml:2"), std::string::npos) << e.what();
  }
}

TEST(Section, TypedAccessAndUnknownKeys) {
  const auto doc = parse_toml("[sgd]\nsteps = 5e4\neta = 0.2\nname = \"x\"\nextra = 1\n", "c.toml");
  Section root(&doc.root, "", &doc.source);
  auto sgd = *root.table("sgd");
  EXPECT_EQ(sgd.count("steps"), 50000u);
  EXPECT_DOUBLE_EQ(*sgd.number("eta"), 0.2);
  EXPECT_EQ(sgd.string("name"), "x");
  EXPECT_FALSE(sgd.number("missing").has_value());
  try {
    sgd.finish();
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("c.toml:5"), std::string::npos) << msg;
    EXPECT_NE(msg.find("sgd.extra"), std::string::npos) << msg;
  }
  EXPECT_THROW(sgd.count("eta"), ConfigError);
  EXPECT_THROW(sgd.number("name"), ConfigError);
}

TEST(Section, JsonConfigsAreAccepted) {
  const auto doc = parse_json_config(R"({"command": "oracle-dump", "d": 3})", "c.json");
  Section root(&doc.root, "", &doc.source);
  EXPECT_EQ(root.string("command"), "oracle-dump");
  EXPECT_EQ(root.count("d"), 3u);
  EXPECT_THROW(parse_json_config("{", "c.json"), ConfigError);
}

TEST(Cli, OracleDumpFourPoint) {
  const auto out = scratch("dump");
  const auto r = invoke(options("oracle-dump", kFixtures / "four_point.toml", out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(out / "oracle_dump.csv");
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"bitstring", "probability"}));
  double s = 0.0;
  for (std::size_t k = 1; k < rows.size(); ++k) s += std::stod(rows[k][1]);
  EXPECT_NEAR(s, 1.0, 1e-12);
  const auto report = json::parse(slurp(out / "oracle_dump_report.json"));
  EXPECT_NEAR(report["mass"].get<double>(), 0.5, 1e-14);
  EXPECT_FALSE(report.contains("wall_time_s"));
  EXPECT_TRUE(json::parse(slurp(out / "oracle_dump_timing.json")).contains("wall_time_s"));
}

TEST(Cli, IdentifyFromDump) {
  const auto out = scratch("identify");
  ASSERT_EQ(invoke(options("oracle-dump", kFixtures / "four_point.toml", out)).code, 0);
  const auto cfg = write(out, "id.toml", "command = \"identify\"\nd = 3\n[set]\ndescriptor = \"explicit:@" +
                                             (kFixtures / "four_point_set.txt").string() +
                                             "\"\n[identify]\nprobabilities = \"oracle_dump.csv\"\n");
  const auto r = invoke(options("identify", cfg, out));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = read_csv(out / "identify_solution.csv");
  ASSERT_EQ(rows.size(), 4u);
  const double expected[] = {0.7, 0.6, 0.5};
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(std::stod(rows[i + 1][2]), expected[i], 1e-9);
}

TEST(Cli, IdentifyFailureFamilies) {
  const auto out = scratch("identify_fail");
  write(out, "single.txt", "010\n");
  const auto cfg = write(out, "a.toml", "command = \"identify\"\nd = 3\n[truth]\np = [0.5, 0.5, 0.5]\n"
                                        "[set]\ndescriptor = \"explicit:@single.txt\"\n");
  EXPECT_EQ(invoke(options("identify", cfg, out)).code, kIdentifiability);
  const auto cfg2 = write(out, "b.toml", "command = \"identify\"\nd = 20\n[truth]\nkind = \"random\"\nseed = 1\n"
                                         "[set]\ndescriptor = \"l1_leq:2\"\n[identify]\nkappa_threshold = 1.0\n");
  EXPECT_EQ(invoke(options("identify", cfg2, out)).code, kIllConditioned);
}

TEST(Cli, SgdIsByteDeterministic) {
  const auto a = scratch("sgd_a"), b = scratch("sgd_b");
  auto oa = options("sgd", kFixtures / "d10_l1.toml", a);
  oa.seed = 7;
  auto ob = oa;
  ob.out_dir = b;
  ASSERT_EQ(invoke(oa).code, 0);
  ASSERT_EQ(invoke(ob).code, 0);
  for (const char* f : {"sgd_report.json", "sgd_trace.csv", "sgd_estimate.csv"})
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  // Metrics recomputed from the estimate CSV.
  const auto report = json::parse(slurp(a / "sgd_report.json"));
  EXPECT_EQ(report["seed"], 7);
  EXPECT_EQ(report["runs"].size(), 5u);
  const auto rows = read_csv(a / "sgd_estimate.csv");
  double l2z = 0.0, l2p = 0.0, linf = 0.0;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const double dz = std::stod(rows[k][1]) - std::stod(rows[k][3]);
    const double dp = std::stod(rows[k][2]) - std::stod(rows[k][4]);
    l2z += dz * dz;
    l2p += dp * dp;
    linf = std::max(linf, std::abs(dp));
  }
  EXPECT_NEAR(std::sqrt(l2z), report["metrics"]["l2_z"].get<double>(), 1e-12);
  EXPECT_NEAR(std::sqrt(l2p), report["metrics"]["l2_p"].get<double>(), 1e-12);
  EXPECT_NEAR(linf, report["metrics"]["linf_p"].get<double>(), 1e-12);
  const auto trace = read_csv(a / "sgd_trace.csv");
  EXPECT_EQ(trace[0], (std::vector<std::string>{"step", "nll_exact_if_available", "grad_sq", "projected",
                                                "rejections"}));
  EXPECT_EQ(trace.size(), 50001u);
}

TEST(Cli, SeedFlagOverridesConfig) {
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  auto oa = options("fat-sample", kFixtures / "d8_fat.toml", a);
  auto ob = oa;
  ob.out_dir = b;
  ob.seed = 99;
  ASSERT_EQ(invoke(oa).code, 0);
  ASSERT_EQ(invoke(ob).code, 0);
  EXPECT_NE(slurp(a / "fat_sample_report.json"), slurp(b / "fat_sample_report.json"));
  EXPECT_EQ(json::parse(slurp(a / "fat_sample_report.json"))["seed"], 3);
}

TEST(Cli, ConfigErrors) {
  const auto out = scratch("errors");
  const auto missing_set = write(out, "m.toml", "command = \"sgd\"\nd = 4\n[truth]\np = [0.5, 0.5, 0.5, 0.5]\n");
  auto r = invoke(options("sgd", missing_set, out));
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("config"), std::string::npos);
  const auto unknown = write(out, "u.toml", "command = \"oracle-dump\"\nd = 3\nbogus = 1\n[truth]\n"
                                            "p = [0.5, 0.5, 0.5]\n[set]\ndescriptor = \"l1_leq:1\"\n");
  r = invoke(options("oracle-dump", unknown, out));
  EXPECT_EQ(r.code, kConfigError);
  EXPECT_NE(r.err.find("u.toml:3"), std::string::npos) << r.err;
  const auto wrong = write(out, "w.toml", "command = \"sgd\"\nd = 3\n");
  EXPECT_EQ(invoke(options("oracle-dump", wrong, out)).code, kConfigError);
  auto dm = options("oracle-dump", kFixtures / "four_point.toml", out);
  dm.d = 4;
  EXPECT_EQ(invoke(dm).code, kConfigError);
  RunOptions bad;
  bad.command = "nonsense";
  EXPECT_EQ(invoke(bad).code, kConfigError);
}

TEST(Cli, FatnessDeficitExitCode) {
  const auto out = scratch("deficit");
  write(out, "prod.txt", "01\n0\n01\n");
  const auto cfg = write(out, "f.toml", "command = \"fat-sample\"\nd = 3\n[truth]\np = [0.5, 0.5, 0.5]\n"
                                        "[set]\ndescriptor = \"product:@prod.txt\"\n"
                                        "[fat_sample]\ntask = \"sample\"\nn = 5\nbudget = 50\n");
  EXPECT_EQ(invoke(options("fat-sample", cfg, out)).code, kFatnessDeficit);
}

TEST(Cli, SetOverrideAndFatSampleTasks) {
  const auto out = scratch("fat_tasks");
  auto o = options("fat-sample", kFixtures / "d8_fat.toml", out);
  o.set = "l1_leq:6";
  ASSERT_EQ(invoke(o).code, 0);
  const auto report = json::parse(slurp(out / "fat_sample_report.json"));
  EXPECT_EQ(report["config"]["set"]["descriptor"], "l1_leq:6");
  EXPECT_LE(report["metrics"]["exact_tv"].get<double>(), 0.1);
}

TEST(Cli, MallowsAndTestCommands) {
  const auto out = scratch("mallows");
  ASSERT_EQ(invoke(options("mallows", kFixtures / "mallows_d6.toml", out)).code, 0);
  const auto rows = read_csv(out / "mallows_runs.csv");
  EXPECT_EQ(rows.size(), 21u);
  auto t = options("test", kFixtures / "identity_d8.toml", out);
  ASSERT_EQ(invoke(t).code, 0);
  EXPECT_EQ(read_csv(out / "test_runs.csv").size(), 11u);
  t.mode = "closeness";
  ASSERT_EQ(invoke(t).code, 0);
  EXPECT_EQ(json::parse(slurp(out / "test_report.json"))["config"]["test"]["mode"], "closeness");
}

TEST(Cli, BenchKernelsAgree) {
  const auto out = scratch("bench");
  const auto cfg = write(out, "b.toml", "command = \"bench\"\nd = 12\n[bench]\nrepeats = 1\n");
  ASSERT_EQ(invoke(options("bench", cfg, out)).code, 0);
  const auto report = json::parse(slurp(out / "bench_report.json"));
  EXPECT_LE(report["tv_products"]["abs_diff"].get<double>(), 1e-12);
  EXPECT_TRUE(json::parse(slurp(out / "bench_timing.json")).contains("tv_products"));
}

TEST(Binary, ExitCodesAndThreads) {
  const auto out = scratch("binary");
  const std::string bin = TRUNC_ESTIMATE_BIN;
  auto status = [&](const std::string& args) {
    const int rc = std::system((bin + " " + args + " > /dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  EXPECT_EQ(status("oracle-dump --config " + (kFixtures / "four_point.toml").string() + " --out " + out.string()), 0);
  EXPECT_TRUE(fs::exists(out / "oracle_dump.csv"));
  EXPECT_EQ(status("--bogus-flag oracle-dump"), kConfigError);
  EXPECT_EQ(status("test --mode sideways --config " + (kFixtures / "identity_d8.toml").string()), kConfigError);
  EXPECT_EQ(status("oracle-dump --config " + (kFixtures / "four_point.toml").string() + " --d 5 --out " +
                   out.string()),
            kConfigError);
  EXPECT_EQ(status("oracle-dump --seed 4 --config " + (kFixtures / "four_point.toml").string() +
                   " --set l1_leq:1 --out " + out.string()),
            0);
  EXPECT_EQ(json::parse(slurp(out / "oracle_dump_report.json"))["support_size"], 4);
  const auto dir = out / "threads";
  EXPECT_EQ(std::system(("TRUNC_ESTIMATE_THREADS=1 " + bin + " bench --d 10 --out " + dir.string() +
                         " > /dev/null 2>&1")
                            .c_str()),
            0);
  EXPECT_EQ(json::parse(slurp(dir / "bench_timing.json"))["threads"], 1);
}
