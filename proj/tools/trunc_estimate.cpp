#include <iostream>

#include <CLI11.hpp>

#include "cli/commands.hpp"
#include "truncest/kernels.hpp"

int main(int argc, char** argv) {
  using truncest::cli::RunOptions;
  CLI::App app{"Estimation from truncated samples of Boolean product and Mallows distributions"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  RunOptions opts;
  std::string config, out_dir = ".";
  std::uint64_t seed = 0;
  int d = 0;
  std::string set, mode;
  app.add_option("--config", config, "TOML or JSON experiment config")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "master random seed");
  app.add_option("--out", out_dir, "output directory")->capture_default_str();
  auto* d_opt = app.add_option("--d", d, "dimension");
  auto* set_opt = app.add_option("--set", set, "truncation set descriptor, overrides [set]");

  const char* commands[][2] = {
      {"fat-sample", "reconstruct untruncated samples, estimate or learn through the fat sampler"},
      {"sgd", "projected SGD on the truncated likelihood"},
      {"identify", "solve the identifiability system from exact or empirical probabilities"},
      {"mallows", "central ranking and spread from truncated Mallows samples"},
      {"test", "identity or closeness testing through the fat sampler"},
      {"oracle-dump", "exact truncated pmf by enumeration"},
      {"bench", "time the serial and OpenMP enumeration kernels"}};
  for (auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    if (std::string(name) == "test")
      sub->add_option("--mode", mode, "identity or closeness")->check(CLI::IsMember({"identity", "closeness"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : truncest::cli::kConfigError;
  }

  truncest::kernels::configure_threads();
  opts.command = app.get_subcommands().front()->get_name();
  if (!config.empty()) opts.config = config;
  if (*seed_opt) opts.seed = seed;
  if (*d_opt) opts.d = d;
  if (*set_opt) opts.set = set;
  if (!mode.empty()) opts.mode = mode;
  opts.out_dir = out_dir;
  return truncest::cli::run(opts, std::cout, std::cerr);
}
