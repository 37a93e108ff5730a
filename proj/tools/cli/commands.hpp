#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace truncest::cli {

enum ExitCode : int {
  kOk = 0,
  kOtherError = 1,
  kConfigError = 2,
  kFatnessDeficit = 3,
  kRejectionBudget = 4,
  kIdentifiability = 5,
  kIllConditioned = 6,
  kSampleBudget = 7,
};

struct RunOptions {
  std::string command;
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = ".";
  std::optional<int> d;
  std::optional<std::string> set;   // overrides [set] descriptor
  std::optional<std::string> mode;  // overrides [test] mode
};

// Runs one subcommand, writing <command>_report.json, its CSV outputs and
// <command>_timing.json into out_dir. Errors are reported on `err` and mapped
// to exit codes; nothing is thrown.
int run(const RunOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace truncest::cli
