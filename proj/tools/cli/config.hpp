#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace truncest::cli {

using json = nlohmann::ordered_json;

// Where each key came from, keyed by dotted path ("sgd.steps").
struct SourceMap {
  std::string file;
  std::map<std::string, int> lines;

  std::string where(const std::string& path) const;
};

struct ConfigDoc {
  json root = json::object();
  SourceMap source;
};

// The subset of TOML used by experiment configs: comments, [table] and
// [a.b] headers, bare/quoted/dotted keys, strings, integers, floats,
// booleans, (multi-line) arrays and inline tables.
ConfigDoc parse_toml(std::string_view text, const std::string& filename = "<config>");
ConfigDoc parse_json_config(std::string_view text, const std::string& filename = "<config>");
// Dispatches on the extension: .json is JSON, anything else TOML.
ConfigDoc load_config(const std::filesystem::path& path);

// Typed read access to one table. Every key read is remembered so that
// finish() can reject keys nobody asked for.
class Section {
 public:
  Section(const json* obj, std::string path, const SourceMap* source);

  bool has(const std::string& key) const;
  std::optional<double> number(const std::string& key);
  std::optional<std::int64_t> integer(const std::string& key);
  std::optional<std::uint64_t> count(const std::string& key);
  std::optional<std::string> string(const std::string& key);
  std::optional<bool> boolean(const std::string& key);
  std::optional<std::vector<double>> numbers(const std::string& key);
  std::optional<std::vector<std::int64_t>> integers(const std::string& key);
  // Nested table; the returned section shares this one's source map.
  std::optional<Section> table(const std::string& key);

  double number_or(const std::string& key, double def) { return number(key).value_or(def); }
  std::uint64_t count_or(const std::string& key, std::uint64_t def) { return count(key).value_or(def); }
  std::string string_or(const std::string& key, const std::string& def) {
    return string(key).value_or(def);
  }

  // Throws ConfigError naming the first key that was never read.
  void finish() const;

  [[noreturn]] void fail(const std::string& key, const std::string& message) const;
  const std::string& path() const { return path_; }

 private:
  const json* get(const std::string& key);
  std::string key_path(const std::string& key) const;

  const json* obj_;
  std::string path_;
  const SourceMap* source_;
  std::set<std::string> used_;
};

}  // namespace truncest::cli
