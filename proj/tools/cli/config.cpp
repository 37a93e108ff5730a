#include "config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "truncest/errors.hpp"

namespace truncest::cli {

std::string SourceMap::where(const std::string& path) const {
  auto it = lines.find(path);
  if (it != lines.end()) return file + ":" + std::to_string(it->second);
  return file;
}

namespace {

class TomlParser {
 public:
  TomlParser(std::string_view text, const std::string& file) : s_(text) { doc_.source.file = file; }

  ConfigDoc parse() {
    std::vector<std::string> table;
    while (true) {
      skip_ws_comments_newlines();
      if (eof()) break;
      if (peek() == '[') {
        if (peek(1) == '[') fail("arrays of tables ([[...]]) are not supported");
        ++i_;
        skip_inline_ws();
        table = parse_key_path();
        skip_inline_ws();
        expect(']');
        json* t = descend(doc_.root, table, true);
        const std::string p = join(table);
        if (defined_tables_.count(p)) fail("table [" + p + "] defined twice");
        defined_tables_.insert(p);
        doc_.source.lines.emplace(p, line_);
        (void)t;
      } else {
        parse_keyval(doc_.root, table);
      }
      end_of_line();
    }
    return std::move(doc_);
  }

 private:
  bool eof() const { return i_ >= s_.size(); }
  char peek(std::size_t k = 0) const { return i_ + k < s_.size() ? s_[i_ + k] : '\0'; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(doc_.source.file + ":" + std::to_string(line_) + ": " + msg);
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++i_;
  }

  void skip_inline_ws() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++i_;
  }

  void skip_comment() {
    if (peek() == '#')
      while (!eof() && peek() != '\n') ++i_;
  }

  void newline() {
    if (peek() == '\r') ++i_;
    if (peek() == '\n') {
      ++i_;
      ++line_;
    }
  }

  void skip_ws_comments_newlines() {
    while (!eof()) {
      skip_inline_ws();
      skip_comment();
      if (peek() == '\n' || peek() == '\r')
        newline();
      else
        break;
    }
  }

  void end_of_line() {
    skip_inline_ws();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n' && peek() != '\r') fail("unexpected text after value");
    newline();
  }

  static bool bare_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
  }

  std::string parse_simple_key() {
    if (peek() == '"' || peek() == '\'') return parse_string();
    const std::size_t b = i_;
    while (!eof() && bare_char(peek())) ++i_;
    if (i_ == b) fail("expected a key");
    return std::string(s_.substr(b, i_ - b));
  }

  std::vector<std::string> parse_key_path() {
    std::vector<std::string> out{parse_simple_key()};
    skip_inline_ws();
    while (peek() == '.') {
      ++i_;
      skip_inline_ws();
      out.push_back(parse_simple_key());
      skip_inline_ws();
    }
    return out;
  }

  static std::string join(const std::vector<std::string>& parts) {
    std::string s;
    for (const auto& p : parts) s += (s.empty() ? "" : ".") + p;
    return s;
  }

  json* descend(json& root, const std::vector<std::string>& path, bool create) {
    json* cur = &root;
    for (const auto& k : path) {
      if (!cur->contains(k)) {
        if (!create) return nullptr;
        (*cur)[k] = json::object();
      }
      cur = &(*cur)[k];
      if (!cur->is_object()) fail("'" + k + "' is already a value, not a table");
    }
    return cur;
  }

  void parse_keyval(json& root, const std::vector<std::string>& table) {
    const int key_line = line_;
    std::vector<std::string> key = parse_key_path();
    skip_inline_ws();
    expect('=');
    skip_inline_ws();
    json value = parse_value();
    std::vector<std::string> parent = table;
    parent.insert(parent.end(), key.begin(), key.end() - 1);
    json* t = descend(root, parent, true);
    if (t->contains(key.back())) fail("duplicate key '" + key.back() + "'");
    (*t)[key.back()] = std::move(value);
    std::vector<std::string> full = parent;
    full.push_back(key.back());
    doc_.source.lines.emplace(join(full), key_line);
  }

  std::string parse_string() {
    const char q = peek();
    ++i_;
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      char c = peek();
      ++i_;
      if (c == q) break;
      if (c == '\\' && q == '"') {
        const char e = peek();
        ++i_;
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          case 'r': out += '\r'; break;
          case '\\': out += '\\'; break;
          case '"': out += '"'; break;
          default: fail(std::string("unsupported escape \\") + e);
        }
        continue;
      }
      out += c;
    }
    return out;
  }

  json parse_value() {
    const char c = peek();
    if (c == '"' || c == '\'') return parse_string();
    if (c == '[') return parse_array();
    if (c == '{') return parse_inline_table();
    const std::size_t b = i_;
    while (!eof() && (bare_char(peek()) || peek() == '.' || peek() == '+')) ++i_;
    std::string tok(s_.substr(b, i_ - b));
    if (tok.empty()) fail("expected a value");
    if (tok == "true") return true;
    if (tok == "false") return false;
    std::string clean;
    for (char ch : tok)
      if (ch != '_') clean += ch;
    const bool is_float = clean.find_first_of(".eE") != std::string::npos || clean.find("inf") != std::string::npos ||
                          clean.find("nan") != std::string::npos;
    if (!is_float) {
      std::int64_t v = 0;
      const char* first = clean.data() + (clean[0] == '+' ? 1 : 0);
      auto [ptr, ec] = std::from_chars(first, clean.data() + clean.size(), v);
      if (ec == std::errc() && ptr == clean.data() + clean.size()) return v;
      fail("'" + tok + "' is not a valid value");
    }
    try {
      std::size_t pos = 0;
      double v = std::stod(clean, &pos);
      if (pos != clean.size()) throw std::invalid_argument(clean);
      return v;
    } catch (const std::exception&) {
      fail("'" + tok + "' is not a valid number");
    }
  }

  json parse_array() {
    expect('[');
    json arr = json::array();
    while (true) {
      skip_ws_comments_newlines();
      if (peek() == ']') {
        ++i_;
        return arr;
      }
      arr.push_back(parse_value());
      skip_ws_comments_newlines();
      if (peek() == ',') {
        ++i_;
        continue;
      }
      if (peek() == ']') {
        ++i_;
        return arr;
      }
      fail("expected ',' or ']' in array");
    }
  }

  json parse_inline_table() {
    expect('{');
    json t = json::object();
    skip_inline_ws();
    if (peek() == '}') {
      ++i_;
      return t;
    }
    while (true) {
      skip_inline_ws();
      std::vector<std::string> key = parse_key_path();
      skip_inline_ws();
      expect('=');
      skip_inline_ws();
      json v = parse_value();
      json* parent = descend(t, std::vector<std::string>(key.begin(), key.end() - 1), true);
      if (parent->contains(key.back())) fail("duplicate key '" + key.back() + "'");
      (*parent)[key.back()] = std::move(v);
      skip_inline_ws();
      if (peek() == ',') {
        ++i_;
        continue;
      }
      expect('}');
      return t;
    }
  }

  std::string_view s_;
  std::size_t i_ = 0;
  int line_ = 1;
  ConfigDoc doc_;
  std::set<std::string> defined_tables_;
};

}  // namespace

ConfigDoc parse_toml(std::string_view text, const std::string& filename) {
  return TomlParser(text, filename).parse();
}

ConfigDoc parse_json_config(std::string_view text, const std::string& filename) {
  ConfigDoc doc;
  doc.source.file = filename;
  try {
    doc.root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(filename + ": " + e.what());
  }
  if (!doc.root.is_object()) throw ConfigError(filename + ": top level must be an object");
  return doc;
}

ConfigDoc load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  if (path.extension() == ".json") return parse_json_config(text, path.string());
  return parse_toml(text, path.string());
}

Section::Section(const json* obj, std::string path, const SourceMap* source)
    : obj_(obj), path_(std::move(path)), source_(source) {}

std::string Section::key_path(const std::string& key) const {
  return path_.empty() ? key : path_ + "." + key;
}

void Section::fail(const std::string& key, const std::string& message) const {
  const std::string p = key.empty() ? path_ : key_path(key);
  throw ConfigError(source_->where(p) + ": " + (p.empty() ? "" : "'" + p + "': ") + message);
}

bool Section::has(const std::string& key) const { return obj_ && obj_->contains(key); }

const json* Section::get(const std::string& key) {
  used_.insert(key);
  if (!has(key)) return nullptr;
  return &obj_->at(key);
}

std::optional<double> Section::number(const std::string& key) {
  const json* v = get(key);
  if (!v) return std::nullopt;
  if (!v->is_number()) fail(key, "expected a number");
  const double d = v->get<double>();
  if (!std::isfinite(d)) fail(key, "must be finite");
  return d;
}

std::optional<std::int64_t> Section::integer(const std::string& key) {
  const json* v = get(key);
  if (!v) return std::nullopt;
  if (!v->is_number_integer()) fail(key, "expected an integer");
  return v->get<std::int64_t>();
}

std::optional<std::uint64_t> Section::count(const std::string& key) {
  const json* v = get(key);
  if (!v) return std::nullopt;
  if (v->is_number_unsigned()) return v->get<std::uint64_t>();
  if (v->is_number_integer()) {
    const auto i = v->get<std::int64_t>();
    if (i < 0) fail(key, "must be >= 0");
    return static_cast<std::uint64_t>(i);
  }
  // Allow 5e4-style floats when they are whole numbers.
  if (v->is_number_float()) {
    const double d = v->get<double>();
    if (d >= 0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
  }
  fail(key, "expected a non-negative integer");
}

std::optional<std::string> Section::string(const std::string& key) {
  const json* v = get(key);
  if (!v) return std::nullopt;
  if (!v->is_string()) fail(key, "expected a string");
  return v->get<std::string>();
}

std::optional<bool> Section::boolean(const std::string& key) {
  const json* v = get(key);
  if (!v) return std::nullopt;
  if (!v->is_boolean()) fail(key, "expected true or false");
  return v->get<bool>();
}

std::optional<std::vector<double>> Section::numbers(const std::string& key) {
  const json* v = get(key);
  if (!v) return std::nullopt;
  if (!v->is_array()) fail(key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& e : *v) {
    if (!e.is_number()) fail(key, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::optional<std::vector<std::int64_t>> Section::integers(const std::string& key) {
  const json* v = get(key);
  if (!v) return std::nullopt;
  if (!v->is_array()) fail(key, "expected an array of integers");
  std::vector<std::int64_t> out;
  for (const auto& e : *v) {
    if (!e.is_number_integer()) fail(key, "expected an array of integers");
    out.push_back(e.get<std::int64_t>());
  }
  return out;
}

std::optional<Section> Section::table(const std::string& key) {
  const json* v = get(key);
  if (!v) return std::nullopt;
  if (!v->is_object()) fail(key, "expected a table");
  return Section(v, key_path(key), source_);
}

void Section::finish() const {
  if (!obj_) return;
  for (const auto& [k, v] : obj_->items())
    if (!used_.count(k)) fail(k, "unknown key");
}

}  // namespace truncest::cli
