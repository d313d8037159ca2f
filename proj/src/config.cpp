#include "gnncomp/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace gnncomp {

double TomlValue::as_double() const {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  if (const auto* d = std::get_if<double>(&value)) return *d;
  throw Error("toml: value is not a number");
}

std::int64_t TomlValue::as_int() const {
  if (const auto* i = std::get_if<std::int64_t>(&value)) return *i;
  throw Error("toml: value is not an integer");
}

bool TomlValue::as_bool() const {
  if (const auto* b = std::get_if<bool>(&value)) return *b;
  throw Error("toml: value is not a boolean");
}

const std::string& TomlValue::as_string() const {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  throw Error("toml: value is not a string");
}

const TomlValue::Array& TomlValue::as_array() const {
  if (const auto* a = std::get_if<Array>(&value)) return *a;
  throw Error("toml: value is not an array");
}

const TomlValue* TomlDocument::find(const std::string& key) const {
  auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

void TomlDocument::set(std::string key, TomlValue value) { values_[std::move(key)] = std::move(value); }

std::string TomlDocument::get_string(const std::string& key, const std::string& fallback) const {
  const auto* v = find(key);
  return v ? v->as_string() : fallback;
}

double TomlDocument::get_double(const std::string& key, double fallback) const {
  const auto* v = find(key);
  return v ? v->as_double() : fallback;
}

std::int64_t TomlDocument::get_int(const std::string& key, std::int64_t fallback) const {
  const auto* v = find(key);
  return v ? v->as_int() : fallback;
}

bool TomlDocument::get_bool(const std::string& key, bool fallback) const {
  const auto* v = find(key);
  return v ? v->as_bool() : fallback;
}

std::vector<double> TomlDocument::get_double_array(const std::string& key, const std::vector<double>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<double> out;
  for (const auto& e : v->as_array()) out.push_back(e.as_double());
  return out;
}

std::vector<std::string> TomlDocument::get_string_array(const std::string& key,
                                                        const std::vector<std::string>& fallback) const {
  const auto* v = find(key);
  if (!v) return fallback;
  std::vector<std::string> out;
  for (const auto& e : v->as_array()) out.push_back(e.as_string());
  return out;
}

namespace {

class TomlParser {
 public:
  explicit TomlParser(std::string_view text) : text_(text) {}

  TomlDocument parse() {
    TomlDocument doc;
    std::string table;
    while (true) {
      skip_blank_lines();
      if (eof()) break;
      if (peek() == '[') {
        ++pos_;
        if (!eof() && peek() == '[') fail("arrays of tables are not supported");
        skip_spaces();
        table = parse_key();
        skip_spaces();
        expect(']');
        end_of_line();
        continue;
      }
      const std::string key = parse_key();
      std::string full = table.empty() ? key : table + "." + key;
      if (doc.contains(full)) fail("duplicate key '" + full + "'");
      skip_spaces();
      expect('=');
      skip_spaces();
      TomlValue v = parse_value();
      end_of_line();
      doc.set(std::move(full), std::move(v));
    }
    return doc;
  }

 private:
  bool eof() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }

  [[noreturn]] void fail(const std::string& msg) const { throw ParseError("toml line " + std::to_string(line_) + ": " + msg, line_); }

  void expect(char c) {
    if (eof() || peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  void skip_spaces() {
    while (!eof() && (peek() == ' ' || peek() == '\t')) ++pos_;
  }

  void skip_comment() {
    if (!eof() && peek() == '#') {
      while (!eof() && peek() != '\n') ++pos_;
    }
  }

  void newline() {
    if (!eof() && peek() == '\r') ++pos_;
    if (!eof() && peek() == '\n') {
      ++pos_;
      ++line_;
    }
  }

  void skip_blank_lines() {
    while (!eof()) {
      skip_spaces();
      skip_comment();
      if (eof()) return;
      if (peek() == '\n' || peek() == '\r') {
        newline();
      } else {
        return;
      }
    }
  }

  // Whitespace, newlines and comments inside an array.
  void skip_array_space() {
    while (!eof()) {
      skip_spaces();
      skip_comment();
      if (!eof() && (peek() == '\n' || peek() == '\r')) {
        newline();
      } else {
        return;
      }
    }
  }

  void end_of_line() {
    skip_spaces();
    skip_comment();
    if (eof()) return;
    if (peek() != '\n' && peek() != '\r') fail("unexpected trailing characters");
    newline();
  }

  std::string parse_key() {
    std::string key;
    while (true) {
      skip_spaces();
      std::string part;
      if (!eof() && peek() == '"') {
        part = parse_basic_string();
      } else {
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) part += text_[pos_++];
        if (part.empty()) fail("expected a key");
      }
      key += part;
      skip_spaces();
      if (!eof() && peek() == '.') {
        ++pos_;
        key += '.';
        continue;
      }
      return key;
    }
  }

  std::string parse_basic_string() {
    expect('"');
    std::string out;
    while (true) {
      if (eof() || peek() == '\n') fail("unterminated string");
      const char c = text_[pos_++];
      if (c == '"') return out;
      if (c != '\\') {
        out += c;
        continue;
      }
      if (eof()) fail("unterminated escape");
      const char e = text_[pos_++];
      switch (e) {
        case 'n': out += '\n'; break;
        case 't': out += '\t'; break;
        case 'r': out += '\r'; break;
        case '"': out += '"'; break;
        case '\\': out += '\\'; break;
        default: fail(std::string("unsupported escape \\") + e);
      }
    }
  }

  std::string parse_literal_string() {
    expect('\'');
    const auto end = text_.find_first_of("'\n", pos_);
    if (end == std::string_view::npos || text_[end] != '\'') fail("unterminated string");
    std::string out(text_.substr(pos_, end - pos_));
    pos_ = end + 1;
    return out;
  }

  TomlValue parse_value() {
    if (eof()) fail("missing value");
    const char c = peek();
    if (c == '"') return {parse_basic_string()};
    if (c == '\'') return {parse_literal_string()};
    if (c == '[') return parse_array();
    if (c == '{') fail("inline tables are not supported");
    return parse_scalar();
  }

  TomlValue parse_array() {
    expect('[');
    TomlValue::Array items;
    while (true) {
      skip_array_space();
      if (eof()) fail("unterminated array");
      if (peek() == ']') {
        ++pos_;
        return {std::move(items)};
      }
      items.push_back(parse_value());
      skip_array_space();
      if (!eof() && peek() == ',') {
        ++pos_;
      } else if (eof() || peek() != ']') {
        fail("expected ',' or ']' in array");
      }
    }
  }

  TomlValue parse_scalar() {
    const auto start = pos_;
    while (!eof() && peek() != ',' && peek() != ']' && peek() != '#' && peek() != '\n' && peek() != '\r' &&
           peek() != ' ' && peek() != '\t') {
      ++pos_;
    }
    std::string tok(text_.substr(start, pos_ - start));
    if (tok == "true") return {true};
    if (tok == "false") return {false};
    if (tok == "inf" || tok == "+inf") return {std::numeric_limits<double>::infinity()};
    if (tok == "-inf") return {-std::numeric_limits<double>::infinity()};
    if (tok == "nan" || tok == "+nan" || tok == "-nan") return {std::numeric_limits<double>::quiet_NaN()};
    std::string clean;
    for (char ch : tok) {
      if (ch != '_') clean += ch;
    }
    if (!clean.empty() && clean.front() == '+') clean.erase(0, 1);
    if (clean.empty()) fail("missing value");
    const bool is_float = clean.find_first_of(".eE") != std::string::npos;
    const char* b = clean.data();
    const char* e = clean.data() + clean.size();
    if (!is_float) {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(b, e, i);
      if (ec == std::errc() && p == e) return {i};
    } else {
      double d = 0;
      auto [p, ec] = std::from_chars(b, e, d);
      if (ec == std::errc() && p == e) return {d};
    }
    fail("invalid value '" + tok + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
};

}  // namespace

TomlDocument parse_toml(std::string_view text) { return TomlParser(text).parse(); }

TomlDocument load_toml(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_toml(ss.str());
}

}  // namespace gnncomp
