#include "skelclip/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "skelclip/error.hpp"

namespace skelclip {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.emplace_back(trim(s.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

long long parse_int(std::string_view s) {
  s = trim(s);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("not an integer: '" + std::string(s) + "'");
  return v;
}

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ConfigError("not a number: '" + std::string(s) + "'");
  if (!std::isfinite(v)) throw ConfigError("non-finite number: '" + std::string(s) + "'");
  return v;
}

std::vector<std::size_t> parse_index_list(std::string_view s) {
  std::vector<std::size_t> out;
  if (trim(s).empty()) return out;
  for (const auto& item : split(s, ',')) {
    const long long v = parse_int(item);
    if (v < 0) throw ConfigError("negative index: " + item);
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

KeyValueDoc KeyValueDoc::parse(std::string_view text) {
  KeyValueDoc doc;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected 'key = value'");
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError(line_no, "empty key");
    if (doc.contains(key)) throw ParseError(line_no, "duplicate key '" + key + "'");
    doc.entries_[key] = Entry{std::string(trim(line.substr(eq + 1))), line_no};
    doc.order_.push_back(std::move(key));
  }
  return doc;
}

bool KeyValueDoc::contains(std::string_view key) const {
  return entries_.find(key) != entries_.end();
}

const std::string& KeyValueDoc::get(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("missing key '" + std::string(key) + "'");
  return it->second.value;
}

std::optional<std::string> KeyValueDoc::find(std::string_view key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

std::size_t KeyValueDoc::line_of(std::string_view key) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? 0 : it->second.line;
}

std::string KeyValueDoc::get_string(std::string_view key, std::string fallback) const {
  auto v = find(key);
  return v ? *v : std::move(fallback);
}

long long KeyValueDoc::get_int(std::string_view key) const {
  try {
    return parse_int(get(key));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

long long KeyValueDoc::get_int(std::string_view key, long long fallback) const {
  return contains(key) ? get_int(key) : fallback;
}

std::uint64_t KeyValueDoc::get_u64(std::string_view key, std::uint64_t fallback) const {
  if (!contains(key)) return fallback;
  const std::string& s = get(key);
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty())
    throw ConfigError(std::string(key) + ": not an unsigned integer: '" + s + "'");
  return v;
}

double KeyValueDoc::get_double(std::string_view key) const {
  try {
    return parse_double(get(key));
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(key) + ": " + e.what());
  }
}

double KeyValueDoc::get_double(std::string_view key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}

bool KeyValueDoc::get_bool(std::string_view key, bool fallback) const {
  if (!contains(key)) return fallback;
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(std::string(key) + ": not a boolean: '" + v + "'");
}

void KeyValueDoc::set(std::string key, std::string value) {
  auto it = entries_.find(key);
  if (it != entries_.end()) {
    it->second.value = std::move(value);
    return;
  }
  order_.push_back(key);
  entries_[std::move(key)] = Entry{std::move(value), 0};
}

std::string KeyValueDoc::render() const {
  std::ostringstream out;
  for (const auto& key : order_) out << key << " = " << entries_.find(key)->second.value << '\n';
  return out.str();
}

}  // namespace skelclip
