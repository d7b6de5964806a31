#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace skelclip {

// Plain-text `key = value` documents. Blank lines and `#` comments are
// skipped; keys are unique. Used for layout configs, experiment configs,
// checkpoint headers and results files.
class KeyValueDoc {
 public:
  static KeyValueDoc parse(std::string_view text);

  bool contains(std::string_view key) const;
  const std::string& get(std::string_view key) const;  // ConfigError if missing
  std::optional<std::string> find(std::string_view key) const;
  std::size_t line_of(std::string_view key) const;

  std::string get_string(std::string_view key, std::string fallback) const;
  long long get_int(std::string_view key) const;
  long long get_int(std::string_view key, long long fallback) const;
  std::uint64_t get_u64(std::string_view key, std::uint64_t fallback) const;
  double get_double(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;

  void set(std::string key, std::string value);
  const std::vector<std::string>& keys() const { return order_; }

  /// Keys in insertion order, one `key = value` per line.
  std::string render() const;

 private:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };
  std::map<std::string, Entry, std::less<>> entries_;
  std::vector<std::string> order_;
};

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

long long parse_int(std::string_view s);  // ConfigError on junk
double parse_double(std::string_view s);  // ConfigError on junk or non-finite
std::vector<std::size_t> parse_index_list(std::string_view s);

/// Shortest decimal text that reads back to exactly `v`.
std::string format_double(double v);

}  // namespace skelclip
