#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nfkit {

// Key-value config file:
//
//   # comment            ; comment
//   [section]
//   key = value          -> "section.key"
//   other = "quoted \t value"
//
// Keys before any section header are stored unprefixed. Quoted values accept
// the escapes \t \n \" \\. Later duplicates are an error.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view content,
                              std::string_view origin = "<string>");
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(std::string_view key) const;
  std::optional<std::string> get(std::string_view key) const;
  std::string require(std::string_view key) const;
  std::string get_or(std::string_view key, std::string_view fallback) const;

  std::optional<long long> get_int(std::string_view key) const;
  std::optional<double> get_double(std::string_view key) const;
  std::optional<bool> get_bool(std::string_view key) const;
  // Comma-separated list, entries trimmed.
  std::optional<std::vector<std::string>> get_list(std::string_view key) const;

  // Keys under "prefix." with the prefix stripped.
  std::map<std::string, std::string> section(std::string_view prefix) const;
  // Distinct first components after "prefix.", e.g. endpoint names.
  std::vector<std::string> subsections(std::string_view prefix) const;

  const std::string& origin() const { return origin_; }
  const std::map<std::string, std::string, std::less<>>& entries() const {
    return entries_;
  }
  void set(std::string key, std::string value);

 private:
  std::string origin_;
  std::map<std::string, std::string, std::less<>> entries_;
};

}  // namespace nfkit
