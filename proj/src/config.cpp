#include "nfkit/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "nfkit/error.hpp"
#include "nfkit/text.hpp"

namespace nfkit {

namespace {

std::string unquote(std::string_view v, std::string_view where) {
  if (v.size() < 2 || v.front() != '"' || v.back() != '"') {
    return std::string(v);
  }
  std::string out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i) {
    if (v[i] != '\\') {
      out.push_back(v[i]);
      continue;
    }
    if (i + 2 >= v.size()) throw ConfigError(std::string(where) + ": dangling escape");
    switch (v[++i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case '"': out.push_back('"'); break;
      case '\\': out.push_back('\\'); break;
      default:
        throw ConfigError(std::string(where) + ": unknown escape \\" + v[i]);
    }
  }
  return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view content,
                                     std::string_view origin) {
  KeyValueConfig cfg;
  cfg.origin_ = origin;
  std::string section;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    auto eol = content.find('\n', pos);
    if (eol == std::string_view::npos) eol = content.size();
    const auto line = text::trim(content.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = std::string(text::trim(line.substr(1, line.size() - 2)));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(where + ": expected 'key = value'");
    }
    const auto key = text::trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    std::string full = section.empty() ? std::string(key)
                                       : section + "." + std::string(key);
    if (cfg.entries_.count(full)) {
      throw ConfigError(where + ": duplicate key '" + full + "'");
    }
    cfg.entries_.emplace(std::move(full),
                         unquote(text::trim(line.substr(eq + 1)), where));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

bool KeyValueConfig::has(std::string_view key) const {
  return entries_.find(key) != entries_.end();
}

std::optional<std::string> KeyValueConfig::get(std::string_view key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::string KeyValueConfig::require(std::string_view key) const {
  auto v = get(key);
  if (!v) throw ConfigError(origin_ + ": missing required key '" + std::string(key) + "'");
  return *v;
}

std::string KeyValueConfig::get_or(std::string_view key,
                                   std::string_view fallback) const {
  auto v = get(key);
  return v ? *v : std::string(fallback);
}

std::optional<long long> KeyValueConfig::get_int(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), out);
  if (ec != std::errc{} || ptr != v->data() + v->size()) {
    throw ConfigError(origin_ + ": '" + std::string(key) + "' is not an integer: " + *v);
  }
  return out;
}

std::optional<double> KeyValueConfig::get_double(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  try {
    std::size_t used = 0;
    const double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(origin_ + ": '" + std::string(key) + "' is not a number: " + *v);
  }
}

std::optional<bool> KeyValueConfig::get_bool(std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  const auto s = text::ascii_lower(*v);
  if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
  if (s == "false" || s == "no" || s == "0" || s == "off") return false;
  throw ConfigError(origin_ + ": '" + std::string(key) + "' is not a boolean: " + *v);
}

std::optional<std::vector<std::string>> KeyValueConfig::get_list(
    std::string_view key) const {
  auto v = get(key);
  if (!v) return std::nullopt;
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= v->size()) {
    auto comma = v->find(',', pos);
    if (comma == std::string::npos) comma = v->size();
    auto item = text::trim(std::string_view(*v).substr(pos, comma - pos));
    if (!item.empty()) out.emplace_back(item);
    pos = comma + 1;
  }
  return out;
}

std::map<std::string, std::string> KeyValueConfig::section(
    std::string_view prefix) const {
  std::map<std::string, std::string> out;
  const std::string p = std::string(prefix) + ".";
  for (const auto& [k, v] : entries_) {
    if (k.size() > p.size() && k.compare(0, p.size(), p) == 0) {
      out.emplace(k.substr(p.size()), v);
    }
  }
  return out;
}

std::vector<std::string> KeyValueConfig::subsections(
    std::string_view prefix) const {
  std::set<std::string> names;
  for (const auto& [k, v] : section(prefix)) {
    const auto dot = k.find('.');
    if (dot != std::string::npos) names.insert(k.substr(0, dot));
  }
  return {names.begin(), names.end()};
}

void KeyValueConfig::set(std::string key, std::string value) {
  entries_[std::move(key)] = std::move(value);
}

}  // namespace nfkit
