#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace cyclematch::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
bool parse_integer(const std::string& text, T& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
  return ec == std::errc{} && end == t.data() + t.size();
}

template <class T>
bool parse_list(const std::string& text, std::vector<T>& out) {
  out.clear();
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    T v{};
    if (!parse_value(item, v)) return false;
    out.push_back(v);
  }
  return !out.empty();
}

}  // namespace

ConfigError::ConfigError(Kind kind, const std::string& source, int line, const std::string& what)
    : std::runtime_error(std::string(config_error_name(kind)) + ": " + source + ":" + std::to_string(line) + ": " +
                         what),
      kind_(kind),
      line_(line) {}

const char* config_error_name(ConfigError::Kind kind) noexcept {
  switch (kind) {
    case ConfigError::Kind::Syntax: return "SyntaxError";
    case ConfigError::Kind::UnknownKey: return "UnknownKey";
    case ConfigError::Kind::TypeError: return "TypeError";
  }
  return "ConfigError";
}

std::string canonical_key(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::vector<ConfigEntry> parse_config(std::istream& is, const std::string& source) {
  std::vector<ConfigEntry> out;
  std::set<std::string> seen;
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string text = trim(raw.substr(0, raw.find('#')));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(ConfigError::Kind::Syntax, source, line, "expected 'key = value'");
    ConfigEntry e{canonical_key(trim(text.substr(0, eq))), trim(text.substr(eq + 1)), line};
    if (e.key.empty()) throw ConfigError(ConfigError::Kind::Syntax, source, line, "missing key");
    if (!seen.insert(e.key).second)
      throw ConfigError(ConfigError::Kind::Syntax, source, line, "duplicate key '" + e.key + "'");
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<ConfigEntry> load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path.string());
  return parse_config(is, path.string());
}

bool parse_value(const std::string& text, int& out) { return parse_integer(text, out); }
bool parse_value(const std::string& text, std::uint64_t& out) { return parse_integer(text, out); }

bool parse_value(const std::string& text, double& out) {
  const std::string t = trim(text);
  if (t.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || !std::isfinite(v)) return false;
  out = v;
  return true;
}

bool parse_value(const std::string& text, bool& out) {
  std::string t = trim(text);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "true" || t == "on" || t == "yes" || t == "1") out = true;
  else if (t == "false" || t == "off" || t == "no" || t == "0") out = false;
  else return false;
  return true;
}

bool parse_value(const std::string& text, std::string& out) {
  out = trim(text);
  return !out.empty();
}

bool parse_value(const std::string& text, std::vector<int>& out) { return parse_list(text, out); }
bool parse_value(const std::string& text, std::vector<std::uint64_t>& out) { return parse_list(text, out); }

void OptionSet::apply(const std::vector<ConfigEntry>& entries, const std::string& source) const {
  for (const auto& e : entries) {
    const auto it = slots_.find(e.key);
    if (it == slots_.end())
      throw ConfigError(ConfigError::Kind::UnknownKey, source, e.line, "unknown key '" + e.key + "'");
    if (it->second.option->count() > 0) continue;
    if (!it->second.assign(e.value))
      throw ConfigError(ConfigError::Kind::TypeError, source, e.line,
                        "bad value '" + e.value + "' for key '" + e.key + "'");
  }
}

std::vector<std::string> OptionSet::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : slots_) out.push_back(k);
  return out;
}

}  // namespace cyclematch::cli
