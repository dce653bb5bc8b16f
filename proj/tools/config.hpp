#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace cyclematch::cli {

/// One `key = value` line of a run configuration file.
struct ConfigEntry {
  std::string key;  // underscores folded to hyphens
  std::string value;
  int line = 0;
};

class ConfigError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownKey, TypeError };
  ConfigError(Kind kind, const std::string& source, int line, const std::string& what);
  Kind kind() const noexcept { return kind_; }
  int line() const noexcept { return line_; }

 private:
  Kind kind_;
  int line_;
};

const char* config_error_name(ConfigError::Kind kind) noexcept;

/// `#` starts a comment; blank lines are skipped; keys may not repeat.
std::vector<ConfigEntry> parse_config(std::istream& is, const std::string& source);
std::vector<ConfigEntry> load_config(const std::filesystem::path& path);

std::string canonical_key(std::string key);

bool parse_value(const std::string& text, int& out);
bool parse_value(const std::string& text, std::uint64_t& out);
bool parse_value(const std::string& text, double& out);
bool parse_value(const std::string& text, bool& out);
bool parse_value(const std::string& text, std::string& out);
bool parse_value(const std::string& text, std::vector<int>& out);
bool parse_value(const std::string& text, std::vector<std::uint64_t>& out);

/// Options of one subcommand, registered as `--key` flags and as config keys.
/// Values from a file only land where the flag was not given.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* add(const std::string& key, T& target, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + key, target, help)->capture_default_str();
    if constexpr (std::is_same_v<T, std::vector<int>> || std::is_same_v<T, std::vector<std::uint64_t>>)
      opt->delimiter(',');
    slots_[key] = Slot{opt, [&target](const std::string& text) {
                         T value{};
                         if (!parse_value(text, value)) return false;
                         target = value;
                         return true;
                       }};
    return opt;
  }

  void apply(const std::vector<ConfigEntry>& entries, const std::string& source) const;
  std::vector<std::string> keys() const;

 private:
  struct Slot {
    CLI::Option* option;
    std::function<bool(const std::string&)> assign;
  };
  CLI::App* app_;
  std::map<std::string, Slot> slots_;
};

}  // namespace cyclematch::cli
