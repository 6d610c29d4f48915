#pragma once

// Flat key=value configuration. Every key has a declared type and default;
// unknown keys and unparsable values are rejected.

#include "ftsum/model.hpp"
#include "ftsum/train.hpp"

#include <filesystem>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ftsum {

enum class KeyType { Int, Real, Bool, String, Path };

struct KeySpec {
  std::string_view key;
  KeyType type;
  std::string_view default_value;  // empty for unset paths
};

/// All recognised keys in a stable order.
std::span<const KeySpec> config_keys();

class Config {
 public:
  /// Every key at its default.
  Config();

  /// Sets a key after validating its value against the key's type.
  void set(std::string_view key, std::string_view value);
  bool has_key(std::string_view key) const;

  const std::string& raw(std::string_view key) const;
  long get_int(std::string_view key) const;
  double get_real(std::string_view key) const;
  bool get_bool(std::string_view key) const;
  const std::string& get_string(std::string_view key) const;
  /// nullopt when the path key is unset.
  std::optional<std::filesystem::path> get_path(std::string_view key) const;
  /// Throws naming the key when unset.
  std::filesystem::path require_path(std::string_view key) const;

  model::ModelConfig model_config() const;  // vocab sizes left at 0
  model::TrainConfig train_config() const;

  /// "key=value" lines in key order.
  std::string dump() const;

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

/// Reads key=value lines; '#' starts a comment and blank lines are ignored.
void apply_config_text(Config& cfg, std::istream& in, std::string_view origin = "config");

/// Defaults, then the file (when given), then the "key=value" overrides in order.
Config parse_config(const std::optional<std::filesystem::path>& file, std::span<const std::string> overrides = {});

}  // namespace ftsum
