#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>

#include "stml/data.hpp"
#include "stml/trainer.hpp"

namespace stml {

/// Flat `section.key=value` text. Blank lines and lines starting with '#'
/// are skipped; duplicate keys are errors.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  /// Throws ConfigError naming the key if absent.
  const std::string& get(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  /// Throws ConfigError naming the first key outside `known`.
  void reject_unknown(const std::set<std::string>& known) const;

 private:
  std::map<std::string, std::string> values_;
  std::map<std::string, std::size_t> lines_;
};

/// Every key each section accepts.
const std::set<std::string>& data_keys();
const std::set<std::string>& run_keys();
const std::set<std::string>& output_keys();
/// Union of all sections.
std::set<std::string> all_config_keys();

GeneratorSpec generator_spec_from(const KeyValueConfig& cfg);
RunConfig run_config_from(const KeyValueConfig& cfg);

std::string format_generator_spec(const GeneratorSpec& spec);
/// Canonical text (fixed key order, 17-digit floats); parses back to an equal RunConfig.
std::string format_run_config(const RunConfig& config);

/// FNV-1a 64 of format_run_config(config), as 16 lowercase hex digits.
std::string config_hash(const RunConfig& config);

}  // namespace stml
