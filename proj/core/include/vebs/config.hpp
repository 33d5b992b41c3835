#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace vebs::config {

enum class ValueType { real, integer, boolean, text };

/// One schema entry: key name, expected type, one-line description (shown in
/// documentation and error messages).
struct KeySpec {
  std::string key;
  ValueType type = ValueType::real;
  std::string doc;
};

/// Plain-text key=value configuration. Lines are `key = value`; blank lines
/// and lines starting with '#' are ignored. Keys outside the schema, duplicate
/// keys, and type-invalid values raise ConfigError with the line number.
class Config {
 public:
  static Config parse_file(const std::filesystem::path& path, std::span<const KeySpec> schema);
  static Config parse_text(std::string_view text, const std::string& origin,
                           std::span<const KeySpec> schema);

  /// Applies a `key=value` override (same validation as file entries, minus
  /// the duplicate check: overrides replace).
  void set(const std::string& assignment);

  [[nodiscard]] bool has(const std::string& key) const;
  [[nodiscard]] double real(const std::string& key, double fallback) const;
  [[nodiscard]] long long integer(const std::string& key, long long fallback) const;
  [[nodiscard]] bool boolean(const std::string& key, bool fallback) const;
  [[nodiscard]] std::string text(const std::string& key, const std::string& fallback) const;

  /// Set values in schema order, one `key=value` per line.
  [[nodiscard]] std::string render() const;

  [[nodiscard]] const std::vector<KeySpec>& schema() const { return schema_; }

 private:
  explicit Config(std::span<const KeySpec> schema);
  const KeySpec& spec_for(const std::string& key) const;
  void validate_value(const KeySpec& spec, const std::string& value, const std::string& where) const;

  std::vector<KeySpec> schema_;
  std::map<std::string, std::string> values_;
};

/// Markdown table of a schema, for docs/--help output.
[[nodiscard]] std::string describe_schema(std::span<const KeySpec> schema);

}  // namespace vebs::config
