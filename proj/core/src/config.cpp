#include "vebs/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "vebs/errors.hpp"

namespace vebs::config {

namespace {

std::string trim(std::string_view s) {
  const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

const char* type_name(ValueType t) {
  switch (t) {
    case ValueType::real: return "real";
    case ValueType::integer: return "integer";
    case ValueType::boolean: return "boolean";
    case ValueType::text: return "text";
  }
  return "?";
}

bool parse_bool(const std::string& v, bool& out) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") {
    out = true;
    return true;
  }
  if (v == "false" || v == "0" || v == "off" || v == "no") {
    out = false;
    return true;
  }
  return false;
}

}  // namespace

Config::Config(std::span<const KeySpec> schema) : schema_(schema.begin(), schema.end()) {}

const KeySpec& Config::spec_for(const std::string& key) const {
  for (const auto& s : schema_) {
    if (s.key == key) return s;
  }
  throw ConfigError("unknown key '" + key + "'");
}

void Config::validate_value(const KeySpec& spec, const std::string& value,
                            const std::string& where) const {
  switch (spec.type) {
    case ValueType::real: {
      double d = 0;
      const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), d);
      if (ec != std::errc{} || p != value.data() + value.size()) {
        throw ConfigError(where + ": value '" + value + "' for key '" + spec.key +
                          "' is not a real number");
      }
      break;
    }
    case ValueType::integer: {
      long long i = 0;
      const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), i);
      if (ec != std::errc{} || p != value.data() + value.size()) {
        throw ConfigError(where + ": value '" + value + "' for key '" + spec.key +
                          "' is not an integer");
      }
      break;
    }
    case ValueType::boolean: {
      bool b = false;
      if (!parse_bool(value, b)) {
        throw ConfigError(where + ": value '" + value + "' for key '" + spec.key +
                          "' is not a boolean (true/false/1/0/on/off)");
      }
      break;
    }
    case ValueType::text: break;
  }
}

Config Config::parse_text(std::string_view text, const std::string& origin,
                          std::span<const KeySpec> schema) {
  Config cfg(schema);
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(where + ": expected key=value, got '" + stripped + "'");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    const KeySpec* spec = nullptr;
    for (const auto& s : cfg.schema_) {
      if (s.key == key) {
        spec = &s;
        break;
      }
    }
    if (!spec) throw ConfigError(where + ": unknown key '" + key + "'");
    if (cfg.values_.contains(key)) throw ConfigError(where + ": duplicate key '" + key + "'");
    cfg.validate_value(*spec, value, where);
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::parse_file(const std::filesystem::path& path, std::span<const KeySpec> schema) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_text(buffer.str(), path.string(), schema);
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  const std::string key = trim(std::string_view(assignment).substr(0, eq));
  const std::string value = trim(std::string_view(assignment).substr(eq + 1));
  const KeySpec& spec = spec_for(key);
  validate_value(spec, value, "override");
  values_[key] = value;
}

bool Config::has(const std::string& key) const {
  spec_for(key);  // assert the key is at least known
  return values_.contains(key);
}

double Config::real(const std::string& key, double fallback) const {
  const KeySpec& spec = spec_for(key);
  if (spec.type != ValueType::real) {
    throw ConfigError("key '" + key + "' is not declared as real");
  }
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double d = 0;
  std::from_chars(it->second.data(), it->second.data() + it->second.size(), d);
  return d;
}

long long Config::integer(const std::string& key, long long fallback) const {
  const KeySpec& spec = spec_for(key);
  if (spec.type != ValueType::integer) {
    throw ConfigError("key '" + key + "' is not declared as integer");
  }
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long long i = 0;
  std::from_chars(it->second.data(), it->second.data() + it->second.size(), i);
  return i;
}

bool Config::boolean(const std::string& key, bool fallback) const {
  const KeySpec& spec = spec_for(key);
  if (spec.type != ValueType::boolean) {
    throw ConfigError("key '" + key + "' is not declared as boolean");
  }
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  bool b = false;
  parse_bool(it->second, b);
  return b;
}

std::string Config::text(const std::string& key, const std::string& fallback) const {
  const KeySpec& spec = spec_for(key);
  if (spec.type != ValueType::text) {
    throw ConfigError("key '" + key + "' is not declared as text");
  }
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::render() const {
  std::ostringstream os;
  for (const auto& spec : schema_) {
    const auto it = values_.find(spec.key);
    if (it != values_.end()) os << spec.key << " = " << it->second << "\n";
  }
  return os.str();
}

std::string describe_schema(std::span<const KeySpec> schema) {
  std::ostringstream os;
  os << "| key | type | description |\n|---|---|---|\n";
  for (const auto& s : schema) {
    os << "| " << s.key << " | " << type_name(s.type) << " | " << s.doc << " |\n";
  }
  return os.str();
}

}  // namespace vebs::config
