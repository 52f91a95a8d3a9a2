#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace canopy {

// Flat, sectioned key-value config: a TOML-compatible subset.
// Supported value forms: bool, integer, float, "string", [numbers...].
// Comments start with '#'.

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ConfigValue {
 public:
  using Array = std::vector<double>;
  ConfigValue() : v_(false) {}
  explicit ConfigValue(bool b) : v_(b) {}
  explicit ConfigValue(long long i) : v_(i) {}
  explicit ConfigValue(double d) : v_(d) {}
  explicit ConfigValue(std::string s) : v_(std::move(s)) {}
  explicit ConfigValue(Array a) : v_(std::move(a)) {}

  bool is_bool() const { return std::holds_alternative<bool>(v_); }
  bool is_int() const { return std::holds_alternative<long long>(v_); }
  bool is_real() const { return is_int() || std::holds_alternative<double>(v_); }
  bool is_string() const { return std::holds_alternative<std::string>(v_); }
  bool is_array() const { return std::holds_alternative<Array>(v_); }

  bool as_bool() const;
  long long as_int() const;
  double as_real() const;
  const std::string& as_string() const;
  const Array& as_array() const;

  std::string serialized() const;
  bool operator==(const ConfigValue& o) const { return v_ == o.v_; }

 private:
  std::variant<bool, long long, double, std::string, Array> v_;
};

class Config {
 public:
  using Section = std::map<std::string, ConfigValue>;

  static Config parse(const std::string& text);
  static Config parse_file(const std::string& path);
  std::string serialize() const;

  bool has(const std::string& section, const std::string& key) const;
  const ConfigValue* find(const std::string& section,
                          const std::string& key) const;
  void set(const std::string& section, const std::string& key, ConfigValue v);

  const std::map<std::string, Section>& sections() const { return sections_; }

  // "section.key=value" override, parsed with the same value grammar.
  void apply_override(const std::string& assignment);

  bool operator==(const Config& o) const { return sections_ == o.sections_; }

 private:
  std::map<std::string, Section> sections_;
};

// Tracks which keys a section consumer actually read so unknown keys can be
// reported by name.
class SectionReader {
 public:
  SectionReader(const Config& cfg, std::string section);

  double real(const std::string& key, double fallback);
  long long integer(const std::string& key, long long fallback);
  bool boolean(const std::string& key, bool fallback);
  std::string str(const std::string& key, const std::string& fallback);
  std::vector<double> array(const std::string& key,
                            const std::vector<double>& fallback);
  // fixed-size array or error
  std::vector<double> array_n(const std::string& key, size_t n,
                              const std::vector<double>& fallback);

  // Throws ConfigError if the section contains keys never requested.
  void finish() const;

 private:
  const ConfigValue* lookup(const std::string& key);
  const Config& cfg_;
  std::string section_;
  std::set<std::string> seen_;
};

}  // namespace canopy
