#include "canopy/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace canopy {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string format_double(double d) {
  if (std::isfinite(d) && d == std::floor(d) && std::abs(d) < 1e15) {
    // keep a float marker so round-trips preserve the type
    std::ostringstream os;
    os << static_cast<long long>(d) << ".0";
    return os.str();
  }
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), d);
  return std::string(buf, res.ptr);
}

bool parse_number(const std::string& t, ConfigValue& out) {
  if (t.empty()) return false;
  bool has_dot = t.find_first_of(".eE") != std::string::npos;
  // reject things like "1e" or bare '-'
  if (!has_dot) {
    long long i = 0;
    auto res = std::from_chars(t.data(), t.data() + t.size(), i);
    if (res.ec == std::errc() && res.ptr == t.data() + t.size()) {
      out = ConfigValue(i);
      return true;
    }
    return false;
  }
  double d = 0;
  auto res = std::from_chars(t.data(), t.data() + t.size(), d);
  if (res.ec == std::errc() && res.ptr == t.data() + t.size()) {
    out = ConfigValue(d);
    return true;
  }
  return false;
}

ConfigValue parse_value(const std::string& raw, const std::string& where) {
  std::string t = trim(raw);
  if (t.empty()) throw ConfigError(where + ": empty value");
  if (t == "true") return ConfigValue(true);
  if (t == "false") return ConfigValue(false);
  if (t.front() == '"') {
    if (t.size() < 2 || t.back() != '"')
      throw ConfigError(where + ": unterminated string");
    return ConfigValue(t.substr(1, t.size() - 2));
  }
  if (t.front() == '[') {
    if (t.back() != ']') throw ConfigError(where + ": unterminated array");
    std::string body = t.substr(1, t.size() - 2);
    ConfigValue::Array arr;
    std::string item;
    std::istringstream is(body);
    while (std::getline(is, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      ConfigValue v;
      if (!parse_number(item, v))
        throw ConfigError(where + ": bad array element '" + item + "'");
      arr.push_back(v.as_real());
    }
    return ConfigValue(std::move(arr));
  }
  ConfigValue v;
  if (!parse_number(t, v))
    throw ConfigError(where + ": cannot parse value '" + t + "'");
  return v;
}

}  // namespace

bool ConfigValue::as_bool() const {
  if (!is_bool()) throw ConfigError("expected bool");
  return std::get<bool>(v_);
}

long long ConfigValue::as_int() const {
  if (!is_int()) throw ConfigError("expected integer");
  return std::get<long long>(v_);
}

double ConfigValue::as_real() const {
  if (is_int()) return static_cast<double>(std::get<long long>(v_));
  if (!std::holds_alternative<double>(v_)) throw ConfigError("expected number");
  return std::get<double>(v_);
}

const std::string& ConfigValue::as_string() const {
  if (!is_string()) throw ConfigError("expected string");
  return std::get<std::string>(v_);
}

const ConfigValue::Array& ConfigValue::as_array() const {
  if (!is_array()) throw ConfigError("expected array");
  return std::get<Array>(v_);
}

std::string ConfigValue::serialized() const {
  if (is_bool()) return as_bool() ? "true" : "false";
  if (is_int()) return std::to_string(as_int());
  if (is_string()) return "\"" + as_string() + "\"";
  if (is_array()) {
    std::string s = "[";
    const auto& a = as_array();
    for (size_t i = 0; i < a.size(); ++i) {
      if (i) s += ", ";
      s += format_double(a[i]);
    }
    s += "]";
    return s;
  }
  return format_double(std::get<double>(v_));
}

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    // strip comment (strings in this grammar never contain '#')
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    std::string where = "line " + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + ": bad section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      cfg.sections_[section];  // allow empty sections
      continue;
    }
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section.empty())
      throw ConfigError(where + ": key '" + key + "' outside any section");
    std::string value = trim(line.substr(eq + 1));
    // arrays may span lines until the closing bracket
    while (!value.empty() && value.front() == '[' && value.back() != ']') {
      std::string more;
      if (!std::getline(is, more))
        throw ConfigError(where + ": unterminated array for key '" + key + "'");
      ++lineno;
      size_t h = more.find('#');
      if (h != std::string::npos) more = more.substr(0, h);
      value += " " + trim(more);
      value = trim(value);
    }
    cfg.sections_[section][key] =
        parse_value(value, where + " [" + section + "] " + key);
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

std::string Config::serialize() const {
  std::string out;
  for (const auto& [name, sec] : sections_) {
    out += "[" + name + "]\n";
    for (const auto& [k, v] : sec) out += k + " = " + v.serialized() + "\n";
    out += "\n";
  }
  return out;
}

bool Config::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

const ConfigValue* Config::find(const std::string& section,
                                const std::string& key) const {
  auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

void Config::set(const std::string& section, const std::string& key,
                 ConfigValue v) {
  sections_[section][key] = std::move(v);
}

void Config::apply_override(const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must be section.key=value: " + assignment);
  std::string path = trim(assignment.substr(0, eq));
  size_t dot = path.find('.');
  if (dot == std::string::npos)
    throw ConfigError("override key must be section.key: " + path);
  set(path.substr(0, dot), path.substr(dot + 1),
      parse_value(assignment.substr(eq + 1), "override " + path));
}

SectionReader::SectionReader(const Config& cfg, std::string section)
    : cfg_(cfg), section_(std::move(section)) {}

const ConfigValue* SectionReader::lookup(const std::string& key) {
  seen_.insert(key);
  return cfg_.find(section_, key);
}

double SectionReader::real(const std::string& key, double fallback) {
  const ConfigValue* v = lookup(key);
  return v ? v->as_real() : fallback;
}

long long SectionReader::integer(const std::string& key, long long fallback) {
  const ConfigValue* v = lookup(key);
  if (!v) return fallback;
  if (!v->is_int())
    throw ConfigError("[" + section_ + "] " + key + " must be an integer");
  return v->as_int();
}

bool SectionReader::boolean(const std::string& key, bool fallback) {
  const ConfigValue* v = lookup(key);
  return v ? v->as_bool() : fallback;
}

std::string SectionReader::str(const std::string& key,
                               const std::string& fallback) {
  const ConfigValue* v = lookup(key);
  return v ? v->as_string() : fallback;
}

std::vector<double> SectionReader::array(const std::string& key,
                                         const std::vector<double>& fallback) {
  const ConfigValue* v = lookup(key);
  return v ? v->as_array() : fallback;
}

std::vector<double> SectionReader::array_n(const std::string& key, size_t n,
                                           const std::vector<double>& fb) {
  std::vector<double> a = array(key, fb);
  if (a.size() != n)
    throw ConfigError("[" + section_ + "] " + key + " must have " +
                      std::to_string(n) + " entries, got " +
                      std::to_string(a.size()));
  return a;
}

void SectionReader::finish() const {
  auto s = cfg_.sections().find(section_);
  if (s == cfg_.sections().end()) return;
  for (const auto& [k, v] : s->second) {
    if (!seen_.count(k))
      throw ConfigError("[" + section_ + "] unknown key '" + k + "'");
  }
}

}  // namespace canopy
