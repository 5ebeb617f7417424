#pragma once
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "multi_index.hpp"
#include "polynomial.hpp"

namespace bou {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

}  // namespace detail

// flat key=value configuration with dotted section keys, '#' comments, and
// command-line overrides of the same key=value form
class Config {
 public:
  static Config from_file(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file: " + path);
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;
      const std::size_t eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
      cfg.set(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    }
    cfg.apply_overrides(overrides);
    return cfg;
  }

  void apply_overrides(const std::vector<std::string>& overrides) {
    for (const std::string& ov : overrides) {
      const std::size_t eq = ov.find('=');
      if (eq == std::string::npos) throw ConfigError("override must be key=value: " + ov);
      set(detail::trim(ov.substr(0, eq)), detail::trim(ov.substr(eq + 1)));
    }
  }

  void set(const std::string& key, const std::string& value) {
    if (key.empty()) throw ConfigError("empty config key");
    kv_[key] = value;
  }

  bool has(const std::string& key) const { return kv_.count(key) != 0; }

  std::string str(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("missing required config key: " + key);
    return it->second;
  }
  std::string str_or(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double num(const std::string& key) const { return parse_num(key, str(key)); }
  double num_or(const std::string& key, double fallback) const {
    return has(key) ? num(key) : fallback;
  }

  long long integer(const std::string& key) const {
    const std::string v = str(key);
    std::size_t pos = 0;
    long long out = 0;
    try {
      out = std::stoll(v, &pos);
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " must be an integer, got '" + v + "'");
    }
    if (pos != v.size()) throw ConfigError("config key " + key + " must be an integer, got '" + v + "'");
    return out;
  }
  long long integer_or(const std::string& key, long long fallback) const {
    return has(key) ? integer(key) : fallback;
  }

  std::uint64_t uint64_or(const std::string& key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const std::string v = str(key);
    try {
      std::size_t pos = 0;
      const std::uint64_t out = std::stoull(v, &pos, 0);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " must be an unsigned integer, got '" + v + "'");
    }
  }

  bool flag_or(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const std::string v = str(key);
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw ConfigError("config key " + key + " must be a boolean, got '" + v + "'");
  }

  std::vector<double> num_list(const std::string& key) const {
    const std::string v = str(key);
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = detail::trim(item);
      if (item.empty()) continue;
      out.push_back(parse_num(key, item));
    }
    if (out.empty()) throw ConfigError("config key " + key + " is an empty list");
    return out;
  }
  std::vector<double> num_list_or(const std::string& key, const std::vector<double>& fallback) const {
    return has(key) ? num_list(key) : fallback;
  }

  // monomial coefficient map as JSON, e.g. {"0": -1, "1": 0.5, "2": 1} in d = 1
  // or {"1,0": 2.5, "0,2": 1} in d = 2
  Polynomial polynomial(const std::string& key, int dim) const {
    const std::string v = str(key);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(v);
    } catch (const std::exception& e) {
      throw ConfigError("config key " + key + " is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config key " + key + " must be a JSON object");
    Polynomial f(dim);
    for (auto it = j.begin(); it != j.end(); ++it) {
      MultiIndex p = parse_multi_index(it.key(), dim);
      if (!it.value().is_number())
        throw ConfigError("config key " + key + ": coefficient of '" + it.key() + "' must be a number");
      f.add_term(p, it.value().get<double>());
    }
    return f;
  }

  const std::map<std::string, std::string>& raw() const { return kv_; }

 private:
  static double parse_num(const std::string& key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const double out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + " must be a number, got '" + v + "'");
    }
  }

  std::map<std::string, std::string> kv_;
};

}  // namespace bou
