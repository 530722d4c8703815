#pragma once

#include <map>
#include <string>
#include <vector>

namespace xtrl {

// Flat `key = value` configuration with dotted keys and # comments.
// Unknown keys are kept; typed getters fall back to provided defaults.
class Config {
 public:
  Config() = default;

  static Config load(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key, const std::string& def = "") const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  long get_long(const std::string& key, long def) const;
  bool get_bool(const std::string& key, bool def) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& def) const;
  std::vector<std::string> get_strings(const std::string& key,
                                       const std::vector<std::string>& def = {}) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  // Serialized snapshot, sorted by key.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace xtrl
