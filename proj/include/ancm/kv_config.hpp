#pragma once

#include <map>
#include <string>
#include <vector>

#include "ancm/linalg.hpp"

namespace ancm {

/// Plain key-value configuration text.
///
///   # comment
///   model = cartpole
///   x0 = 0.83, -0.32, 0.39, 0.45
///
/// Keys are case-sensitive; later assignments override earlier ones.
class KvConfig {
 public:
  KvConfig() = default;

  static KvConfig parse(const std::string& text);
  static KvConfig load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  Vec get_vec(const std::string& key) const;
  Vec get_vec(const std::string& key, const Vec& fallback) const;
  std::vector<int> get_ints(const std::string& key) const;

  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ancm
