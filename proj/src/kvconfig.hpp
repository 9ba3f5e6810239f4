#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace reslab {

// Flat `key = value` text. Later keys override earlier ones.
class KvConfig {
 public:
  static KvConfig parse(const std::string& text);

  bool has(const std::string& key) const { return kv_.count(key) > 0; }
  std::string str(const std::string& key, const std::string& fallback = "") const;
  double num(const std::string& key, double fallback) const;
  double num(const std::string& key) const;
  long integer(const std::string& key, long fallback) const;
  bool flag(const std::string& key, bool fallback) const;
  std::vector<double> list(const std::string& key) const;

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }
  void erase(const std::string& key) { kv_.erase(key); }
  const std::map<std::string, std::string>& items() const { return kv_; }

  // Sorted `key=value\n` lines; used for hashing and round-trips.
  std::string canonical() const;
  std::string hash_hex() const;

 private:
  std::map<std::string, std::string> kv_;
};

double parse_double(const std::string& s);
std::vector<double> parse_list(const std::string& s);
std::string trim(const std::string& s);
uint64_t fnv1a64(const std::string& s);

}  // namespace reslab
