#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace cpls {

// "key = value" lines, '#' comments. Flag overrides ("key=value") win over
// file entries; every consumer reads through typed getters with defaults so
// one file can drive the whole pipeline.
class Config {
 public:
  Config() = default;
  static Config from_file(const std::string& path);
  void apply_overrides(const std::vector<std::string>& overrides);
  void set(const std::string& key, const std::string& value);

  bool has(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // sorted "key=value" lines; the hash (FNV-1a 64) identifies a run's config
  std::string canonical() const;
  uint64_t hash() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

}  // namespace cpls
