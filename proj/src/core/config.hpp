#pragma once

#include <map>
#include <string>
#include <vector>

namespace splatprint {

// Sectioned key = value text config. '#' starts a comment; keys are addressed
// as "section.key". Unknown keys are tolerated so configs can carry notes.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;

  // Canonical "section.key = value" lines, sorted; stable input for hashing.
  std::string canonical_text() const;

  const std::string& origin() const { return origin_; }

 private:
  std::map<std::string, std::string> values_;
  std::string origin_;
};

// FNV-1a over bytes, rendered as 16 hex digits; manifest/config identity.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace splatprint
