#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace omni {

/// Flat key-value configuration in a small TOML subset:
///
///   # comment
///   seed = 7
///   [sampler]
///   ratio = "2:1"
///   resample.kind = "power"
///   milestones = [10, 15]
///
/// A `[section]` header prefixes the keys below it, so the last line above
/// is stored as "sampler.resample.kind". Values are quoted strings, numbers,
/// true/false, or one-line arrays of numbers. Typed getters mark keys as
/// read; unread_keys() then lists typos.
class FlatConfig {
 public:
  static FlatConfig parse(std::string_view text, const std::string& source = "<config>");
  static FlatConfig load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  /// Adds or replaces a key with a raw (unparsed) value.
  void set(const std::string& key, const std::string& raw);

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<std::int64_t> get_int(const std::string& key) const;
  std::optional<std::uint64_t> get_uint(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<double>> get_doubles(const std::string& key) const;

  std::vector<std::string> keys() const;
  std::vector<std::string> unread_keys() const;
  /// Throws ValidationError naming every unread key.
  void reject_unread() const;

 private:
  struct Entry {
    std::string raw;
    std::string where;
    mutable bool read = false;
  };
  const Entry* find(const std::string& key) const;

  std::map<std::string, Entry> entries_;
};

/// Reads OMNI_SEED when set; throws ValidationError on a malformed value.
std::optional<std::uint64_t> seed_from_environment();

}  // namespace omni
