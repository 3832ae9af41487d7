#include "omni/config.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "omni/error.hpp"

namespace omni {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

/// Drops a trailing "# ..." that is not inside a quoted string.
std::string_view strip_comment(std::string_view line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '\\' && quoted) {
      ++i;
    } else if (c == '"') {
      quoted = !quoted;
    } else if (c == '#' && !quoted) {
      return line.substr(0, i);
    }
  }
  return line;
}

bool valid_key(std::string_view key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  for (char c : key) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  }
  return key.find("..") == std::string_view::npos;
}

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

}  // namespace

FlatConfig FlatConfig::parse(std::string_view text, const std::string& source) {
  FlatConfig cfg;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string line_buf;
  int line_no = 0;
  while (std::getline(in, line_buf)) {
    ++line_no;
    const std::string where = source + ":" + std::to_string(line_no);
    const std::string_view line = trim(strip_comment(line_buf));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ValidationError(where + ": unterminated section header");
      const std::string_view name = trim(line.substr(1, line.size() - 2));
      if (!name.empty() && !valid_key(name)) throw ValidationError(where + ": bad section name");
      section = std::string(name);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ValidationError(where + ": expected 'key = value'");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!valid_key(key)) throw ValidationError(where + ": bad key '" + std::string(key) + "'");
    if (value.empty()) throw ValidationError(where + ": missing value for '" + std::string(key) + "'");
    const std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    if (cfg.entries_.count(full)) throw ValidationError(where + ": duplicate key '" + full + "'");
    cfg.entries_[full] = Entry{std::string(value), where};
  }
  return cfg;
}

FlatConfig FlatConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void FlatConfig::set(const std::string& key, const std::string& raw) {
  if (!valid_key(key)) throw ValidationError("bad config key '" + key + "'");
  entries_[key] = Entry{raw, "override"};
}

const FlatConfig::Entry* FlatConfig::find(const std::string& key) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return nullptr;
  it->second.read = true;
  return &it->second;
}

std::optional<std::string> FlatConfig::get_string(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  const std::string_view raw = e->raw;
  if (raw.front() != '"') {
    if (raw.front() == '[') throw ValidationError(e->where + ": '" + key + "' must be a string");
    return std::string(raw);
  }
  if (raw.size() < 2 || raw.back() != '"') throw ValidationError(e->where + ": unterminated string");
  std::string out;
  for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
    char c = raw[i];
    if (c == '\\') {
      if (i + 2 >= raw.size()) throw ValidationError(e->where + ": dangling escape");
      c = raw[++i];
      if (c == 'n') c = '\n';
      else if (c == 't') c = '\t';
      else if (c != '"' && c != '\\') throw ValidationError(e->where + ": unsupported escape");
    } else if (c == '"') {
      throw ValidationError(e->where + ": stray quote in string");
    }
    out.push_back(c);
  }
  return out;
}

std::optional<double> FlatConfig::get_double(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  const auto v = parse_number(e->raw);
  if (!v) throw ValidationError(e->where + ": '" + key + "' must be a number, got '" + e->raw + "'");
  return v;
}

std::optional<std::int64_t> FlatConfig::get_int(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  std::string_view t = trim(e->raw);
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  std::int64_t v = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) {
    throw ValidationError(e->where + ": '" + key + "' must be an integer, got '" + e->raw + "'");
  }
  return v;
}

std::optional<std::uint64_t> FlatConfig::get_uint(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  const std::string_view t = trim(e->raw);
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) {
    throw ValidationError(e->where + ": '" + key + "' must be a non-negative integer, got '" + e->raw + "'");
  }
  return v;
}

std::optional<bool> FlatConfig::get_bool(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  if (e->raw == "true") return true;
  if (e->raw == "false") return false;
  throw ValidationError(e->where + ": '" + key + "' must be true or false");
}

std::optional<std::vector<double>> FlatConfig::get_doubles(const std::string& key) const {
  const Entry* e = find(key);
  if (!e) return std::nullopt;
  const std::string_view raw = e->raw;
  if (raw.front() != '[' || raw.back() != ']') {
    throw ValidationError(e->where + ": '" + key + "' must be an array like [1, 2]");
  }
  std::vector<double> out;
  std::string_view body = trim(raw.substr(1, raw.size() - 2));
  while (!body.empty()) {
    const auto comma = body.find(',');
    const auto v = parse_number(body.substr(0, comma));
    if (!v) throw ValidationError(e->where + ": bad array element in '" + key + "'");
    out.push_back(*v);
    if (comma == std::string_view::npos) break;
    body = trim(body.substr(comma + 1));
    if (body.empty()) throw ValidationError(e->where + ": trailing comma in '" + key + "'");
  }
  return out;
}

std::vector<std::string> FlatConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) out.push_back(k);
  return out;
}

std::vector<std::string> FlatConfig::unread_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) {
    if (!e.read) out.push_back(k);
  }
  return out;
}

void FlatConfig::reject_unread() const {
  std::string list;
  for (const auto& [k, e] : entries_) {
    if (e.read) continue;
    list += (list.empty() ? "" : ", ") + k + " (" + e.where + ")";
  }
  if (!list.empty()) throw ValidationError("unknown config keys: " + list);
}

std::optional<std::uint64_t> seed_from_environment() {
  const char* v = std::getenv("OMNI_SEED");
  if (v == nullptr) return std::nullopt;
  const std::string_view t = trim(v);
  std::uint64_t seed = 0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), seed);
  if (ec != std::errc() || end != t.data() + t.size() || t.empty()) {
    throw ValidationError("OMNI_SEED must be a non-negative integer, got '" + std::string(v) + "'");
  }
  return seed;
}

}  // namespace omni
