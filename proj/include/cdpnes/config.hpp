#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace cdpnes {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat "key = value" sections. Every key must be consumed by the loader;
// leftovers are rejected with their line numbers so typos never pass silently.
class Config {
 public:
  static Config parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str(), path.string());
  }

  static Config parse_string(const std::string& text,
                             const std::string& name = "<config>") {
    Config cfg;
    cfg.name_ = name;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(strip_comment(line));
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError(name + ":" + std::to_string(lineno) +
                            ": unterminated section header");
        section = trim(t.substr(1, t.size() - 2));
        if (section.empty())
          throw ConfigError(name + ":" + std::to_string(lineno) +
                            ": empty section name");
        cfg.sections_[section];  // register even if empty
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(name + ":" + std::to_string(lineno) +
                          ": expected 'key = value'");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
      if (section.empty())
        throw ConfigError(name + ":" + std::to_string(lineno) +
                          ": key outside of any [section]");
      auto& sec = cfg.sections_[section];
      if (sec.count(key))
        throw ConfigError(name + ":" + std::to_string(lineno) +
                          ": duplicate key '" + key + "'");
      sec[key] = Entry{value, lineno, false};
    }
    return cfg;
  }

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }

  bool has(const std::string& s, const std::string& k) const {
    const auto it = sections_.find(s);
    return it != sections_.end() && it->second.count(k) > 0;
  }

  std::optional<std::string> get_str(const std::string& s,
                                     const std::string& k) {
    auto sit = sections_.find(s);
    if (sit == sections_.end()) return std::nullopt;
    auto kit = sit->second.find(k);
    if (kit == sit->second.end()) return std::nullopt;
    kit->second.consumed = true;
    return kit->second.value;
  }

  std::string require_str(const std::string& s, const std::string& k) {
    auto v = get_str(s, k);
    if (!v)
      throw ConfigError(name_ + ": missing required key [" + s + "] " + k);
    return *v;
  }

  double require_real(const std::string& s, const std::string& k) {
    return to_real(s, k, require_str(s, k));
  }

  double get_real(const std::string& s, const std::string& k, double dflt) {
    auto v = get_str(s, k);
    return v ? to_real(s, k, *v) : dflt;
  }

  long long require_int(const std::string& s, const std::string& k) {
    return to_int(s, k, require_str(s, k));
  }

  long long get_int(const std::string& s, const std::string& k, long long dflt) {
    auto v = get_str(s, k);
    return v ? to_int(s, k, *v) : dflt;
  }

  bool get_bool(const std::string& s, const std::string& k, bool dflt) {
    auto v = get_str(s, k);
    if (!v) return dflt;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw ConfigError(key_loc(s, k) + ": expected true/false, got '" + *v + "'");
  }

  std::vector<double> get_real_list(const std::string& s, const std::string& k) {
    auto v = get_str(s, k);
    std::vector<double> out;
    if (!v) return out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ','))
      out.push_back(to_real(s, k, trim(item)));
    return out;
  }

  std::vector<std::uint64_t> get_u64_list(const std::string& s,
                                          const std::string& k) {
    auto v = get_str(s, k);
    std::vector<std::uint64_t> out;
    if (!v) return out;
    std::stringstream ss(*v);
    std::string item;
    while (std::getline(ss, item, ','))
      out.push_back(static_cast<std::uint64_t>(to_int(s, k, trim(item))));
    return out;
  }

  // Rejects any key that was never read and any section nobody looked at.
  void finish(const std::vector<std::string>& known_sections) const {
    std::vector<std::string> complaints;
    for (const auto& [sec, keys] : sections_) {
      const bool known = std::find(known_sections.begin(), known_sections.end(),
                                   sec) != known_sections.end();
      if (!known) {
        complaints.push_back("unknown section [" + sec + "]");
        continue;
      }
      for (const auto& [key, entry] : keys)
        if (!entry.consumed)
          complaints.push_back("line " + std::to_string(entry.line) +
                               ": unknown key [" + sec + "] " + key);
    }
    if (!complaints.empty()) {
      std::string msg = name_ + ": config rejected:";
      for (const std::string& c : complaints) msg += "\n  " + c;
      throw ConfigError(msg);
    }
  }

  const std::string& name() const { return name_; }

 private:
  struct Entry {
    std::string value;
    int line = 0;
    bool consumed = false;
  };

  static std::string strip_comment(const std::string& s) {
    const auto pos = s.find('#');
    return pos == std::string::npos ? s : s.substr(0, pos);
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  std::string key_loc(const std::string& s, const std::string& k) const {
    const auto sit = sections_.find(s);
    if (sit != sections_.end()) {
      const auto kit = sit->second.find(k);
      if (kit != sit->second.end())
        return name_ + ":" + std::to_string(kit->second.line);
    }
    return name_;
  }

  double to_real(const std::string& s, const std::string& k,
                 const std::string& v) const {
    try {
      std::size_t used = 0;
      const double x = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing junk");
      return x;
    } catch (const std::exception&) {
      throw ConfigError(key_loc(s, k) + ": expected a real number, got '" + v +
                        "'");
    }
  }

  long long to_int(const std::string& s, const std::string& k,
                   const std::string& v) const {
    try {
      std::size_t used = 0;
      const long long x = std::stoll(v, &used);
      if (used != v.size()) throw std::invalid_argument("trailing junk");
      return x;
    } catch (const std::exception&) {
      throw ConfigError(key_loc(s, k) + ": expected an integer, got '" + v + "'");
    }
  }

  std::string name_;
  std::map<std::string, std::map<std::string, Entry>> sections_;
};

}  // namespace cdpnes
