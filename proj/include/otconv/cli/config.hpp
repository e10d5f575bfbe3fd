#pragma once

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "otconv/core/error.hpp"

// Plain-text experiment configuration:
//
//   # comment
//   output = runs/a          <- keys before any header apply to every section
//   [gnsb]
//   n = 64
//   eps = 1e-2
//
// A run reads the top-level keys plus the section named after its
// subcommand. Every key is checked against the subcommand's schema.

namespace otconv::cli {

/// Carries every problem found, so a bad file is reported in one go.
class ConfigError : public InvalidArgument {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : InvalidArgument(join(problems)), problems_(std::move(problems)) {}

    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p) {
        std::string s = "invalid configuration:";
        for (const auto& x : p) s += "\n  " + x;
        return s;
    }
    std::vector<std::string> problems_;
};

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

struct ConfigEntry {
    std::string value;
    int line = 0;
};

/// section -> key -> entry; "" is the top level.
struct ConfigFile {
    std::map<std::string, std::map<std::string, ConfigEntry>> sections;

    void set(const std::string& section, const std::string& key, std::string value) {
        sections[section][key] = {std::move(value), 0};
    }
};

inline ConfigFile parse_config(std::istream& is) {
    ConfigFile cf;
    cf.sections[""];
    std::vector<std::string> problems;
    std::string raw, section;
    int lineno = 0;
    while (std::getline(is, raw)) {
        ++lineno;
        const auto hash = raw.find_first_of("#;");
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) {
                problems.push_back("line " + std::to_string(lineno) + ": malformed section header");
                continue;
            }
            section = trim(line.substr(1, line.size() - 2));
            cf.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty()) {
            problems.push_back("line " + std::to_string(lineno) + ": empty key");
            continue;
        }
        auto& sec = cf.sections[section];
        if (sec.count(key)) {
            problems.push_back("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
            continue;
        }
        sec[key] = {value, lineno};
    }
    if (!problems.empty()) throw ConfigError(problems);
    return cf;
}

// ---------------------------------------------------------------------------
// Schemas.

enum class KeyType { Int, Real, String, Bool, RealList };

struct KeySpec {
    std::string name;
    KeyType type = KeyType::Real;
    bool required = false;
    std::string fallback;  // default, as text
    std::string doc;
    /// Range / choice check on the parsed text; returns a message on failure.
    std::function<std::optional<std::string>(const std::string&)> check{};
};

inline std::optional<double> to_real(const std::string& s) {
    double x = 0.0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, x);
    if (r.ec != std::errc() || r.ptr != end || !std::isfinite(x)) return std::nullopt;
    return x;
}

inline std::optional<long long> to_int(const std::string& s) {
    long long x = 0;
    const auto* end = s.data() + s.size();
    const auto r = std::from_chars(s.data(), end, x);
    if (r.ec != std::errc() || r.ptr != end) return std::nullopt;
    return x;
}

inline std::optional<bool> to_bool(const std::string& s) {
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    return std::nullopt;
}

inline std::optional<std::vector<double>> to_real_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto x = to_real(trim(item));
        if (!x) return std::nullopt;
        out.push_back(*x);
    }
    if (out.empty()) return std::nullopt;
    return out;
}

inline const char* type_name(KeyType t) {
    switch (t) {
        case KeyType::Int: return "integer";
        case KeyType::Real: return "number";
        case KeyType::String: return "string";
        case KeyType::Bool: return "boolean";
        case KeyType::RealList: return "comma-separated list of numbers";
    }
    return "?";
}

inline std::optional<std::string> type_error(const KeySpec& k, const std::string& v) {
    bool ok = true;
    switch (k.type) {
        case KeyType::Int: ok = to_int(v).has_value(); break;
        case KeyType::Real: ok = to_real(v).has_value(); break;
        case KeyType::Bool: ok = to_bool(v).has_value(); break;
        case KeyType::RealList: ok = to_real_list(v).has_value(); break;
        case KeyType::String: ok = !v.empty(); break;
    }
    if (ok) return std::nullopt;
    return "'" + k.name + "': expected " + type_name(k.type) + ", got '" + v + "'";
}

// Small builders for the schema tables.

inline KeySpec real_key(std::string name, std::optional<double> fallback, double lo, double hi, std::string doc,
                        bool lo_open = false) {
    KeySpec k{name, KeyType::Real, !fallback, "", std::move(doc)};
    if (fallback) {
        char buf[32];
        const auto r = std::to_chars(buf, buf + sizeof(buf), *fallback);  // shortest round-trip form
        k.fallback.assign(buf, r.ptr);
    }
    k.check = [name, lo, hi, lo_open](const std::string& v) -> std::optional<std::string> {
        const double x = *to_real(v);
        if ((lo_open ? x <= lo : x < lo) || x > hi) {
            std::ostringstream os;
            os << "'" << name << "' = " << v << " outside " << (lo_open ? "(" : "[") << lo << ", " << hi << "]";
            return os.str();
        }
        return std::nullopt;
    };
    return k;
}

inline KeySpec int_key(std::string name, std::optional<long long> fallback, long long lo, long long hi,
                       std::string doc) {
    KeySpec k{name, KeyType::Int, !fallback, fallback ? std::to_string(*fallback) : "", std::move(doc)};
    k.check = [name, lo, hi](const std::string& v) -> std::optional<std::string> {
        const long long x = *to_int(v);
        if (x < lo || x > hi)
            return "'" + name + "' = " + v + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
        return std::nullopt;
    };
    return k;
}

inline KeySpec choice_key(std::string name, std::optional<std::string> fallback, std::vector<std::string> choices,
                          std::string doc) {
    KeySpec k{name, KeyType::String, !fallback, fallback.value_or(""), std::move(doc)};
    k.check = [name, choices](const std::string& v) -> std::optional<std::string> {
        if (std::find(choices.begin(), choices.end(), v) != choices.end()) return std::nullopt;
        std::string s = "'" + name + "' = '" + v + "' is not one of";
        for (const auto& c : choices) s += " " + c;
        return s;
    };
    return k;
}

inline KeySpec string_key(std::string name, std::optional<std::string> fallback, std::string doc) {
    return {name, KeyType::String, !fallback, fallback.value_or(""), std::move(doc)};
}

inline KeySpec bool_key(std::string name, bool fallback, std::string doc) {
    return {name, KeyType::Bool, false, fallback ? "true" : "false", std::move(doc)};
}

inline KeySpec list_key(std::string name, std::string doc) { return {name, KeyType::RealList, true, "", std::move(doc)}; }

using Schema = std::vector<KeySpec>;

// ---------------------------------------------------------------------------
// Resolved configuration with consumption tracking.

class ResolvedConfig {
public:
    ResolvedConfig(std::string subcommand, const Schema& schema, std::map<std::string, std::string> values)
        : sub_(std::move(subcommand)), values_(std::move(values)) {
        for (const auto& k : schema) types_[k.name] = k.type;
    }

    const std::string& subcommand() const { return sub_; }
    const std::map<std::string, std::string>& values() const { return values_; }
    const std::set<std::string>& consumed() const { return consumed_; }

    const std::string& text(const std::string& key) const { return lookup(key, std::nullopt); }
    std::string str(const std::string& key) const { return lookup(key, KeyType::String); }
    double real(const std::string& key) const { return *to_real(lookup(key, KeyType::Real)); }
    long long integer(const std::string& key) const { return *to_int(lookup(key, KeyType::Int)); }
    int int32(const std::string& key) const { return static_cast<int>(integer(key)); }
    std::uint64_t seed(const std::string& key) const { return static_cast<std::uint64_t>(integer(key)); }
    bool flag(const std::string& key) const { return *to_bool(lookup(key, KeyType::Bool)); }
    std::vector<double> reals(const std::string& key) const { return *to_real_list(lookup(key, KeyType::RealList)); }

private:
    const std::string& lookup(const std::string& key, std::optional<KeyType> want) const {
        const auto t = types_.find(key);
        // a module asking for a key its schema does not document is a bug
        if (t == types_.end()) throw std::logic_error("config key '" + key + "' is not in the " + sub_ + " schema");
        if (want && *want != KeyType::String && t->second != *want)
            throw std::logic_error("config key '" + key + "' read with the wrong type");
        consumed_.insert(key);
        return values_.at(key);
    }

    std::string sub_;
    std::map<std::string, std::string> values_;
    std::map<std::string, KeyType> types_;
    mutable std::set<std::string> consumed_;
};

/// Merges the top level and the subcommand's section, applies defaults and
/// checks types and ranges. Problems from every key are collected before
/// throwing.
inline ResolvedConfig resolve_keys(const std::string& sub, const Schema& schema, const ConfigFile& cf,
                                   const std::vector<std::string>& known_sections, bool include_top = true,
                                   const std::function<bool(const std::string&)>& shared = {}) {
    std::vector<std::string> problems;
    std::map<std::string, std::string> merged;
    std::map<std::string, std::string> origin;
    for (const auto& [name, _] : cf.sections)
        if (!name.empty() && std::find(known_sections.begin(), known_sections.end(), name) == known_sections.end())
            problems.push_back("unknown section [" + name + "]");
    for (const std::string& sec : {std::string(), sub}) {
        const auto it = cf.sections.find(sec);
        if (it == cf.sections.end() || (sec.empty() && !include_top)) continue;
        for (const auto& [k, e] : it->second) {
            merged[k] = e.value;
            origin[k] = sec.empty() ? "top level" : "[" + sec + "]";
            if (e.line > 0) origin[k] += " line " + std::to_string(e.line);
        }
    }
    std::map<std::string, std::string> values;
    for (const auto& k : schema) {
        const auto it = merged.find(k.name);
        if (it == merged.end()) {
            if (k.required) problems.push_back("missing required key '" + k.name + "' (" + k.doc + ")");
            else values[k.name] = k.fallback;
            continue;
        }
        if (auto e = type_error(k, it->second)) {
            problems.push_back(*e);
            continue;
        }
        if (k.check)
            if (auto e = k.check(it->second)) {
                problems.push_back(*e);
                continue;
            }
        values[k.name] = it->second;
    }
    for (const auto& [k, v] : merged) {
        const bool known = std::any_of(schema.begin(), schema.end(), [&](const KeySpec& s) { return s.name == k; });
        // a top-level key meant for other sections is not an error here
        const bool top = origin[k].rfind("top level", 0) == 0;
        if (!known && top && shared && shared(k)) continue;
        if (!known) problems.push_back("unknown key '" + k + "' (" + origin[k] + ")");
    }
    if (!problems.empty()) throw ConfigError(problems);
    return ResolvedConfig(sub, schema, std::move(values));
}

}  // namespace otconv::cli
