#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "otconv/core/error.hpp"

namespace otconv::cli {

namespace fs = std::filesystem;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string read_file(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    if (!is) throw InvalidArgument("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

inline std::string hex64(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string file_hash(const fs::path& p) { return hex64(fnv1a(read_file(p))); }

/// Write to a sibling temporary and rename over the target.
inline void write_atomic(const fs::path& target, const std::string& content) {
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw InvalidArgument("cannot write " + tmp.string());
        os << content;
        os.flush();
        if (!os) throw InvalidArgument("write failed for " + tmp.string());
    }
    fs::rename(tmp, target);
}

struct Artifact {
    std::string path;  // relative to the run directory
    std::string kind;  // diagnostics | field | cloud | profile | summary
    std::optional<double> t;
    std::string hash;
};

struct CheckResult {
    std::string name;
    bool enabled = true;
    bool passed = true;
    double value = 0.0;
    double tolerance = 0.0;
};

struct Manifest {
    std::string subcommand;
    std::map<std::string, std::string> config;
    std::vector<Artifact> artifacts;
    std::vector<CheckResult> checks;
    std::vector<std::string> warnings;
    /// Headline numbers of the run (sweeps aggregate these).
    std::map<std::string, double> metrics;
    double wall_time = 0.0;
    std::string version = OTCONV_VERSION;
    std::uint64_t seed = 0;
    int exit_code = 0;
    std::string error;

    bool checks_passed() const {
        for (const auto& c : checks)
            if (c.enabled && !c.passed) return false;
        return true;
    }
};

inline nlohmann::json to_json(const Manifest& m) {
    using nlohmann::json;
    json j;
    j["subcommand"] = m.subcommand;
    j["config"] = m.config;
    j["artifacts"] = json::array();
    for (const auto& a : m.artifacts) {
        json x{{"path", a.path}, {"kind", a.kind}, {"fnv1a", a.hash}};
        if (a.t) x["t"] = *a.t;
        j["artifacts"].push_back(x);
    }
    j["checks"] = json::array();
    for (const auto& c : m.checks)
        j["checks"].push_back(
            {{"name", c.name}, {"enabled", c.enabled}, {"passed", c.passed}, {"value", c.value}, {"tolerance", c.tolerance}});
    j["warnings"] = m.warnings;
    j["metrics"] = m.metrics;
    j["wall_time_s"] = m.wall_time;
    j["version"] = m.version;
    j["seed"] = m.seed;
    j["exit_code"] = m.exit_code;
    if (!m.error.empty()) j["error"] = m.error;
    return j;
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
    Manifest m;
    try {
        m.subcommand = j.at("subcommand").get<std::string>();
        m.config = j.at("config").get<std::map<std::string, std::string>>();
        for (const auto& a : j.at("artifacts")) {
            Artifact x{a.at("path"), a.at("kind"), std::nullopt, a.at("fnv1a")};
            if (a.contains("t")) x.t = a.at("t").get<double>();
            m.artifacts.push_back(x);
        }
        for (const auto& c : j.at("checks"))
            m.checks.push_back({c.at("name"), c.at("enabled"), c.at("passed"), c.at("value"), c.at("tolerance")});
        if (j.contains("warnings")) m.warnings = j.at("warnings").get<std::vector<std::string>>();
        if (j.contains("metrics")) m.metrics = j.at("metrics").get<std::map<std::string, double>>();
        m.wall_time = j.value("wall_time_s", 0.0);
        m.version = j.value("version", "");
        m.seed = j.value("seed", std::uint64_t(0));
        m.exit_code = j.value("exit_code", 0);
        m.error = j.value("error", "");
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

inline Manifest load_manifest(const fs::path& p) {
    try {
        return manifest_from_json(nlohmann::json::parse(read_file(p)));
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidArgument("cannot parse manifest " + p.string() + ": " + e.what());
    }
}

inline void write_manifest(const fs::path& dir, const Manifest& m) {
    write_atomic(dir / "manifest.json", to_json(m).dump(2) + "\n");
}

}  // namespace otconv::cli
