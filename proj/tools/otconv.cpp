#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "otconv/cli/commands.hpp"

using namespace otconv;
using namespace otconv::cli;

namespace {

// A config path ending in .json is taken to be a manifest from an earlier run.
ConfigFile load_config(const std::string& sub, const std::string& path) {
    if (fs::path(path).extension() == ".json") {
        const auto m = load_manifest(path);
        if (m.subcommand != sub)
            throw InvalidArgument("manifest " + path + " is from '" + m.subcommand + "', not '" + sub + "'");
        return config_from_manifest(m);
    }
    std::ifstream is(path);
    if (!is) throw InvalidArgument("cannot open config " + path);
    return parse_config(is);
}

// --set key=value goes to the subcommand's section; --set section.key=value
// addresses another section (sweeps use it for the target).
void apply_overrides(ConfigFile& cf, const std::string& sub, const std::vector<std::string>& sets) {
    std::vector<std::string> problems;
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) {
            problems.push_back("--set '" + s + "': expected key=value");
            continue;
        }
        std::string key = trim(s.substr(0, eq)), section = sub;
        if (const auto dot = key.find('.'); dot != std::string::npos) {
            section = key.substr(0, dot);
            key = key.substr(dot + 1);
        }
        // an override replaces a top-level value too
        cf.sections[""].erase(key);
        cf.set(section, key, trim(s.substr(eq + 1)));
    }
    if (!problems.empty()) throw ConfigError(problems);
}

void print_summary(const Manifest& m, const std::string& dir) {
    for (const auto& c : m.checks) {
        if (!c.enabled) continue;
        std::printf("check %-20s %s  value=%.3e tol=%.3e\n", c.name.c_str(), c.passed ? "ok  " : "FAIL", c.value,
                    c.tolerance);
    }
    for (const auto& [k, v] : m.metrics) std::printf("metric %-20s %.6e\n", k.c_str(), v);
    for (const auto& w : m.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (!m.error.empty()) std::fprintf(stderr, "error: %s\n", m.error.c_str());
    std::printf("%s: exit %d, manifest %s/manifest.json (%.2fs)\n", m.subcommand.c_str(), m.exit_code, dir.c_str(),
                m.wall_time);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"otconv: optimal-transport convection solvers"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(OTCONV_VERSION));

    std::string sub, config_path, run_a, run_b;
    std::vector<std::string> sets;
    const auto& names = subcommands();

    auto* run = app.add_subcommand("run", "run an experiment and write its manifest");
    auto* validate = app.add_subcommand("validate", "check a config and print it with defaults filled in");
    for (auto* c : {run, validate}) {
        c->add_option("subcommand", sub, "experiment kind")->required()->check(CLI::IsMember(names));
        c->add_option("config", config_path, "config file or manifest.json of an earlier run")->required();
        c->add_option("--set", sets, "override, key=value or section.key=value")->take_all();
    }
    auto* compare = app.add_subcommand("compare", "compare the snapshots of two runs");
    compare->add_option("a", run_a, "run directory or manifest")->required();
    compare->add_option("b", run_b, "run directory or manifest")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*compare) {
            const auto rep = compare_runs(run_a, run_b);
            for (const auto& d : rep.diffs) {
                if (d.t) std::printf("t=%-12.6g ", *d.t);
                else std::printf("%-14s ", d.a.c_str());
                std::printf("l2=%.6e max=%.6e\n", d.l2, d.max_abs);
            }
            std::printf("sup_t l2=%.6e max=%.6e snapshots=%zu diagnostics %s\n", rep.sup_l2, rep.max_abs,
                        rep.diffs.size(), rep.diagnostics_identical ? "identical" : "differ");
            return 0;
        }
        ConfigFile cf = load_config(sub, config_path);
        apply_overrides(cf, sub, sets);
        const auto rc = resolve(sub, cf);
        if (*validate) {
            std::cout << echo_config(rc);
            if (sub == "sweep")
                for (const auto& r : sweep_runs(rc, cf)) std::cout << '\n' << echo_config(r);
            return 0;
        }
        const Manifest m = sub == "sweep" ? execute_sweep(rc, cf, workers_from_env()) : execute(rc);
        print_summary(m, rc.str("output"));
        return m.exit_code;
    } catch (const InvalidArgument& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    } catch (const SolverError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 4;
    }
}
