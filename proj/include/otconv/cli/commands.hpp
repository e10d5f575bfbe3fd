#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <climits>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "otconv/aht/aht.hpp"
#include "otconv/aht/jko.hpp"
#include "otconv/cli/config.hpp"
#include "otconv/cli/manifest.hpp"
#include "otconv/core/stats.hpp"
#include "otconv/crossburgers/crossburgers.hpp"
#include "otconv/ghb/ghb.hpp"
#include "otconv/gnsb/gnsb.hpp"
#include "otconv/grid/io.hpp"
#include "otconv/rearrange/io.hpp"

namespace otconv::cli {

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s{"rearrange", "aht", "jko", "gnsb", "hf", "ghb", "crossburgers", "sweep"};
    return s;
}

// ---------------------------------------------------------------------------
// Schemas.

inline constexpr double kBig = 1e12;

namespace keys {

inline void common(Schema& s, bool with_stride = true) {
    s.push_back(string_key("output", std::nullopt, "run directory"));
    s.push_back(int_key("seed", 1, 0, LLONG_MAX, "seed of the LCG behind the random presets"));
    if (with_stride)
        s.push_back(int_key("stride", 0, 0, INT_MAX, "snapshot every stride steps; 0 keeps the initial and final states"));
}

inline void grid(Schema& s, const std::string& K) {
    s.push_back(choice_key("domain", "torus", {"torus", "box"}, "domain kind"));
    s.push_back(int_key("n", std::nullopt, 1, 4096, "grid points per axis"));
    s.push_back(int_key("d", 2, 1, 2, "dimension"));
    s.push_back(choice_key("K", K, {"none", "identity", "neg_laplacian"}, "dissipation operator"));
}

inline void preset(Schema& s) {
    s.push_back(choice_key("preset", "random_smooth", y_preset_names(), "initial data y0"));
    s.push_back(real_key("amplitude", 1.0, -kBig, kBig, "preset amplitude"));
    s.push_back(real_key("gravity", 1.0, -kBig, kBig, "darcy preset gravity"));
    s.push_back(real_key("perturbation", 0.1, -kBig, kBig, "darcy preset perturbation"));
    s.push_back(int_key("max_mode", 2, 1, 64, "random_smooth largest wavenumber"));
    s.push_back(int_key("mode", 1, 1, 2048, "mode preset wavenumber"));
}

inline void horizon(Schema& s, const char* step) {
    s.push_back(real_key("T", std::nullopt, 0.0, kBig, "final time", true));
    s.push_back(real_key(step, std::nullopt, 0.0, kBig, "time step", true));
}

inline void cloud(Schema& s, long long max_n, double amplitude) {
    s.push_back(int_key("n", std::nullopt, 1, max_n, "atoms per axis on the box"));
    s.push_back(int_key("d", 2, 1, 2, "dimension"));
    s.push_back(choice_key("initial", "random", {"identity", "shear", "random"}, "initial values on the atoms"));
    s.push_back(real_key("amplitude", amplitude, -kBig, kBig, "displacement amplitude of the initial values"));
}

inline void assignment(Schema& s) {
    s.push_back(choice_key("method", "auto", {"auto", "exact", "auction"}, "assignment solver"));
    s.push_back(real_key("epsilon_final", 0.0, 0.0, kBig, "final auction epsilon (0: automatic)"));
}

inline void forcing(Schema& s) {
    s.push_back(choice_key("forcing", "hookean", {"hookean", "model1", "model2", "model3"}, "forcing preset"));
    s.push_back(real_key("kappa", 1.0, 0.0, kBig, "spring stiffness", true));
    s.push_back(real_key("r_clip", 0.0, 0.0, kBig, "elongation clip radius (0: 10 sqrt(d))"));
    s.push_back(real_key("lambda_contrast", 0.0, -1.0, 1.0, "contrast of the density lambda(a)"));
    s.push_back(real_key("mu_contrast", 0.0, -1.0, 1.0, "contrast of the density mu(a)"));
    s.push_back(real_key("carrier_w1", 0.0, -kBig, kBig, "carrier velocity, first component"));
    s.push_back(real_key("carrier_w2", 0.0, -kBig, kBig, "carrier velocity, second component"));
    s.push_back(real_key("carrier_omega", 0.0, -kBig, kBig, "carrier rotation rate (2D)"));
}

}  // namespace keys

inline Schema schema_for(const std::string& sub) {
    Schema s;
    if (sub == "rearrange") {
        keys::common(s, false);
        keys::cloud(s, 4096, 0.25);
        keys::assignment(s);
        s.push_back(real_key("monotonicity_tol", 1e-10, 0.0, 1.0, "cyclical monotonicity tolerance"));
    } else if (sub == "aht") {
        keys::common(s);
        keys::grid(s, "neg_laplacian");
        keys::preset(s);
        keys::horizon(s, "dt");
        s.push_back(real_key("cfl_target", 0.0, 0.0, 1.0, "adaptive step CFL target (0: fixed dt)"));
        s.push_back(choice_key("scheme", "splitting", {"splitting", "midpoint"}, "time stepper"));
        s.push_back(real_key("energy_tol", 1e-8, 0.0, kBig, "allowed relative per-step transport-cost increase"));
    } else if (sub == "jko") {
        keys::common(s);
        keys::cloud(s, 64, 0.25);
        keys::assignment(s);
        s.push_back(real_key("h", std::nullopt, 0.0, kBig, "minimizing-movement step", true));
        s.push_back(int_key("steps", std::nullopt, 1, 10000000, "number of steps"));
    } else if (sub == "gnsb" || sub == "hf") {
        keys::common(s);
        keys::grid(s, "identity");
        if (sub == "gnsb") s.push_back(real_key("eps", std::nullopt, 0.0, kBig, "inertia parameter", true));
        keys::forcing(s);
        keys::preset(s);
        keys::horizon(s, "dt");
        s.push_back(bool_key("remove_mean", true, "remove the mean velocity"));
        if (sub == "gnsb") {
            s.push_back(choice_key("scheme", "splitting", {"splitting", "strang"}, "time stepper"));
            s.push_back(bool_key("hf_reference", false, "run the zero-inertia system alongside and report y_err_vs_hf"));
            s.push_back(real_key("energy_tol", 1e-6, 0.0, kBig, "allowed energy-inequality excess per step"));
        } else {
            s.push_back(real_key("divergence_tol", 1e-6, 0.0, kBig, "allowed max |div v|"));
        }
    } else if (sub == "ghb") {
        keys::common(s);
        s.push_back(int_key("n", std::nullopt, 2, 64, "atoms per axis on the box"));
        s.push_back(int_key("d", 2, 1, 2, "dimension"));
        s.push_back(choice_key("forcing", "rotate", {"zero", "contract", "expand", "rotate"}, "forcing preset"));
        s.push_back(real_key("kappa", 1.0, 0.0, kBig, "forcing strength", true));
        s.push_back(choice_key("initial", "shear", {"identity", "shear", "random"}, "initial values on the atoms"));
        s.push_back(real_key("amplitude", 0.25, -kBig, kBig, "displacement amplitude of the initial values"));
        keys::horizon(s, "h");
        keys::assignment(s);
        s.push_back(bool_key("rearrange_initial", true, "start from the rearranged initial data"));
        s.push_back(real_key("monotonicity_tol", 1e-10, 0.0, 1.0, "cyclical monotonicity tolerance"));
    } else if (sub == "crossburgers") {
        keys::common(s);
        s.push_back(int_key("n", std::nullopt, 8, 1 << 20, "samples in s (power of two)"));
        keys::horizon(s, "dt");
        s.push_back(choice_key("initial", "family", {"family", "constant", "mode", "random"}, "initial profile"));
        s.push_back(real_key("alpha0", 1.0, 0.0, kBig, "family: initial alpha"));
        s.push_back(real_key("beta0", 0.0, -kBig, kBig, "family: initial beta"));
        s.push_back(real_key("amplitude", 1.0, -kBig, kBig, "constant/mode/random amplitude"));
        s.push_back(int_key("mode", 1, 0, 1 << 19, "mode preset wavenumber"));
        s.push_back(choice_key("scheme", "ifrk4", {"ifrk4", "rk2"}, "time stepper"));
        s.push_back(bool_key("cross_term", true, "include the cross term"));
        s.push_back(bool_key("viscous", true, "include the second derivative"));
        s.push_back(real_key("family_tol", 1e-4, 0.0, kBig, "allowed relative L2 error against the special family"));
        s.push_back(real_key("decay_tol", 1e-5, 0.0, kBig, "allowed L2 decay-identity residual"));
    } else if (sub == "sweep") {
        s.push_back(string_key("output", std::nullopt, "sweep directory"));
        s.push_back(choice_key("target", std::nullopt,
                               {"rearrange", "aht", "jko", "gnsb", "hf", "ghb", "crossburgers"}, "subcommand to sweep"));
        s.push_back(string_key("key", std::nullopt, "key of the target to vary"));
        s.push_back(list_key("values", "values of the key"));
    } else {
        throw InvalidArgument("unknown subcommand '" + sub + "'");
    }
    return s;
}

// ---------------------------------------------------------------------------
// Config -> module settings.

inline DomainKind domain_of(const ResolvedConfig& c) {
    return c.str("domain") == "box" ? DomainKind::Box : DomainKind::Torus;
}

inline YPreset preset_of(const ResolvedConfig& c) {
    YPreset p;
    p.name = c.str("preset");
    p.amplitude = c.real("amplitude");
    p.gravity = c.real("gravity");
    p.perturbation = c.real("perturbation");
    p.max_mode = c.int32("max_mode");
    p.mode = c.int32("mode");
    p.seed = c.seed("seed");
    return p;
}

inline ForcingSpec forcing_of(const ResolvedConfig& c) {
    ForcingSpec f;
    f.kind = parse_forcing_kind(c.str("forcing"));
    f.kappa = c.real("kappa");
    f.r_clip = c.real("r_clip");
    f.lambda.contrast = c.real("lambda_contrast");
    f.mu.contrast = c.real("mu_contrast");
    f.carrier.w = {c.real("carrier_w1"), c.real("carrier_w2")};
    f.carrier.omega = c.real("carrier_omega");
    return f;
}

inline RearrangeOptions assignment_of(const ResolvedConfig& c) {
    RearrangeOptions o;
    const auto m = c.str("method");
    o.method = m == "exact" ? AssignMethod::Exact : m == "auction" ? AssignMethod::Auction : AssignMethod::Auto;
    o.auction.epsilon_final = c.real("epsilon_final");
    return o;
}

/// Atom cloud settings shared by rearrange and jko.
inline CRRunConfig cloud_of(const ResolvedConfig& c) {
    CRRunConfig cc;
    cc.dim = c.int32("d");
    cc.n = c.int32("n");
    cc.initial = c.str("initial");
    cc.amplitude = c.real("amplitude");
    cc.seed = c.seed("seed");
    return cc;
}

inline AHTRunConfig aht_of(const ResolvedConfig& c) {
    AHTRunConfig a;
    a.domain = domain_of(c);
    a.dim = c.int32("d");
    a.n = c.int32("n");
    a.K = parse_dissipation(c.str("K"));
    a.preset = preset_of(c);
    a.T = c.real("T");
    a.dt = c.real("dt");
    a.cfl_target = c.real("cfl_target");
    a.scheme = parse_aht_scheme(c.str("scheme"));
    a.energy_rel_tol = c.real("energy_tol");
    return a;
}

inline GNSBRunConfig gnsb_of(const ResolvedConfig& c) {
    const bool hf = c.subcommand() == "hf";
    GNSBRunConfig g;
    g.domain = domain_of(c);
    g.dim = c.int32("d");
    g.n = c.int32("n");
    g.K = parse_dissipation(c.str("K"));
    g.zero_inertia = hf;
    g.eps = hf ? 0.0 : c.real("eps");
    g.forcing = forcing_of(c);
    g.preset = preset_of(c);
    g.T = c.real("T");
    g.dt = c.real("dt");
    g.options.remove_mean_velocity = c.flag("remove_mean");
    if (!hf) g.options.scheme = parse_gnsb_scheme(c.str("scheme"));
    return g;
}

inline CRRunConfig cr_of(const ResolvedConfig& c) {
    CRRunConfig r;
    r.dim = c.int32("d");
    r.n = c.int32("n");
    r.forcing.kind = parse_ghb_forcing(c.str("forcing"));
    r.forcing.kappa = c.real("kappa");
    r.initial = c.str("initial");
    r.amplitude = c.real("amplitude");
    r.seed = c.seed("seed");
    r.T = c.real("T");
    r.h = c.real("h");
    r.rearrange = assignment_of(c);
    r.rearrange_initial = c.flag("rearrange_initial");
    r.trajectory_stride = 0;
    r.monotonicity_tol = c.real("monotonicity_tol");
    return r;
}

inline CBRunConfig cb_of(const ResolvedConfig& c) {
    CBRunConfig b;
    b.n = c.int32("n");
    b.T = c.real("T");
    b.dt = c.real("dt");
    b.initial = c.str("initial");
    b.alpha0 = c.real("alpha0");
    b.beta0 = c.real("beta0");
    b.amplitude = c.real("amplitude");
    b.mode = c.int32("mode");
    b.seed = c.seed("seed");
    b.options.scheme = parse_cb_scheme(c.str("scheme"));
    b.options.cross_term = c.flag("cross_term");
    b.options.viscous = c.flag("viscous");
    return b;
}

// ---------------------------------------------------------------------------
// Cross-module constraints, checked before anything runs.

inline std::vector<std::string> cross_checks(const ResolvedConfig& c) {
    std::vector<std::string> problems;
    auto attempt = [&](auto&& f) {
        try {
            f();
        } catch (const InvalidArgument& e) {
            problems.push_back(e.what());
        }
    };
    const auto& sub = c.subcommand();
    if (sub == "rearrange" || sub == "jko") {
        attempt([&] { make_cr_initial(cloud_of(c)); });
    } else if (sub == "aht") {
        attempt([&] {
            const auto a = aht_of(c);
            const Grid g = make_grid(a.domain, a.dim, a.n);
            require_dissipative(g, a.K, "aht");
            make_initial_y(g, a.preset);
        });
    } else if (sub == "gnsb" || sub == "hf") {
        const auto g = gnsb_of(c);
        attempt([&] { validate_forcing(g.forcing, g.dim); });
        attempt([&] {
            const Grid grid = make_grid(g.domain, g.dim, g.n);
            require(!(grid.is_box() && g.K != DissipationKind::Identity), sub + ": box runs need K = identity");
            require(!(grid.is_box() && g.dim != 2), sub + ": box runs need d = 2");
            if (g.zero_inertia || (sub == "gnsb" && c.flag("hf_reference")))
                require(g.K != DissipationKind::None, sub + ": the zero-inertia system needs K != none");
            if (g.forcing.kind == ForcingKind::Model3 && g.dim != 2) return;  // already reported
            make_gnsb_initial_y(grid, g.forcing, g.preset);
        });
    } else if (sub == "ghb") {
        const auto r = cr_of(c);
        attempt([&] { validate_ghb_forcing(r.forcing, r.dim); });
        attempt([&] { make_cr_initial(r); });
    } else if (sub == "crossburgers") {
        const auto b = cb_of(c);
        attempt([&] { make_cb_initial(b); });
        attempt([&] {
            const double kmax = b.n / 2.0;
            require(!(b.options.scheme == CBScheme::ExplicitRK2 && b.options.viscous && b.dt * kmax * kmax > 2.0),
                    "crossburgers: rk2 needs dt (n/2)^2 <= 2");
        });
    }
    return problems;
}

inline std::vector<std::string> known_sections() { return subcommands(); }

/// Full validation: schema, ranges, then cross-module constraints.
inline ResolvedConfig resolve(const std::string& sub, const ConfigFile& cf) {
    const Schema schema = schema_for(sub);
    auto shared = [](const std::string& key) {
        for (const auto& other : subcommands()) {
            if (other == "sweep") continue;
            const auto sc = schema_for(other);
            if (std::any_of(sc.begin(), sc.end(), [&](const KeySpec& k) { return k.name == key; })) return true;
        }
        return false;
    };
    ResolvedConfig rc = resolve_keys(sub, schema, cf, known_sections(), sub != "sweep", shared);
    if (sub == "sweep") {
        const auto target = schema_for(rc.str("target"));
        const auto key = rc.str("key");
        const bool ok = key != "output" &&
                        std::any_of(target.begin(), target.end(), [&](const KeySpec& k) { return k.name == key; });
        if (!ok) throw ConfigError({"'key' = '" + key + "' is not a sweepable key of " + rc.str("target")});
        return rc;
    }
    auto problems = cross_checks(rc);
    if (!problems.empty()) throw ConfigError(problems);
    return ResolvedConfig(sub, schema, rc.values());  // fresh consumption record
}

/// The resolved config as a config file, defaults filled in.
inline std::string echo_config(const ResolvedConfig& c) {
    std::ostringstream os;
    os << '[' << c.subcommand() << "]\n";
    for (const auto& k : schema_for(c.subcommand())) os << k.name << " = " << c.values().at(k.name) << '\n';
    return os.str();
}

// ---------------------------------------------------------------------------
// Runs.

class RunWriter {
public:
    RunWriter(fs::path dir, Manifest& m) : dir_(std::move(dir)), m_(m) {}

    const fs::path& dir() const { return dir_; }

    std::ofstream open(const std::string& rel, const std::string& kind, std::optional<double> t = std::nullopt) {
        std::ofstream os(dir_ / rel, std::ios::binary | std::ios::trunc);
        if (!os) throw InvalidArgument("cannot write " + (dir_ / rel).string());
        m_.artifacts.push_back({rel, kind, t, ""});
        return os;
    }

    void field(const std::string& prefix, long long index, const Field& f, double t, const std::string& kind = "field") {
        auto os = open(snapshot_name(prefix, index), kind, t);
        write_field(os, f, t);
    }

    void cloud(const std::string& prefix, long long index, const LagrangianCloud& c, double t) {
        auto os = open(snapshot_name(prefix, index), "cloud", t);
        write_cloud(os, c);
    }

    void check(std::string name, bool enabled, bool passed, double value, double tol) {
        m_.checks.push_back({std::move(name), enabled, passed, value, tol});
    }

    void metric(const std::string& name, double v) {
        if (std::isfinite(v)) m_.metrics[name] = v;
    }

    void warn(const std::string& w) { m_.warnings.push_back(w); }

private:
    static std::string snapshot_name(const std::string& prefix, long long index) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%s_%06lld.txt", prefix.c_str(), index);
        return buf;
    }

    fs::path dir_;
    Manifest& m_;
};

inline bool snapshot_due(long long k, long long stride, long long last) {
    return k == 0 || k == last || (stride > 0 && k % stride == 0);
}

inline void run_rearrange(const ResolvedConfig& c, RunWriter& w) {
    const auto y = make_cr_initial(cloud_of(c));
    const auto pf = polar_factorize(y, assignment_of(c));
    {
        auto os = w.open("initial.txt", "cloud");
        write_cloud(os, y);
    }
    {
        auto os = w.open("rearranged.txt", "cloud");
        write_assignment(os, pf.rearranged, pf.assignment);
    }
    const double tol = c.real("monotonicity_tol");
    const auto mono = cyclical_monotonicity_check(pf.rearranged, 2000, 6, tol, c.seed("seed"));
    auto a = y.values(), b = pf.rearranged.values();
    // values are moved as whole vectors, so comparing sorted coordinates per axis suffices
    const int m = y.value_dim();
    bool same = true;
    for (int k = 0; k < m && same; ++k) {
        std::vector<double> ca, cb;
        for (std::size_t i = 0; i < y.size(); ++i) ca.push_back(a[i * m + k]), cb.push_back(b[i * m + k]);
        std::sort(ca.begin(), ca.end());
        std::sort(cb.begin(), cb.end());
        same = ca == cb;
    }
    {
        auto os = w.open("diagnostics.csv", "diagnostics");
        os << "atoms,cost,monotonicity_worst,values_preserved\n"
           << y.size() << ',' << format_real(pf.assignment.cost) << ',' << format_real(mono.worst_violation) << ','
           << (same ? 1 : 0) << '\n';
    }
    w.check("monotonicity", true, mono.passed, mono.worst_violation, tol);
    w.check("values_preserved", true, same, same ? 0.0 : 1.0, 0.0);
    w.metric("cost", pf.assignment.cost / double(y.size()));
}

inline void run_aht(const ResolvedConfig& c, RunWriter& w) {
    auto cfg = aht_of(c);
    const long long stride = c.integer("stride");
    cfg.snapshot_stride = stride > 0 ? int(stride) : INT_MAX;
    long long index = 0;
    double last_t = -1.0;
    auto csv = w.open("diagnostics.csv", "diagnostics");
    const auto res = aht_run(cfg, &csv, [&](const Field& y, double t) {
        w.field("y", index++, y, t);
        last_t = t;
    });
    if (last_t != res.final_state.t) w.field("y", index++, res.final_state.y, res.final_state.t);
    for (const auto& x : res.warnings) w.warn(x);
    w.check("energy_decay", true, res.energy_violations == 0, res.worst_rel_increase, cfg.energy_rel_tol);
    w.metric("transport_cost", res.rows.back().transport_cost);
    w.metric("worst_rel_increase", res.worst_rel_increase);
}

inline void run_jko(const ResolvedConfig& c, RunWriter& w) {
    const auto opt = assignment_of(c);
    auto s = make_jko_state(make_cr_initial(cloud_of(c)), c.real("h"));
    const long long steps = c.integer("steps"), stride = c.integer("stride");
    auto positions = [](const JKOState& st) {
        const auto& d = st.data;
        std::vector<double> v(d.size() * d.dim());
        for (std::size_t i = 0; i < d.size(); ++i)
            for (int a = 0; a < d.dim(); ++a) v[i * d.dim() + a] = d.atom(st.X[i])[a];
        return d.with_values(std::move(v));
    };
    auto csv = w.open("diagnostics.csv", "diagnostics");
    csv << "step,t,energy,objective_change\n";
    csv << 0 << ',' << 0 << ',' << format_real(jko_energy(s)) << ",\n";
    w.cloud("positions", 0, positions(s), 0.0);
    double worst = -std::numeric_limits<double>::infinity();
    for (long long k = 1; k <= steps; ++k) {
        auto next = jko_aht_step(s, opt);
        const double change = jko_objective(s, next.X) - jko_objective(s, s.X);
        worst = std::max(worst, change);
        s = std::move(next);
        const double t = double(k) * s.h;
        csv << k << ',' << format_real(t) << ',' << format_real(jko_energy(s)) << ',' << format_real(change) << '\n';
        if (snapshot_due(k, stride, steps)) w.cloud("positions", k, positions(s), t);
    }
    w.check("objective_descent", true, worst <= 0.0, worst, 0.0);
    w.metric("energy", jko_energy(s));
}

inline void run_gnsb(const ResolvedConfig& c, RunWriter& w) {
    const auto cfg = gnsb_of(c);
    const bool hf = cfg.zero_inertia;
    auto csv = w.open("diagnostics.csv", "diagnostics");
    if (!hf && c.flag("hf_reference")) {
        (void)c.integer("stride");  // no snapshots in this mode
        const auto e = sqrt_eps_single(cfg, cfg.eps);
        csv << gnsb_csv_header() << '\n';
        for (const auto& r : e.rows) write_csv_row(csv, r);
        for (const auto& x : e.warnings) w.warn(x);
        const double tol = c.real("energy_tol");
        w.check("energy_inequality", true, e.max_excess <= tol, e.max_excess, tol);
        w.metric("y_sup_err", e.y_sup_err);
        w.metric("v_l2t_err", e.v_l2t_err);
        w.metric("total_energy", e.rows.back().total_energy);
        return;
    }
    auto run_cfg = cfg;
    const long long stride = c.integer("stride");
    const long long steps = std::llround(cfg.T / cfg.dt);
    run_cfg.snapshot_stride = stride > 0 ? int(std::min<long long>(stride, INT_MAX)) : INT_MAX;
    long long index = 0;
    double last_t = -1.0;
    const auto res = gnsb_run(run_cfg, &csv, [&](const Field& y, double t) {
        w.field("y", index++, y, t);
        last_t = t;
    });
    if (last_t != res.final_state.t) w.field("y", index++, res.final_state.y, res.final_state.t);
    (void)steps;
    for (const auto& x : res.warnings) w.warn(x);
    if (hf) {
        const double tol = c.real("divergence_tol");
        w.check("divergence", true, res.max_divergence <= tol, res.max_divergence, tol);
    } else {
        const double tol = c.real("energy_tol");
        w.check("energy_inequality", true, res.max_excess <= tol, res.max_excess, tol);
    }
    w.metric("total_energy", res.rows.back().total_energy);
    w.metric("max_excess", res.max_excess);
}

inline void run_ghb(const ResolvedConfig& c, RunWriter& w) {
    const auto cfg = cr_of(c);
    const long long stride = c.integer("stride");
    const long long steps = std::llround(cfg.T / cfg.h);
    auto csv = w.open("diagnostics.csv", "diagnostics");
    const auto res = cr_run(cfg, &csv, [&](const CRState& s) {
        if (snapshot_due(s.step, stride, steps)) w.cloud("Y", s.step, s.cloud, s.t);
    });
    for (const auto& x : res.warnings) w.warn(x);
    w.check("monotonicity", true, res.all_monotone, res.worst_monotonicity, cfg.monotonicity_tol);
    double margin = std::numeric_limits<double>::infinity();
    for (const auto& r : res.rows)
        if (!std::isnan(r.bound_margin)) margin = std::min(margin, r.bound_margin);
    w.check("growth_bound", true, res.bound_held, std::isfinite(margin) ? margin : 0.0, 0.0);
    w.metric("weak_residual", res.worst_weak_residual);
    w.metric("weak_residual_over_h", res.worst_weak_residual / cfg.h);
}

inline void run_crossburgers(const ResolvedConfig& c, RunWriter& w) {
    const auto cfg = cb_of(c);
    const long long stride = c.integer("stride");
    const long long steps = std::llround(cfg.T / cfg.dt);
    auto csv = w.open("diagnostics.csv", "diagnostics");
    const auto res = cb_run(cfg, &csv, [&](const CrossBurgersState& s) {
        const long long k = std::llround(s.t / cfg.dt);
        if (snapshot_due(k, stride, steps)) w.field("B", k, s.B, s.t, "profile");
    });
    const double ftol = c.real("family_tol"), dtol = c.real("decay_tol");
    w.check("family_error", res.tracks_family, !res.tracks_family || res.max_err_vs_family <= ftol,
            res.tracks_family ? res.max_err_vs_family : 0.0, ftol);
    w.check("decay_identity", true, res.max_decay_residual <= dtol, res.max_decay_residual, dtol);
    w.metric("l2", res.rows.back().l2);
    w.metric("decay_residual", res.max_decay_residual);
    if (res.tracks_family) w.metric("err_vs_family", res.max_err_vs_family);
}

/// Runs one (non-sweep) configuration into its output directory and writes
/// the manifest. Solver failures are recorded, not thrown.
inline Manifest execute(const ResolvedConfig& c) {
    const auto t0 = std::chrono::steady_clock::now();
    Manifest m;
    m.subcommand = c.subcommand();
    m.config = c.values();
    const fs::path dir = c.str("output");
    m.seed = c.seed("seed");
    fs::create_directories(dir);
    RunWriter w(dir, m);
    try {
        const auto& s = c.subcommand();
        if (s == "rearrange") run_rearrange(c, w);
        else if (s == "aht") run_aht(c, w);
        else if (s == "jko") run_jko(c, w);
        else if (s == "gnsb" || s == "hf") run_gnsb(c, w);
        else if (s == "ghb") run_ghb(c, w);
        else if (s == "crossburgers") run_crossburgers(c, w);
        else throw InvalidArgument("execute: unsupported subcommand " + s);
        m.exit_code = m.checks_passed() ? 0 : 1;
    } catch (const SolverError& e) {
        m.exit_code = 3;
        m.error = e.what();
    } catch (const InvalidArgument& e) {
        m.exit_code = 2;
        m.error = e.what();
    }
    for (auto& a : m.artifacts)
        if (fs::exists(dir / a.path)) a.hash = file_hash(dir / a.path);
    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(dir, m);
    return m;
}

// ---------------------------------------------------------------------------
// Sweeps.

inline int workers_from_env() {
    const char* v = std::getenv("OTCONV_WORKERS");
    const int hw = int(std::max(1u, std::thread::hardware_concurrency()));
    if (!v || !*v) return hw;
    const auto n = to_int(v);
    if (!n || *n < 1) throw ConfigError({std::string("OTCONV_WORKERS = '") + v + "' must be a positive integer"});
    return int(std::min<long long>(*n, 1024));
}

inline std::string headline_metric(const std::string& target, const Manifest& m) {
    auto has = [&](const char* k) { return m.metrics.count(k) > 0; };
    if (target == "gnsb" && has("y_sup_err")) return "y_sup_err";
    if (target == "crossburgers" && has("err_vs_family")) return "err_vs_family";
    static const std::map<std::string, std::string> fallback{
        {"rearrange", "cost"}, {"aht", "transport_cost"}, {"jko", "energy"}, {"gnsb", "total_energy"},
        {"hf", "total_energy"}, {"ghb", "weak_residual_over_h"}, {"crossburgers", "decay_residual"}};
    return fallback.at(target);
}

inline std::string format_value(const KeySpec& k, double v) {
    if (k.type == KeyType::Int) return std::to_string(std::llround(v));
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline const KeySpec& sweep_key_spec(const ResolvedConfig& sw, const Schema& schema) {
    const auto key = sw.str("key");
    return *std::find_if(schema.begin(), schema.end(), [&](const KeySpec& k) { return k.name == key; });
}

/// The target config of every sweep value, all validated; problems from
/// every value are reported together.
inline std::vector<ResolvedConfig> sweep_runs(const ResolvedConfig& sw, const ConfigFile& cf) {
    const std::string target = sw.str("target"), key = sw.str("key");
    const fs::path dir = sw.str("output");
    const auto schema = schema_for(target);
    const auto& spec = sweep_key_spec(sw, schema);
    const auto values = sw.reals("values");
    std::vector<ResolvedConfig> runs;
    std::vector<std::string> problems;
    for (std::size_t i = 0; i < values.size(); ++i) {
        ConfigFile ci = cf;
        ci.sections.erase("sweep");
        ci.set(target, key, format_value(spec, values[i]));
        ci.set(target, "output", (dir / (key + "_" + std::to_string(i))).string());
        if (target == "gnsb" && key == "eps") ci.set(target, "hf_reference", "true");
        try {
            runs.push_back(resolve(target, ci));
        } catch (const ConfigError& e) {
            for (const auto& p : e.problems()) problems.push_back(key + " = " + format_value(spec, values[i]) + ": " + p);
        }
    }
    if (!problems.empty()) throw ConfigError(problems);
    return runs;
}

/// One run per value, each in `<output>/<key>_<index>` with its own manifest,
/// then `summary.csv` and a sweep manifest carrying the log-log rate of the
/// headline metric against the swept value.
inline Manifest execute_sweep(const ResolvedConfig& sw, const ConfigFile& cf, int workers) {
    const auto t0 = std::chrono::steady_clock::now();
    auto runs = sweep_runs(sw, cf);  // validate every run before starting any
    const std::string target = sw.str("target"), key = sw.str("key");
    const auto values = sw.reals("values");
    const fs::path dir = sw.str("output");
    const auto schema = schema_for(target);
    const auto& spec = sweep_key_spec(sw, schema);

    fs::create_directories(dir);
    std::vector<Manifest> results(runs.size());
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t nw = std::min<std::size_t>(runs.size(), std::size_t(std::max(1, workers)));
    for (std::size_t t = 0; t < nw; ++t)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < runs.size(); i = next++) results[i] = execute(runs[i]);
        });
    for (auto& t : pool) t.join();

    Manifest m;
    m.subcommand = "sweep";
    m.config = sw.values();
    for (const auto& [sec, entries] : cf.sections)
        if (sec == target || sec.empty())
            for (const auto& [k, e] : entries) m.config[target + "." + k] = e.value;
    RunWriter w(dir, m);
    const std::string metric = headline_metric(target, results.front());
    std::vector<double> xs, ys;
    bool rate_ok = true;
    {
        auto os = w.open("summary.csv", "summary");
        os << "index," << key << ",exit_code," << metric << '\n';
        for (std::size_t i = 0; i < results.size(); ++i) {
            const auto it = results[i].metrics.find(metric);
            os << i << ',' << format_value(spec, values[i]) << ',' << results[i].exit_code << ',';
            if (it != results[i].metrics.end()) {
                os << format_real(it->second);
                xs.push_back(values[i]);
                ys.push_back(it->second);
                rate_ok = rate_ok && values[i] > 0.0 && it->second > 0.0;
            } else {
                rate_ok = false;
            }
            os << '\n';
            m.artifacts.push_back({(fs::path(key + "_" + std::to_string(i)) / "manifest.json").string(), "manifest",
                                   std::nullopt, ""});
            m.warnings.insert(m.warnings.end(), results[i].warnings.begin(), results[i].warnings.end());
        }
    }
    if (rate_ok && xs.size() >= 2) w.metric("rate_" + metric, loglog_slope(xs, ys));
    int code = 0;
    for (const auto& r : results) {
        const int rank = r.exit_code == 3 ? 3 : r.exit_code == 2 ? 2 : r.exit_code == 1 ? 1 : 0;
        if ((rank == 3) || (rank == 2 && code != 3) || (rank == 1 && code == 0)) code = rank;
    }
    m.exit_code = code;
    for (auto& a : m.artifacts)
        if (fs::exists(dir / a.path)) a.hash = file_hash(dir / a.path);
    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(dir, m);
    return m;
}

/// Rebuilds a config file from a manifest, so a run can be repeated.
inline ConfigFile config_from_manifest(const Manifest& m) {
    ConfigFile cf;
    cf.sections[""];
    for (const auto& [k, v] : m.config) {
        const auto dot = k.find('.');
        if (m.subcommand == "sweep" && dot != std::string::npos) {
            const auto sec = k.substr(0, dot);
            // the top level of the original file was folded into the target section
            cf.set(sec, k.substr(dot + 1), v);
        } else {
            cf.set(m.subcommand, k, v);
        }
    }
    return cf;
}

// ---------------------------------------------------------------------------
// Comparison of two runs.

struct SnapshotDiff {
    std::string a, b;
    std::optional<double> t;
    double l2 = 0.0;
    double max_abs = 0.0;
};

struct CompareReport {
    std::vector<SnapshotDiff> diffs;
    double sup_l2 = 0.0;
    double max_abs = 0.0;
    bool diagnostics_identical = false;
};

inline fs::path run_dir(const fs::path& p) { return fs::is_directory(p) ? p : p.parent_path(); }

inline SnapshotDiff diff_snapshot(const fs::path& pa, const fs::path& pb, const std::string& kind) {
    SnapshotDiff d;
    d.a = pa.filename().string();
    d.b = pb.filename().string();
    std::ifstream ia(pa), ib(pb);
    if (!ia || !ib) throw InvalidArgument("compare: cannot open " + pa.string() + " or " + pb.string());
    if (kind == "cloud") {
        const auto a = read_cloud(ia), b = read_cloud(ib);
        if (a.size() != b.size() || a.dim() != b.dim() || a.value_dim() != b.value_dim() || a.atoms() != b.atoms())
            throw InvalidArgument("compare: shape mismatch between " + pa.string() + " and " + pb.string());
        d.l2 = a.l2_distance(b);
        for (std::size_t i = 0; i < a.values().size(); ++i)
            d.max_abs = std::max(d.max_abs, std::abs(a.values()[i] - b.values()[i]));
    } else {
        const auto a = read_field(ia), b = read_field(ib);
        if (!(a.field.grid() == b.field.grid()) || a.field.rank() != b.field.rank())
            throw InvalidArgument("compare: shape mismatch between " + pa.string() + " (" +
                                  std::string(to_string(a.field.grid().kind())) + " n=" +
                                  std::to_string(a.field.grid().n()) + ") and " + pb.string() + " (" +
                                  std::string(to_string(b.field.grid().kind())) + " n=" +
                                  std::to_string(b.field.grid().n()) + ")");
        d.l2 = l2_distance(a.field, b.field);
        d.max_abs = max_abs(a.field - b.field);
    }
    return d;
}

/// Pairs snapshots of the same kind by time (or by name when untimed) and
/// reports L2 and max-norm differences; sup_l2 is the sup over the common
/// times of the L2 difference.
inline CompareReport compare_runs(const fs::path& a, const fs::path& b) {
    const fs::path da = run_dir(a), db = run_dir(b);
    const Manifest ma = load_manifest(da / "manifest.json"), mb = load_manifest(db / "manifest.json");
    auto snapshot = [](const Artifact& x) { return x.kind == "field" || x.kind == "cloud" || x.kind == "profile"; };
    CompareReport rep;
    std::vector<std::string> kinds_a, kinds_b;
    for (const auto& x : ma.artifacts)
        if (snapshot(x)) kinds_a.push_back(x.kind);
    for (const auto& x : mb.artifacts)
        if (snapshot(x)) kinds_b.push_back(x.kind);
    if (!kinds_a.empty() && !kinds_b.empty() && kinds_a.front() != kinds_b.front())
        throw InvalidArgument("compare: shape mismatch (" + kinds_a.front() + " snapshots vs " + kinds_b.front() + ")");
    for (const auto& x : ma.artifacts) {
        if (!snapshot(x)) continue;
        for (const auto& y : mb.artifacts) {
            if (y.kind != x.kind) continue;
            const bool match = x.t && y.t ? std::abs(*x.t - *y.t) <= 1e-9 * std::max(1.0, std::abs(*x.t))
                                          : (!x.t && !y.t && x.path == y.path);
            if (!match) continue;
            auto d = diff_snapshot(da / x.path, db / y.path, x.kind);
            d.t = x.t;
            rep.sup_l2 = std::max(rep.sup_l2, d.l2);
            rep.max_abs = std::max(rep.max_abs, d.max_abs);
            rep.diffs.push_back(std::move(d));
            break;
        }
    }
    if (rep.diffs.empty()) throw InvalidArgument("compare: the runs have no snapshots in common");
    std::vector<std::string> ha, hb;
    for (const auto& x : ma.artifacts)
        if (x.kind == "diagnostics") ha.push_back(x.hash);
    for (const auto& x : mb.artifacts)
        if (x.kind == "diagnostics") hb.push_back(x.hash);
    rep.diagnostics_identical = !ha.empty() && ha == hb;
    return rep;
}

}  // namespace otconv::cli
