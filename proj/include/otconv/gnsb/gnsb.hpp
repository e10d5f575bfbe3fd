#pragma once

#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "otconv/aht/aht.hpp"
#include "otconv/core/stats.hpp"
#include "otconv/gnsb/forcing.hpp"

namespace otconv {

struct GNSBState {
    VectorField y;  // m components; for m = 2d the node stores (yt, yh)
    VectorField v;  // d components
    ScalarField p;
    double eps = 1.0;
    DissipationKind K = DissipationKind::Identity;
    double t = 0.0;
    double max_divergence = 0.0;
};

enum class GNSBScheme { Splitting, Strang };

inline GNSBScheme parse_gnsb_scheme(std::string_view s) {
    if (s == "splitting") return GNSBScheme::Splitting;
    if (s == "strang") return GNSBScheme::Strang;
    throw InvalidArgument("unknown gnsb scheme '" + std::string(s) + "' (expected splitting|strang)");
}

struct GNSBOptions {
    GNSBScheme scheme = GNSBScheme::Splitting;
    /// Zero the mean velocity after each projection (torus only; on the box
    /// the projected velocity has no mean to speak of).
    bool remove_mean_velocity = true;
};

inline GNSBState make_gnsb_state(VectorField y0, VectorField v0, double eps, DissipationKind K) {
    const Grid& g = y0.grid();
    require(eps >= 0.0 && std::isfinite(eps), "gnsb: eps must be >= 0");
    require(y0.rank() == g.dim() || y0.rank() == 2 * g.dim(), "gnsb: y must have d or 2d components");
    require(v0.grid() == g && v0.rank() == g.dim(), "gnsb: v must be a d-component field on the grid of y");
    require_dissipative(g, K, "gnsb");
    require(y0.all_finite() && v0.all_finite(), "gnsb: non-finite initial data");
    return {std::move(y0), std::move(v0), ScalarField(g, 1), eps, K, 0.0, 0.0};
}

/// F (rank d) and G (rank m) sampled on the grid at time t.
inline std::pair<VectorField, Field> forcing_fields(const ForcingSpec& s, double t, const Field& y) {
    const Grid& g = y.grid();
    const int d = g.dim();
    require(forcing_value_dim(s, d) == y.rank(), "forcing: y has the wrong number of components for this forcing");
    VectorField F(g, d);
    Field G(g, y.rank());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto x = g.point(i);
        evaluate_forcing(s, t, std::span<const double>(x.data(), std::size_t(d)), y.at(i), F.at(i), G.at(i));
    }
    return {std::move(F), std::move(G)};
}

namespace gnsb_detail {

inline void remove_mean(VectorField& v) {
    const auto m = component_means(v);
    for (std::size_t i = 0; i < v.nodes(); ++i)
        for (int a = 0; a < v.rank(); ++a) v(i, a) -= m[a];
}

inline KProjection project(const VectorField& w, const GNSBState& s, const GNSBOptions& opt) {
    if (s.y.grid().is_box()) return project_k(w, DissipationKind::Identity, &s.p);
    auto lp = leray_project(w);
    KProjection pr{std::move(lp.v), std::move(lp.p), 0.0, 0};
    if (opt.remove_mean_velocity) remove_mean(pr.v);
    pr.max_divergence = max_abs(divergence(pr.v));
    return pr;
}

// Solves (a + b K) u = f componentwise.
inline VectorField solve_k(const VectorField& f, DissipationKind K, double a, double b) {
    if (K == DissipationKind::Identity) return (1.0 / (a + b)) * f;
    return solve_helmholtz(f, a, b);
}

inline VectorField apply_k(const VectorField& v, DissipationKind K) {
    if (K == DissipationKind::Identity) return v;
    return -1.0 * laplacian(v);
}

// y <- y + tau G(t, x, y) with the explicit midpoint rule.
inline void react(Field& y, const ForcingSpec& s, double t, double tau) {
    auto [F1, G1] = forcing_fields(s, t, y);
    Field mid = y;
    mid.axpy(0.5 * tau, G1);
    auto [F2, G2] = forcing_fields(s, t + 0.5 * tau, mid);
    y.axpy(tau, G2);
}

}  // namespace gnsb_detail

/// eps (dv/dt + (v.grad)v) + K v + grad p = F(x, y), div v = 0,
/// dy/dt + (v.grad) y = G(x, y).
///
/// Splitting (first order): semi-Lagrangian self-advection of v, implicit
/// K and F(y^n), projection; then y is transported by the new v and the
/// source is applied with one Euler step. K is treated implicitly so that
/// dt/eps >> 1 stays stable.
///
/// Strang: Crank-Nicolson in K with F at a predicted half-step y, then y is
/// transported by the mean of the old and new velocities between two
/// half-step reactions. Second order in the linear part; the self-advection
/// of v uses the old velocity and is first order.
inline GNSBState gnsb_step(const GNSBState& s, const ForcingSpec& forcing, double dt, const GNSBOptions& opt = {}) {
    require(s.eps > 0.0, "gnsb_step: eps must be positive (use zero_inertia_step for eps = 0)");
    require(dt > 0.0 && std::isfinite(dt), "gnsb_step: dt must be positive");
    const Grid& g = s.y.grid();
    require(!(g.is_box() && s.K != DissipationKind::Identity), "gnsb_step: box runs need K = identity");
    const double eps = s.eps;
    GNSBState out = s;

    const VectorField vadv = advect(s.v, s.v, dt);
    if (opt.scheme == GNSBScheme::Splitting) {
        auto [F, G] = forcing_fields(forcing, s.t, s.y);
        VectorField rhs = eps * vadv;
        rhs.axpy(dt, F);
        auto pr = gnsb_detail::project(gnsb_detail::solve_k(rhs, s.K, eps, dt), s, opt);
        out.v = std::move(pr.v);
        out.p = std::move(pr.p);
        out.max_divergence = pr.max_divergence;
        out.y = advect(s.y, out.v, dt);
        out.y.axpy(dt, forcing_fields(forcing, s.t, out.y).second);
    } else {
        Field yh = advect(s.y, s.v, 0.5 * dt);
        gnsb_detail::react(yh, forcing, s.t, 0.5 * dt);
        const auto F = forcing_fields(forcing, s.t + 0.5 * dt, yh).first;
        VectorField rhs = eps * vadv;
        rhs.axpy(-0.5 * dt, gnsb_detail::apply_k(vadv, s.K));
        rhs.axpy(dt, F);
        auto pr = gnsb_detail::project(gnsb_detail::solve_k(rhs, s.K, eps, 0.5 * dt), s, opt);
        out.v = std::move(pr.v);
        out.p = std::move(pr.p);
        out.max_divergence = pr.max_divergence;
        Field y = s.y;
        gnsb_detail::react(y, forcing, s.t, 0.5 * dt);
        VectorField vmid = s.v;
        vmid += out.v;
        vmid *= 0.5;
        y = advect(y, vmid, dt);
        gnsb_detail::react(y, forcing, s.t + 0.5 * dt, 0.5 * dt);
        out.y = std::move(y);
    }
    out.t = s.t + dt;
    return out;
}

/// Velocity of the zero-inertia system K v + grad p = F(x, y), div v = 0.
inline KProjection zero_inertia_velocity(const GNSBState& s, const ForcingSpec& forcing, const GNSBOptions& opt = {}) {
    require(s.K != DissipationKind::None, "zero_inertia_step: K = none is not coercive");
    const auto F = forcing_fields(forcing, s.t, s.y).first;
    if (s.y.grid().is_torus() && s.K == DissipationKind::NegLaplacian) {
        auto sp = stokes_project(F);
        const double div = max_abs(divergence(sp.v));
        return {std::move(sp.v), std::move(sp.p), div, 0};
    }
    return gnsb_detail::project(F, s, opt);
}

/// One step of the zero-inertia system: v from the instantaneous balance,
/// then transport of y by v and the source G.
inline GNSBState zero_inertia_step(const GNSBState& s, const ForcingSpec& forcing, double dt,
                                   const GNSBOptions& opt = {}) {
    require(dt > 0.0 && std::isfinite(dt), "zero_inertia_step: dt must be positive");
    require_dissipative(s.y.grid(), s.K, "zero_inertia_step");
    GNSBState out = s;
    auto pr = zero_inertia_velocity(s, forcing, opt);
    out.y = advect(s.y, pr.v, dt);
    out.y.axpy(dt, forcing_fields(forcing, s.t, out.y).second);
    out.t = s.t + dt;
    // report the velocity that balances the new state
    out.v = std::move(pr.v);
    out.p = std::move(pr.p);
    out.max_divergence = pr.max_divergence;
    auto next = zero_inertia_velocity(out, forcing, opt);
    out.v = std::move(next.v);
    out.p = std::move(next.p);
    out.max_divergence = std::max(out.max_divergence, next.max_divergence);
    return out;
}

inline std::optional<std::string> stiffness_warning(double dt, double eps) {
    if (eps > 0.0 && dt / eps > 1.0) {
        std::ostringstream os;
        os << "dt/eps = " << dt / eps << " > 1: inertia is stiff at this step; consider the zero-inertia system";
        return os.str();
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Energy bookkeeping.

struct GNSBEnergy {
    double t = 0.0;
    double total_energy = 0.0;  // 1/2 int (eps |v|^2 + |y|^2)
    double dissipation = 0.0;   // int K v . v
    double power = 0.0;         // int F . v + G . y
};

inline GNSBEnergy gnsb_energy(const GNSBState& s, const ForcingSpec& forcing) {
    GNSBEnergy e;
    e.t = s.t;
    const double vn = l2_norm(s.v), yn = l2_norm(s.y);
    e.total_energy = 0.5 * (s.eps * vn * vn + yn * yn);
    e.dissipation = dissipation(s.v, s.K);
    auto [F, G] = forcing_fields(forcing, s.t, s.y);
    e.power = inner(F, s.v) + inner(G, s.y);
    return e;
}

/// Per-step residuals of the energy inequality
///   (E_{k+1} - E_k)/dt + (D_k + D_{k+1})/2 - (P_k + P_{k+1})/2
/// and the largest positive one.
struct EnergyCheck {
    std::vector<double> residuals;
    double max_excess = 0.0;
};

inline EnergyCheck energy_inequality_check(const std::vector<GNSBEnergy>& rows) {
    EnergyCheck c;
    for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
        const double dt = rows[k + 1].t - rows[k].t;
        require(dt > 0.0, "energy_inequality_check: times must increase");
        const double r = (rows[k + 1].total_energy - rows[k].total_energy) / dt +
                         0.5 * (rows[k].dissipation + rows[k + 1].dissipation) -
                         0.5 * (rows[k].power + rows[k + 1].power);
        c.residuals.push_back(r);
        c.max_excess = std::max(c.max_excess, r);
    }
    return c;
}

// ---------------------------------------------------------------------------
// Runs.

struct GNSBRunConfig {
    DomainKind domain = DomainKind::Torus;
    int dim = 2;
    int n = 64;
    DissipationKind K = DissipationKind::Identity;
    double eps = 1e-2;
    /// Solve the zero-inertia system instead of the inertial one.
    bool zero_inertia = false;
    ForcingSpec forcing{};
    /// For m = d the preset is y0; for m = 2d it is the initial anchor
    /// displacement yt0 - x, with labels yh0 = x.
    YPreset preset{};
    double T = 1.0;
    double dt = 1e-3;
    GNSBOptions options{};
    int snapshot_stride = 0;
};

inline VectorField make_gnsb_initial_y(const Grid& g, const ForcingSpec& f, const YPreset& p) {
    const int d = g.dim();
    const int m = forcing_value_dim(f, d);
    auto base = make_initial_y(g, p);
    if (m == d) return base;
    require(m == 2 * d, "gnsb: preset initial data needs m = d or m = 2d");
    VectorField y(g, m);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto x = g.point(i);
        for (int a = 0; a < d; ++a) {
            y(i, a) = x[a] + base(i, a);
            y(i, d + a) = x[a];
        }
    }
    return y;
}

struct GNSBDiagnostics {
    double t = 0.0;
    double total_energy = 0.0;
    double dissipation = 0.0;
    double excess = 0.0;  // energy residual of the step that ended here (0 on row 0)
    double y_err_vs_hf = std::numeric_limits<double>::quiet_NaN();
};

inline const char* gnsb_csv_header() { return "t,total_energy,dissipation,excess,y_err_vs_hf"; }

inline void write_csv_row(std::ostream& os, const GNSBDiagnostics& r) {
    os << format_real(r.t) << ',' << format_real(r.total_energy) << ',' << format_real(r.dissipation) << ','
       << format_real(r.excess) << ',';
    if (!std::isnan(r.y_err_vs_hf)) os << format_real(r.y_err_vs_hf);
    os << '\n';
}

struct GNSBRunResult {
    explicit GNSBRunResult(GNSBState s) : final_state(std::move(s)) {}

    std::vector<GNSBDiagnostics> rows;
    std::vector<GNSBEnergy> energy;
    GNSBState final_state;
    double max_excess = 0.0;
    double max_cfl = 0.0;
    double max_divergence = 0.0;
    std::vector<std::string> warnings;
};

/// Steps the inertial (or zero-inertia) system from a preset with v0 = 0.
/// `observer`, when set, sees every state including the initial one.
inline GNSBRunResult gnsb_run(const GNSBRunConfig& cfg, std::ostream* csv = nullptr, const SnapshotSink& snap = {},
                              const std::function<void(const GNSBState&)>& observer = {}) {
    require(cfg.T > 0.0 && cfg.dt > 0.0, "gnsb_run: T and dt must be positive");
    const Grid g = make_grid(cfg.domain, cfg.dim, cfg.n);
    validate_forcing(cfg.forcing, cfg.dim);
    require(cfg.zero_inertia || cfg.eps > 0.0, "gnsb_run: eps must be positive for the inertial system");
    const auto steps = static_cast<long long>(std::llround(cfg.T / cfg.dt));
    require(steps >= 1, "gnsb_run: T must cover at least one step");

    auto y0 = make_gnsb_initial_y(g, cfg.forcing, cfg.preset);
    GNSBState s = make_gnsb_state(std::move(y0), VectorField(g, g.dim()), cfg.zero_inertia ? 0.0 : cfg.eps, cfg.K);
    if (cfg.zero_inertia) {
        auto pr = zero_inertia_velocity(s, cfg.forcing, cfg.options);
        s.v = std::move(pr.v);
        s.p = std::move(pr.p);
        s.max_divergence = pr.max_divergence;
    }
    GNSBRunResult res(s);
    if (!cfg.zero_inertia)
        if (auto w = stiffness_warning(cfg.dt, cfg.eps)) res.warnings.push_back(*w);

    auto record = [&](const GNSBState& st) {
        res.energy.push_back(gnsb_energy(st, cfg.forcing));
        GNSBDiagnostics r;
        r.t = st.t;
        r.total_energy = res.energy.back().total_energy;
        r.dissipation = res.energy.back().dissipation;
        if (res.energy.size() >= 2) {
            const auto c = energy_inequality_check({res.energy[res.energy.size() - 2], res.energy.back()});
            r.excess = c.residuals[0];
            res.max_excess = std::max(res.max_excess, r.excess);
        }
        res.rows.push_back(r);
        if (csv) write_csv_row(*csv, r);
        if (observer) observer(st);
    };
    if (csv) *csv << gnsb_csv_header() << '\n';
    record(s);
    if (snap && cfg.snapshot_stride > 0) snap(s.y, s.t);

    bool cfl_warned = false;
    for (long long k = 1; k <= steps; ++k) {
        const double cfl = cfl_number(s.v, cfg.dt);
        res.max_cfl = std::max(res.max_cfl, cfl);
        if (cfl > kCflWarn && !cfl_warned) {
            std::ostringstream os;
            os << "CFL " << cfl << " above " << kCflWarn << " at t=" << s.t;
            res.warnings.push_back(os.str());
            cfl_warned = true;
        }
        s = cfg.zero_inertia ? zero_inertia_step(s, cfg.forcing, cfg.dt, cfg.options)
                             : gnsb_step(s, cfg.forcing, cfg.dt, cfg.options);
        s.t = double(k) * cfg.dt;
        res.max_divergence = std::max(res.max_divergence, s.max_divergence);
        record(s);
        if (snap && cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0) snap(s.y, s.t);
    }
    res.final_state = std::move(s);
    return res;
}

// ---------------------------------------------------------------------------
// Zero-inertia limit experiment.

struct SqrtEpsConfig {
    /// Run settings shared by every eps; `run.eps` and `run.zero_inertia` are ignored.
    GNSBRunConfig run = [] {
        GNSBRunConfig c;
        c.n = 64;
        c.K = DissipationKind::Identity;
        c.T = 1.0;
        c.dt = 1e-3;
        return c;
    }();
    std::vector<double> eps{1e-1, 1e-2, 1e-3, 1e-4};
    /// Threads over eps values; 0 = one per eps up to the hardware count.
    int workers = 0;
};

struct SqrtEpsEntry {
    double eps = 0.0;
    double y_sup_err = 0.0;  // sup_t ||y_eps - y_HF||_2
    double v_l2t_err = 0.0;  // (int_0^T ||v_eps - v_HF||_2^2 dt)^(1/2)
    double v_diss_err = 0.0; // (int_0^T int K(v_eps - v_HF).(v_eps - v_HF) dt)^(1/2)
    double max_excess = 0.0;
    std::vector<GNSBDiagnostics> rows;  // y_err_vs_hf populated
    std::vector<std::string> warnings;
};

struct SqrtEpsReport {
    std::vector<SqrtEpsEntry> entries;
    double y_slope = 0.0;
    double v_slope = 0.0;
};

/// Runs the inertial system for each eps next to the zero-inertia reference,
/// in lockstep on the same grid and dt, from the preset y0 with v0 = 0.
inline SqrtEpsEntry sqrt_eps_single(const GNSBRunConfig& base, double eps) {
    require(eps > 0.0 && std::isfinite(eps), "sqrt_eps_experiment: eps must be positive");
    require(base.T > 0.0 && base.dt > 0.0, "sqrt_eps_experiment: T and dt must be positive");
    require(base.K != DissipationKind::None, "sqrt_eps_experiment: K must be strictly dissipative");
    validate_forcing(base.forcing, base.dim);
    const Grid g = make_grid(base.domain, base.dim, base.n);
    const auto steps = static_cast<long long>(std::llround(base.T / base.dt));
    require(steps >= 1, "sqrt_eps_experiment: T must cover at least one step");

    const auto y0 = make_gnsb_initial_y(g, base.forcing, base.preset);
    GNSBState se = make_gnsb_state(y0, VectorField(g, g.dim()), eps, base.K);
    GNSBState hf = make_gnsb_state(y0, VectorField(g, g.dim()), 0.0, base.K);
    {
        auto pr = zero_inertia_velocity(hf, base.forcing, base.options);
        hf.v = std::move(pr.v);
        hf.p = std::move(pr.p);
    }
    SqrtEpsEntry e;
    e.eps = eps;
    if (auto w = stiffness_warning(base.dt, eps)) e.warnings.push_back(*w);

    std::vector<GNSBEnergy> energy;
    double prev_v2 = 0.0, prev_d = 0.0;
    auto record = [&](long long k) {
        energy.push_back(gnsb_energy(se, base.forcing));
        GNSBDiagnostics r;
        r.t = se.t;
        r.total_energy = energy.back().total_energy;
        r.dissipation = energy.back().dissipation;
        if (energy.size() >= 2) {
            r.excess = energy_inequality_check({energy[energy.size() - 2], energy.back()}).residuals[0];
            e.max_excess = std::max(e.max_excess, r.excess);
        }
        r.y_err_vs_hf = l2_norm(se.y - hf.y);
        e.y_sup_err = std::max(e.y_sup_err, r.y_err_vs_hf);
        const VectorField dv = se.v - hf.v;
        const double v2 = std::pow(l2_norm(dv), 2), dd = dissipation(dv, base.K);
        if (k > 0) {
            // trapezoid in time
            e.v_l2t_err += 0.5 * base.dt * (prev_v2 + v2);
            e.v_diss_err += 0.5 * base.dt * (prev_d + dd);
        }
        prev_v2 = v2;
        prev_d = dd;
        e.rows.push_back(r);
    };
    record(0);
    for (long long k = 1; k <= steps; ++k) {
        se = gnsb_step(se, base.forcing, base.dt, base.options);
        hf = zero_inertia_step(hf, base.forcing, base.dt, base.options);
        se.t = hf.t = double(k) * base.dt;
        record(k);
    }
    e.v_l2t_err = std::sqrt(e.v_l2t_err);
    e.v_diss_err = std::sqrt(e.v_diss_err);
    return e;
}

inline SqrtEpsReport sqrt_eps_experiment(const SqrtEpsConfig& cfg) {
    require(cfg.eps.size() >= 2, "sqrt_eps_experiment: need at least two eps values");
    for (double e : cfg.eps)
        require(e > 0.0 && std::isfinite(e), "sqrt_eps_experiment: eps must be positive (eps = 0 is the reference)");
    SqrtEpsReport rep;
    rep.entries.resize(cfg.eps.size());
    const std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers =
        std::min(cfg.eps.size(), cfg.workers > 0 ? std::size_t(cfg.workers) : hw);
    std::vector<std::exception_ptr> errors(cfg.eps.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < cfg.eps.size(); i += workers) {
                try {
                    rep.entries[i] = sqrt_eps_single(cfg.run, cfg.eps[i]);
                } catch (...) {
                    errors[i] = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    for (auto& ex : errors)
        if (ex) std::rethrow_exception(ex);

    std::vector<double> eps, ye, ve;
    for (const auto& en : rep.entries) {
        eps.push_back(en.eps);
        ye.push_back(en.y_sup_err);
        ve.push_back(en.v_l2t_err);
    }
    rep.y_slope = loglog_slope(eps, ye);
    rep.v_slope = loglog_slope(eps, ve);
    return rep;
}

}  // namespace otconv
