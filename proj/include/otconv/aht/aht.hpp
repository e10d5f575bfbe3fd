#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "otconv/aht/presets.hpp"
#include "otconv/core/stats.hpp"
#include "otconv/grid/advect.hpp"
#include "otconv/grid/box.hpp"
#include "otconv/grid/io.hpp"
#include "otconv/grid/spectral.hpp"

namespace otconv {

/// Divergence-free part of y for the dissipation K:
///   torus, Identity      Leray projection
///   torus, NegLaplacian  periodic Stokes solve
///   box,   Identity      Neumann projection (v parallel to the walls)
/// Box runs with K = NegLaplacian are not supported.
struct KProjection {
    VectorField v;
    ScalarField p;
    double max_divergence = 0.0;
    int iterations = 0;
};

inline void require_dissipative(const Grid& g, DissipationKind K, const char* who) {
    require(K != DissipationKind::None, std::string(who) + ": K = none is not dissipative");
    require(!(g.is_box() && K == DissipationKind::NegLaplacian),
            std::string(who) + ": K = neg_laplacian is only available on the torus");
    require(g.is_torus() || g.dim() == 2, std::string(who) + ": box runs need a 2D grid");
}

inline KProjection project_k(const VectorField& y, DissipationKind K, const ScalarField* warm = nullptr) {
    const Grid& g = y.grid();
    require_dissipative(g, K, "project_k");
    if (g.is_box()) {
        auto bp = neumann_poisson_project(y, {}, warm);
        return {std::move(bp.v), std::move(bp.p), bp.max_divergence, bp.iterations};
    }
    auto pr = K == DissipationKind::Identity ? leray_project(y) : stokes_project(y);
    const double div = max_abs(divergence(pr.v));
    return {std::move(pr.v), std::move(pr.p), div, 0};
}

struct AHTState {
    VectorField y;
    VectorField v;
    ScalarField p;
    double t = 0.0;
    DissipationKind K = DissipationKind::Identity;
    double max_divergence = 0.0;
};

inline AHTState make_aht_state(VectorField y0, DissipationKind K) {
    require(y0.rank() == y0.grid().dim(), "aht: y must have d components");
    require(y0.all_finite(), "aht: non-finite initial data");
    auto pr = project_k(y0, K);
    return {std::move(y0), std::move(pr.v), std::move(pr.p), 0.0, K, pr.max_divergence};
}

enum class AHTScheme { Splitting, Midpoint };

inline AHTScheme parse_aht_scheme(std::string_view s) {
    if (s == "splitting") return AHTScheme::Splitting;
    if (s == "midpoint") return AHTScheme::Midpoint;
    throw InvalidArgument("unknown aht scheme '" + std::string(s) + "' (expected splitting|midpoint)");
}

/// One step of dy/dt + (P_K y . grad) y = 0. Splitting advects y with the
/// velocity of the current state; Midpoint uses the velocity of a half step.
/// On return v and p belong to the new y.
inline AHTState aht_step(const AHTState& s, double dt, AHTScheme scheme = AHTScheme::Splitting) {
    require(dt > 0.0 && std::isfinite(dt), "aht_step: dt must be positive");
    VectorField y = [&] {
        if (scheme == AHTScheme::Splitting) return advect(s.y, s.v, dt);
        const auto half = advect(s.y, s.v, 0.5 * dt);
        const auto vh = project_k(half, s.K, &s.p).v;
        return advect(s.y, vh, dt);
    }();
    auto pr = project_k(y, s.K, &s.p);
    return {std::move(y), std::move(pr.v), std::move(pr.p), s.t + dt, s.K, pr.max_divergence};
}

/// integral of |y - x|^2 / 2; on the torus x is the representative in [0,1)^d.
inline double transport_cost(const VectorField& y) {
    const Grid& g = y.grid();
    double s = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto x = g.point(i);
        for (int a = 0; a < y.rank(); ++a) {
            const double d = y(i, a) - (a < g.dim() ? x[a] : 0.0);
            s += d * d;
        }
    }
    return 0.5 * s * g.cell_volume();
}

inline double transport_cost(const AHTState& s) { return transport_cost(s.y); }

/// integral of v . K v.
inline double dissipation(const VectorField& v, DissipationKind K) {
    require(K != DissipationKind::None, "dissipation: K = none is not dissipative");
    if (K == DissipationKind::Identity) {
        const double n = l2_norm(v);
        return n * n;
    }
    return gradient_energy(v);
}

inline double dissipation(const AHTState& s) { return dissipation(s.v, s.K); }

/// Spearman correlation between -x_d and the horizontal mean of theta = -y_d / g
/// (d is the vertical axis). +1 is a stable, monotonically decreasing profile.
inline double stratification_score(const VectorField& y, double gravity = 1.0) {
    const Grid& g = y.grid();
    const int vert = g.dim() - 1;
    const int n = g.n();
    if (g.dim() == 1) {
        std::vector<double> z(n), th(n);
        for (int j = 0; j < n; ++j) {
            z[j] = -g.coord_1d(j);
            th[j] = -y(std::size_t(j), vert) / gravity;
        }
        return spearman(z, th);
    }
    std::vector<double> z(n), th(n, 0.0);
    for (int j = 0; j < n; ++j) {
        z[j] = -g.coord_1d(j);
        for (int i = 0; i < n; ++i) th[j] += -y(g.index(i, j), vert) / gravity;
        th[j] /= n;
    }
    return spearman(z, th);
}

struct AHTRunConfig {
    DomainKind domain = DomainKind::Torus;
    int dim = 2;
    int n = 64;
    DissipationKind K = DissipationKind::NegLaplacian;
    YPreset preset{};
    double T = 1.0;
    double dt = 1e-3;
    /// When > 0 each step uses min(dt, cfl_target * h / max|v|), so dt acts
    /// as the largest step; slow late-time relaxation then costs few steps.
    double cfl_target = 0.0;
    AHTScheme scheme = AHTScheme::Splitting;
    /// Allowed relative per-step increase of the transport cost.
    double energy_rel_tol = 1e-8;
    /// Write a field snapshot every `snapshot_stride` steps (0: never).
    int snapshot_stride = 0;
};

struct AHTDiagnostics {
    double t = 0.0;
    double transport_cost = 0.0;
    double dissipation = 0.0;
    double max_y = 0.0;
    double v_l2 = 0.0;
    double mom1_drift = 0.0;
    double mom2_drift = 0.0;
    double strat_score = 0.0;
};

inline const char* aht_csv_header() { return "t,transport_cost,dissipation,max_y,v_l2,mom1_drift,mom2_drift,strat_score"; }

inline void write_csv_row(std::ostream& os, const AHTDiagnostics& r) {
    os << format_real(r.t) << ',' << format_real(r.transport_cost) << ',' << format_real(r.dissipation) << ','
       << format_real(r.max_y) << ',' << format_real(r.v_l2) << ',' << format_real(r.mom1_drift) << ','
       << format_real(r.mom2_drift) << ',' << format_real(r.strat_score) << '\n';
}

struct AHTRunResult {
    explicit AHTRunResult(AHTState s) : final_state(std::move(s)) {}

    std::vector<AHTDiagnostics> rows;
    AHTState final_state;
    double initial_y_l2 = 0.0;
    double initial_v_l2 = 0.0;
    double initial_max_y = 0.0;
    /// max over steps of (cost_{k+1} - cost_k) / cost_k (negative when the cost always fell)
    double worst_rel_increase = -std::numeric_limits<double>::infinity();
    /// max over steps of (cost_{k+1} - cost_k) / dt + dissipation_k
    double worst_balance_residual = -std::numeric_limits<double>::infinity();
    std::size_t energy_violations = 0;
    double max_cfl = 0.0;
    std::size_t cfl_warnings = 0;
    double max_divergence = 0.0;
    /// max|y(t)| - max|y0| over the run
    double max_norm_excess = -std::numeric_limits<double>::infinity();
    std::vector<std::string> warnings;
};

inline Grid make_grid(DomainKind kind, int dim, int n) {
    return kind == DomainKind::Torus ? Grid::torus(dim, n) : Grid::box(dim, n);
}

inline AHTDiagnostics aht_diagnostics(const AHTState& s, const std::vector<double>& mean0, double m2_0, double gravity) {
    AHTDiagnostics r;
    r.t = s.t;
    r.transport_cost = transport_cost(s);
    r.dissipation = dissipation(s);
    r.max_y = max_norm(s.y);
    r.v_l2 = l2_norm(s.v);
    const auto mean = component_means(s.y);
    for (std::size_t c = 0; c < mean.size(); ++c) r.mom1_drift = std::max(r.mom1_drift, std::abs(mean[c] - mean0[c]));
    r.mom2_drift = std::abs(second_moment(s.y) - m2_0);
    r.strat_score = stratification_score(s.y, gravity);
    return r;
}

using SnapshotSink = std::function<void(const Field&, double t)>;

/// Runs the Eulerian AHT flow from a preset and records one diagnostics row
/// per step (row 0 is the initial state). `csv` receives rows as they are
/// produced.
inline AHTRunResult aht_run(const AHTRunConfig& cfg, std::ostream* csv = nullptr, const SnapshotSink& snap = {}) {
    require(cfg.T > 0.0 && cfg.dt > 0.0, "aht_run: T and dt must be positive");
    const Grid g = make_grid(cfg.domain, cfg.dim, cfg.n);
    require_dissipative(g, cfg.K, "aht_run");
    require(cfg.cfl_target >= 0.0 && cfg.cfl_target <= kCflMax, "aht_run: cfl_target must lie in [0, 1]");
    const auto fixed_steps = static_cast<long long>(std::llround(cfg.T / cfg.dt));
    require(cfg.cfl_target > 0.0 || fixed_steps >= 1, "aht_run: T must cover at least one step");

    AHTState s = make_aht_state(make_initial_y(g, cfg.preset), cfg.K);
    AHTRunResult res(s);
    const auto mean0 = component_means(s.y);
    const double m2_0 = second_moment(s.y);
    res.initial_y_l2 = l2_norm(s.y);
    res.initial_v_l2 = l2_norm(s.v);
    res.initial_max_y = max_norm(s.y);
    res.max_divergence = s.max_divergence;

    auto emit = [&](const AHTDiagnostics& r) {
        res.rows.push_back(r);
        if (csv) write_csv_row(*csv, r);
    };
    if (csv) *csv << aht_csv_header() << '\n';
    emit(aht_diagnostics(s, mean0, m2_0, cfg.preset.gravity));
    if (snap && cfg.snapshot_stride > 0) snap(s.y, s.t);

    for (long long k = 1;; ++k) {
        double dt = cfg.dt;
        if (cfg.cfl_target > 0.0) {
            if (s.t >= cfg.T * (1.0 - 1e-12)) break;
            const double vmax = max_norm(s.v);
            if (vmax > 0.0) dt = std::min(dt, cfg.cfl_target * g.spacing() / vmax);
            dt = std::min(dt, cfg.T - s.t);
        } else if (k > fixed_steps) {
            break;
        }
        const double cfl = cfl_number(s.v, dt);
        res.max_cfl = std::max(res.max_cfl, cfl);
        if (cfl > kCflWarn) {
            if (res.cfl_warnings == 0) {
                std::ostringstream os;
                os << "CFL " << cfl << " above " << kCflWarn << " at t=" << s.t;
                res.warnings.push_back(os.str());
            }
            ++res.cfl_warnings;
        }
        const double cost0 = res.rows.back().transport_cost;
        const double diss0 = res.rows.back().dissipation;
        const double t_next = cfg.cfl_target > 0.0 ? s.t + dt : double(k) * cfg.dt;
        s = aht_step(s, dt, cfg.scheme);
        s.t = t_next;
        const auto r = aht_diagnostics(s, mean0, m2_0, cfg.preset.gravity);
        const double inc = r.transport_cost - cost0;
        const double rel = cost0 > 0.0 ? inc / cost0 : (inc > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        res.worst_rel_increase = std::max(res.worst_rel_increase, rel);
        res.worst_balance_residual = std::max(res.worst_balance_residual, inc / dt + diss0);
        if (rel > cfg.energy_rel_tol) ++res.energy_violations;
        res.max_divergence = std::max(res.max_divergence, s.max_divergence);
        res.max_norm_excess = std::max(res.max_norm_excess, r.max_y - res.initial_max_y);
        emit(r);
        if (snap && cfg.snapshot_stride > 0 && k % cfg.snapshot_stride == 0) snap(s.y, s.t);
    }
    res.final_state = std::move(s);
    return res;
}

}  // namespace otconv
