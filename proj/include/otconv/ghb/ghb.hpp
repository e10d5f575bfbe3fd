#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "otconv/core/lcg.hpp"
#include "otconv/grid/io.hpp"
#include "otconv/rearrange/rearrange.hpp"

namespace otconv {

// ---------------------------------------------------------------------------
// Right-hand sides G(a, y).

enum class GhbForcingKind { Zero, Contract, Expand, Rotate, Custom };

inline std::string_view to_string(GhbForcingKind k) {
    switch (k) {
        case GhbForcingKind::Zero: return "zero";
        case GhbForcingKind::Contract: return "contract";
        case GhbForcingKind::Expand: return "expand";
        case GhbForcingKind::Rotate: return "rotate";
        case GhbForcingKind::Custom: return "custom";
    }
    return "?";
}

inline GhbForcingKind parse_ghb_forcing(std::string_view s) {
    if (s == "zero") return GhbForcingKind::Zero;
    if (s == "contract") return GhbForcingKind::Contract;
    if (s == "expand") return GhbForcingKind::Expand;
    if (s == "rotate") return GhbForcingKind::Rotate;
    if (s == "custom") return GhbForcingKind::Custom;
    throw InvalidArgument("unknown ghb forcing '" + std::string(s) + "' (expected zero|contract|expand|rotate)");
}

using GhbCustom = std::function<void(std::span<const double> a, std::span<const double> y, std::span<double> G)>;

///   contract  G = kappa (a - y)     drift towards the atoms
///   expand    G = kappa (y - a)     aggregation
///   rotate    G = kappa J (y - a)   semi-geostrophic, d = 2
/// Custom right-hand sides must satisfy |G(a, y)| <= kappa (1 + |y|) for the
/// growth bound to be meaningful; nothing checks that.
struct GhbForcing {
    GhbForcingKind kind = GhbForcingKind::Rotate;
    double kappa = 1.0;
    GhbCustom custom{};

    void evaluate(std::span<const double> a, std::span<const double> y, std::span<double> G) const {
        const std::size_t d = a.size();
        switch (kind) {
            case GhbForcingKind::Zero: std::fill(G.begin(), G.end(), 0.0); return;
            case GhbForcingKind::Contract:
                for (std::size_t k = 0; k < d; ++k) G[k] = kappa * (a[k] - y[k]);
                return;
            case GhbForcingKind::Expand:
                for (std::size_t k = 0; k < d; ++k) G[k] = kappa * (y[k] - a[k]);
                return;
            case GhbForcingKind::Rotate:
                G[0] = -kappa * (y[1] - a[1]);
                G[1] = kappa * (y[0] - a[0]);
                return;
            case GhbForcingKind::Custom: custom(a, y, G); return;
        }
    }
};

inline void validate_ghb_forcing(const GhbForcing& f, int d) {
    require(f.kappa > 0.0 && std::isfinite(f.kappa), "ghb: kappa must be positive");
    require(!(f.kind == GhbForcingKind::Rotate && d != 2), "ghb: rotate needs d = 2");
    require(f.kind != GhbForcingKind::Custom || bool(f.custom), "ghb: custom forcing without a function");
}

/// c in ||Y_{n+1}|| <= h c + (1 + h c) ||Y_n||: kappa (1 + diam D).
inline double growth_constant(const GhbForcing& f, int d) { return f.kappa * (1.0 + std::sqrt(double(d))); }

// ---------------------------------------------------------------------------
// CR stepping.

struct CRState {
    LagrangianCloud cloud;
    double h = 0.01;
    double t = 0.0;
    long step = 0;
    GhbForcing forcing{};
    /// Values after the Euler step and before rearranging, and the pairing
    /// chosen for them (atom i received pre_values[sigma(i)]). Empty before
    /// the first step.
    std::vector<double> pre_values;
    std::optional<TransportAssignment> assignment;
};

inline CRState make_cr_state(LagrangianCloud cloud, double h, GhbForcing forcing) {
    require(h > 0.0 && std::isfinite(h), "cr: h must be positive");
    require(cloud.value_dim() == cloud.dim(), "cr: values and atoms must live in the same space");
    validate_ghb_forcing(forcing, cloud.dim());
    return {std::move(cloud), h, 0.0, 0, std::move(forcing), {}, std::nullopt};
}

/// Euler values Y_i + h G(a_i, Y_i).
inline std::vector<double> euler_values(const LagrangianCloud& c, const GhbForcing& f, double h) {
    const int d = c.dim();
    std::vector<double> z = c.values(), G(d);
    for (std::size_t i = 0; i < c.size(); ++i) {
        f.evaluate(c.atom(i), c.value(i), G);
        for (int k = 0; k < d; ++k) z[i * d + k] += h * G[k];
    }
    return z;
}

/// In 1D the optimal pairing is the stable sort: atoms are increasing, so the
/// k-th atom takes the k-th smallest value.
inline TransportAssignment sort_assignment_1d(const LagrangianCloud& c) {
    const std::size_t n = c.size();
    for (std::size_t i = 1; i < n; ++i) require(c.atom(i)[0] > c.atom(i - 1)[0], "cr: 1D atoms must increase");
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return c.value(a)[0] < c.value(b)[0]; });
    TransportAssignment t;
    t.sigma = Permutation(std::move(idx));
    for (std::size_t i = 0; i < n; ++i) t.cost += squared_distance(c.atom(i), c.value(t.sigma[i]));
    return t;
}

/// Relative cost gap below which two pairings count as tied.
inline constexpr double kTieTolerance = 1e-13;

/// Y_{n+1} = [Y_n + h G(a, Y_n)]*.
inline CRState cr_step(const CRState& s, const RearrangeOptions& opt = {}) {
    CRState out = s;
    out.pre_values = euler_values(s.cloud, s.forcing, s.h);
    const auto z = s.cloud.with_values(out.pre_values);
    auto a = z.dim() == 1 ? sort_assignment_1d(z) : solve_assignment(z, opt);
    // Keep the current labelling when it is optimal too. Lattice data have
    // many exact-cost ties, and a fresh solve may pick another optimum.
    if (!a.sigma.is_identity()) {
        double id_cost = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) id_cost += squared_distance(z.atom(i), z.value(i));
        if (id_cost <= a.cost + kTieTolerance * (1.0 + std::abs(a.cost))) {
            a.sigma = Permutation::identity(z.size());
            a.cost = id_cost;
        }
    }
    out.cloud = z.reindexed(a.sigma);
    out.assignment = std::move(a);
    out.step = s.step + 1;
    out.t = double(out.step) * s.h;
    return out;
}

// ---------------------------------------------------------------------------
// Test functions and the weak form.

struct TestFunction {
    std::function<double(std::span<const double>)> f;
    std::function<void(std::span<const double>, std::span<double>)> grad;
};

/// exp(-1/(1 - s^2)) on |s| < 1, zero outside; smooth with compact support.
inline double bump_1d(double s, double* deriv = nullptr) {
    if (std::abs(s) >= 1.0) {
        if (deriv) *deriv = 0.0;
        return 0.0;
    }
    const double q = 1.0 - s * s;
    const double v = std::exp(-1.0 / q);
    if (deriv) *deriv = v * (-2.0 * s / (q * q));
    return v;
}

/// Tensor bump centred at c with radius r.
inline TestFunction tensor_bump(std::vector<double> c, double r) {
    TestFunction t;
    t.f = [c, r](std::span<const double> y) {
        double v = 1.0;
        for (std::size_t k = 0; k < c.size(); ++k) v *= bump_1d((y[k] - c[k]) / r);
        return v;
    };
    t.grad = [c, r](std::span<const double> y, std::span<double> g) {
        std::vector<double> val(c.size()), der(c.size());
        for (std::size_t k = 0; k < c.size(); ++k) val[k] = bump_1d((y[k] - c[k]) / r, &der[k]);
        for (std::size_t k = 0; k < c.size(); ++k) {
            double p = der[k] / r;
            for (std::size_t l = 0; l < c.size(); ++l)
                if (l != k) p *= val[l];
            g[k] = p;
        }
    };
    return t;
}

inline TestFunction constant_test_function(double value) {
    return {[value](std::span<const double>) { return value; },
            [](std::span<const double>, std::span<double> g) { std::fill(g.begin(), g.end(), 0.0); }};
}

/// Six tensor bumps over [-0.2, 1.2]^d: four (two in 1D) narrow ones in the
/// quadrants, a centred one and a wide one.
inline std::vector<TestFunction> default_test_battery(int d) {
    std::vector<TestFunction> out;
    const double lo = 0.3, hi = 0.7;
    if (d == 1) {
        for (double c : {lo, hi, 0.1, 0.9}) out.push_back(tensor_bump({c}, 0.35));
    } else {
        for (double c0 : {lo, hi})
            for (double c1 : {lo, hi}) out.push_back(tensor_bump({c0, c1}, 0.35));
    }
    out.push_back(tensor_bump(std::vector<double>(d, 0.5), 0.5));
    out.push_back(tensor_bump(std::vector<double>(d, 0.5), 0.9));
    return out;
}

inline double mean_of(const LagrangianCloud& c, const TestFunction& tf) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) s += tf.f(c.value(i));
    return s / double(c.size());
}

/// Residual of d/dt int f(Y) = int grad f(Y) . G(a, Y) over one step:
///   (mean f(Y_{n+1}) - mean f(Y_n)) / h - mean grad f(Y_n) . G(a, Y_n).
/// The left side is the slope of the piecewise-linear trajectory on that
/// step; rearranging does not change mean f, so the residual is the Taylor
/// remainder h/2 mean G.D^2f.G + O(h^2).
inline std::vector<double> weak_equation_residual(const CRState& prev, const CRState& next,
                                                  const std::vector<TestFunction>& battery) {
    require(next.step == prev.step + 1 && prev.cloud.size() == next.cloud.size(),
            "weak_equation_residual: states must be consecutive");
    const int d = prev.cloud.dim();
    const double h = prev.h;
    std::vector<double> G(d), g(d), out;
    for (const auto& tf : battery) {
        double rhs = 0.0;
        for (std::size_t i = 0; i < prev.cloud.size(); ++i) {
            prev.forcing.evaluate(prev.cloud.atom(i), prev.cloud.value(i), G);
            tf.grad(prev.cloud.value(i), g);
            for (int k = 0; k < d; ++k) rhs += g[k] * G[k];
        }
        rhs /= double(prev.cloud.size());
        out.push_back((mean_of(next.cloud, tf) - mean_of(prev.cloud, tf)) / h - rhs);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Density of the values.

struct DensityField {
    int dim = 1;
    int bins = 0;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> width{1.0, 1.0};  // cell width per axis
    std::vector<double> mass;                // bins^dim cells, first axis fastest
    double bandwidth = 0.0;                  // kernel sigma in cells (0 = raw histogram)

    std::array<double, 2> centre(std::size_t cell) const {
        std::array<double, 2> c{lo[0] + (double(cell % bins) + 0.5) * width[0], 0.0};
        if (dim == 2) c[1] = lo[1] + (double(cell / bins) + 0.5) * width[1];
        return c;
    }
    std::size_t occupied() const {
        return std::size_t(std::count_if(mass.begin(), mass.end(), [](double m) { return m > 0.0; }));
    }
};

/// Mass-1 histogram of the values on `bins` cells per axis. The box is the
/// bounding box of the values widened by half a cell on each side, so a
/// lattice of values lands one per cell. A positive bandwidth applies a
/// separable Gaussian (in cells, truncated at 4 sigma) and renormalizes.
inline DensityField density_estimate(const LagrangianCloud& c, int bins, double bandwidth = 0.0) {
    require(c.size() > 0, "density_estimate: empty cloud");
    require(bins >= 1, "density_estimate: bins must be positive");
    require(bandwidth >= 0.0, "density_estimate: bandwidth must be >= 0");
    const int d = c.value_dim();
    require(d == 1 || d == 2, "density_estimate: values must be 1D or 2D");
    DensityField rho;
    rho.dim = d;
    rho.bins = bins;
    rho.bandwidth = bandwidth;
    for (int k = 0; k < d; ++k) {
        double mn = std::numeric_limits<double>::infinity(), mx = -mn;
        for (std::size_t i = 0; i < c.size(); ++i) {
            mn = std::min(mn, c.value(i)[k]);
            mx = std::max(mx, c.value(i)[k]);
        }
        const double span = mx - mn;
        const double w = span > 0.0 ? (bins > 1 ? span / double(bins - 1) : span) : 1.0;
        rho.width[k] = span > 0.0 && bins == 1 ? 2.0 * span : w;
        rho.lo[k] = bins == 1 ? mn - 0.5 * rho.width[k] + 0.5 * span : mn - 0.5 * rho.width[k];
    }
    const std::size_t cells = d == 1 ? std::size_t(bins) : std::size_t(bins) * bins;
    rho.mass.assign(cells, 0.0);
    const double unit = 1.0 / double(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        std::size_t cell = 0, stride = 1;
        for (int k = 0; k < d; ++k) {
            const long j = std::clamp<long>(long(std::floor((c.value(i)[k] - rho.lo[k]) / rho.width[k])), 0, bins - 1);
            cell += std::size_t(j) * stride;
            stride *= std::size_t(bins);
        }
        rho.mass[cell] += unit;
    }
    if (bandwidth > 0.0) {
        const int r = int(std::ceil(4.0 * bandwidth));
        std::vector<double> w(2 * r + 1);
        for (int k = -r; k <= r; ++k) w[k + r] = std::exp(-0.5 * k * k / (bandwidth * bandwidth));
        for (int axis = 0; axis < d; ++axis) {
            std::vector<double> out(cells, 0.0);
            for (std::size_t cell = 0; cell < cells; ++cell) {
                const int i0 = int(cell % bins), i1 = d == 2 ? int(cell / bins) : 0;
                const int ia = axis == 0 ? i0 : i1;
                for (int k = -r; k <= r; ++k) {
                    const int j = ia + k;
                    if (j < 0 || j >= bins) continue;
                    const std::size_t dst = axis == 0 ? std::size_t(j) + std::size_t(bins) * i1
                                                      : std::size_t(i0) + std::size_t(bins) * j;
                    out[dst] += w[k + r] * rho.mass[cell];
                }
            }
            rho.mass = std::move(out);
        }
        const double total = std::accumulate(rho.mass.begin(), rho.mass.end(), 0.0);
        for (double& m : rho.mass) m /= total;
    }
    return rho;
}

/// int |x|^2 rho by the midpoint rule on the histogram cells.
inline double density_second_moment(const DensityField& rho) {
    double s = 0.0;
    for (std::size_t cell = 0; cell < rho.mass.size(); ++cell) {
        const auto x = rho.centre(cell);
        s += rho.mass[cell] * (x[0] * x[0] + x[1] * x[1]);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Weak Monge-Ampere certificate.

struct WeakMAReport {
    /// max over the battery of |mean f(matched atom of z_j) - mean f(a_i)|
    double pushforward_residual = 0.0;
    /// max over j of |value at the matched atom - z_j|
    double pairing_residual = 0.0;
    /// largest u_i + w_j - c(i, j) over all pairs (dual feasibility); 0 without duals
    double dual_infeasibility = 0.0;
    MonotonicityReport monotonicity{};
    bool passed = false;
};

/// Checks that the last rearrangement is a consistent optimal pairing: the
/// matched atoms a_{sigma^-1(j)} of the Euler values z_j push the uniform
/// measure forward exactly, the stored cloud is z re-indexed by sigma, and
/// the pairing is cyclically monotone (discrete ellipticity).
inline WeakMAReport weak_ma_certificate(const CRState& s, const std::vector<TestFunction>& battery,
                                        double tol = 1e-10, std::size_t cycle_trials = 2000) {
    require(s.assignment.has_value() && !s.pre_values.empty(),
            "weak_ma_certificate: no assignment (take a cr_step first)");
    const auto& c = s.cloud;
    const auto& sigma = s.assignment->sigma;
    const int d = c.dim();
    require(sigma.size() == c.size() && s.pre_values.size() == c.values().size(),
            "weak_ma_certificate: stale assignment");
    WeakMAReport r;
    for (std::size_t i = 0; i < c.size(); ++i)
        for (int k = 0; k < d; ++k)
            r.pairing_residual =
                std::max(r.pairing_residual, std::abs(c.value(i)[k] - s.pre_values[std::size_t(sigma[i]) * d + k]));
    if (r.pairing_residual != 0.0) throw InvalidArgument("weak_ma_certificate: stale assignment (cloud changed)");

    const auto inv = sigma.inverse();
    for (const auto& tf : battery) {
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < c.size(); ++i) lhs += tf.f(c.atom(i));
        for (std::size_t j = 0; j < c.size(); ++j) rhs += tf.f(c.atom(std::size_t(inv[j])));
        r.pushforward_residual = std::max(r.pushforward_residual, std::abs(lhs - rhs) / double(c.size()));
    }
    const auto& a = *s.assignment;
    if (!a.atom_potential.empty()) {
        const auto z = c.with_values(s.pre_values);
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t j = 0; j < c.size(); ++j)
                r.dual_infeasibility = std::max(r.dual_infeasibility, a.atom_potential[i] + a.value_potential[j] -
                                                                          squared_distance(c.atom(i), z.value(j)));
    }
    r.monotonicity = cyclical_monotonicity_check(c, cycle_trials, 6, tol);
    r.passed = r.pushforward_residual <= tol && r.monotonicity.passed &&
               r.dual_infeasibility <= tol * (1.0 + std::abs(a.cost));
    return r;
}

// ---------------------------------------------------------------------------
// Runs.

struct CRRunConfig {
    int dim = 2;
    int n = 16;  // atoms per axis on the box
    GhbForcing forcing{};
    /// identity | shear | random
    std::string initial = "shear";
    double amplitude = 0.25;
    std::uint64_t seed = 1;
    double T = 1.0;
    double h = 0.01;
    RearrangeOptions rearrange{};
    /// Start from y0* instead of y0. The schemes' first step jumps to
    /// approximately y0* for every h, so without this the piecewise-linear
    /// trajectories differ by O(1) on [0, h] and cannot self-converge.
    bool rearrange_initial = true;
    /// Keep every stride-th cloud in the trajectory (0 keeps none).
    int trajectory_stride = 1;
    double monotonicity_tol = 1e-10;
};

inline LagrangianCloud make_cr_initial(const CRRunConfig& cfg) {
    const Grid g = Grid::box(cfg.dim, cfg.n);
    auto c = LagrangianCloud::identity_on_box(g);
    std::vector<double> v = c.values();
    const int d = cfg.dim;
    if (cfg.initial == "identity") {
    } else if (cfg.initial == "shear") {
        // a non-monotone displacement: the first axis slides with the last
        for (std::size_t i = 0; i < c.size(); ++i)
            v[i * d] += cfg.amplitude * std::sin(2 * std::numbers::pi * c.atom(i)[d - 1] * (d == 1 ? 2.0 : 1.0));
    } else if (cfg.initial == "random") {
        Lcg64 rng(cfg.seed);
        for (double& x : v) x += cfg.amplitude * rng.uniform(-1.0, 1.0);
    } else {
        throw InvalidArgument("unknown cr initial data '" + cfg.initial + "' (expected identity|shear|random)");
    }
    return c.with_values(std::move(v));
}

struct CRDiagnostics {
    double t = 0.0;
    double l2_norm = 0.0;
    double bound_margin = std::numeric_limits<double>::quiet_NaN();  // h c + (1 + h c)||Y_n|| - ||Y_{n+1}||
    double monotonicity_worst = 0.0;
    double weak_residual_max = std::numeric_limits<double>::quiet_NaN();
};

inline const char* cr_csv_header() { return "t,l2_norm,bound_margin,monotonicity_worst,weak_residual_max"; }

inline void write_csv_row(std::ostream& os, const CRDiagnostics& r) {
    auto opt = [&](double x) {
        if (!std::isnan(x)) os << format_real(x);
    };
    os << format_real(r.t) << ',' << format_real(r.l2_norm) << ',';
    opt(r.bound_margin);
    os << ',' << format_real(r.monotonicity_worst) << ',';
    opt(r.weak_residual_max);
    os << '\n';
}

struct CRTrajectory {
    std::vector<double> times;
    std::vector<LagrangianCloud> clouds;

    /// Piecewise-linear interpolation in t.
    LagrangianCloud at(double t) const {
        require(!times.empty(), "trajectory: empty");
        if (t <= times.front()) return clouds.front();
        if (t >= times.back()) return clouds.back();
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const std::size_t k = std::size_t(it - times.begin());
        const double t0 = times[k - 1], t1 = times[k];
        const double w = (t - t0) / (t1 - t0);
        if (w <= 0.0) return clouds[k - 1];
        std::vector<double> v = clouds[k - 1].values();
        const auto& b = clouds[k].values();
        for (std::size_t q = 0; q < v.size(); ++q) v[q] = (1.0 - w) * v[q] + w * b[q];
        return clouds[k - 1].with_values(std::move(v));
    }
};

struct CRRunResult {
    std::vector<CRDiagnostics> rows;
    CRTrajectory trajectory;
    /// every post-step cloud passed the monotonicity certificate
    bool all_monotone = true;
    /// the growth bound held as an exact floating-point inequality every step
    bool bound_held = true;
    double worst_weak_residual = 0.0;
    double worst_monotonicity = 0.0;
    bool degenerate = false;  // some iterate had repeated values
    std::vector<std::string> warnings;
};

inline CRRunResult cr_run(const CRRunConfig& cfg, std::ostream* csv = nullptr,
                          const std::function<void(const CRState&)>& observer = {}) {
    require(cfg.T > 0.0 && cfg.h > 0.0, "cr_run: T and h must be positive");
    require(cfg.n >= 2, "cr_run: need at least two atoms per axis");
    const auto steps = static_cast<long long>(std::llround(cfg.T / cfg.h));
    require(steps >= 1, "cr_run: T must cover at least one step");
    auto y0 = make_cr_initial(cfg);
    if (cfg.rearrange_initial)
        y0 = cfg.dim == 1 ? y0.reindexed(sort_assignment_1d(y0).sigma) : convex_rearrange(y0, cfg.rearrange);
    CRState s = make_cr_state(std::move(y0), cfg.h, cfg.forcing);
    const double c = growth_constant(cfg.forcing, cfg.dim);
    const auto battery = default_test_battery(cfg.dim);

    CRRunResult res;
    auto keep = [&](long long k) {
        if (cfg.trajectory_stride > 0 && k % cfg.trajectory_stride == 0) {
            res.trajectory.times.push_back(s.t);
            res.trajectory.clouds.push_back(s.cloud);
        }
    };
    auto mono = [&](const LagrangianCloud& cl) {
        return cyclical_monotonicity_check(cl, 2000, 6, cfg.monotonicity_tol, 1).worst_violation;
    };
    if (csv) *csv << cr_csv_header() << '\n';
    CRDiagnostics r0;
    r0.l2_norm = s.cloud.l2_norm();
    r0.monotonicity_worst = mono(s.cloud);
    res.rows.push_back(r0);
    if (csv) write_csv_row(*csv, r0);
    keep(0);
    if (observer) observer(s);

    for (long long k = 1; k <= steps; ++k) {
        CRState next = cr_step(s, cfg.rearrange);
        CRDiagnostics r;
        r.t = next.t;
        r.l2_norm = next.cloud.l2_norm();
        const double prev_norm = s.cloud.l2_norm();
        r.bound_margin = cfg.h * c + (1.0 + cfg.h * c) * prev_norm - r.l2_norm;
        if (!(r.bound_margin >= 0.0)) res.bound_held = false;
        r.monotonicity_worst = mono(next.cloud);
        res.worst_monotonicity = std::max(res.worst_monotonicity, r.monotonicity_worst);
        if (r.monotonicity_worst > cfg.monotonicity_tol) res.all_monotone = false;
        const auto w = weak_equation_residual(s, next, battery);
        r.weak_residual_max = 0.0;
        for (double x : w) r.weak_residual_max = std::max(r.weak_residual_max, std::abs(x));
        res.worst_weak_residual = std::max(res.worst_weak_residual, r.weak_residual_max);
        if (!res.degenerate && next.cloud.has_repeated_values()) {
            res.degenerate = true;
            res.warnings.push_back("repeated values at t=" + format_real(next.t) +
                                   ": the optimal pairing is not unique and the trajectory depends on tie-breaking");
        }
        res.rows.push_back(r);
        if (csv) write_csv_row(*csv, r);
        s = std::move(next);
        keep(k);
        if (observer) observer(s);
    }
    return res;
}

/// sup over the times of `fine` of the L2 distance between the two
/// piecewise-linear trajectories.
inline double sup_l2_distance(const CRTrajectory& coarse, const CRTrajectory& fine) {
    require(!coarse.times.empty() && !fine.times.empty(), "sup_l2_distance: empty trajectory");
    double worst = 0.0;
    for (std::size_t k = 0; k < fine.times.size(); ++k)
        worst = std::max(worst, coarse.at(fine.times[k]).l2_distance(fine.clouds[k]));
    return worst;
}

/// (int ||Y_coarse(t) - Y_fine(t)||^2 dt)^(1/2) by the trapezoid rule on the
/// times of `fine`.
inline double l2t_distance(const CRTrajectory& coarse, const CRTrajectory& fine) {
    require(fine.times.size() >= 2, "l2t_distance: need at least two fine times");
    double acc = 0.0, prev = coarse.at(fine.times[0]).l2_distance(fine.clouds[0]);
    for (std::size_t k = 1; k < fine.times.size(); ++k) {
        const double d = coarse.at(fine.times[k]).l2_distance(fine.clouds[k]);
        acc += 0.5 * (fine.times[k] - fine.times[k - 1]) * (prev * prev + d * d);
        prev = d;
    }
    return std::sqrt(acc);
}

}  // namespace otconv
